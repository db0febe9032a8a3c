#include "scalevec/kernels.hpp"

#include <cmath>
#include <cstddef>

namespace scalevec {

namespace {

inline float row_dot(std::span<const float> row, std::span<const float> query) {
    float sum = 0.0f;
    for (std::size_t d = 0; d < query.size(); ++d) sum += row[d] * query[d];
    return sum;
}

}  // namespace

void scan_dot_serial(const Matrix<float>& rows, std::span<const float> query, std::span<float> scores) {
    require(query.size() == rows.cols(), "scan_dot: query dimension mismatch");
    require(scores.size() <= rows.rows(), "scan_dot: more scores than rows");
    for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = row_dot(rows.row(i), query);
}

void scan_dot_parallel(const Matrix<float>& rows, std::span<const float> query, std::span<float> scores) {
    require(query.size() == rows.cols(), "scan_dot: query dimension mismatch");
    require(scores.size() <= rows.rows(), "scan_dot: more scores than rows");
    const auto n = static_cast<std::ptrdiff_t>(scores.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        scores[static_cast<std::size_t>(i)] = row_dot(rows.row(static_cast<std::size_t>(i)), query);
    }
}

std::vector<float> row_norms(const Matrix<float>& rows) {
    std::vector<float> norms(rows.rows());
    const auto n = static_cast<std::ptrdiff_t>(rows.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto r = rows.row(static_cast<std::size_t>(i));
        double sq = 0.0;
        for (float x : r) sq += static_cast<double>(x) * x;
        norms[static_cast<std::size_t>(i)] = static_cast<float>(std::sqrt(sq));
    }
    return norms;
}

Matrix<float> normalize_rows(const Matrix<float>& rows) {
    Matrix<float> out = rows;
    const auto norms = row_norms(rows);
    for (std::size_t i = 0; i < out.rows(); ++i) {
        if (norms[i] == 0.0f) continue;
        const float inv = 1.0f / norms[i];
        for (auto& x : out.row(i)) x *= inv;
    }
    return out;
}

}  // namespace scalevec

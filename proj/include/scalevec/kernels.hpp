#pragma once

#include <span>

#include "scalevec/common.hpp"

namespace scalevec {

// scores[i] = rows.row(i) . query for i < scores.size().
// The serial version is the reference; the OpenMP version partitions rows
// across threads and produces bit-identical scores.
void scan_dot_serial(const Matrix<float>& rows, std::span<const float> query, std::span<float> scores);
void scan_dot_parallel(const Matrix<float>& rows, std::span<const float> query, std::span<float> scores);

// L2 norm of every row.
std::vector<float> row_norms(const Matrix<float>& rows);

// Copy with every nonzero row scaled to unit length; zero rows stay zero.
Matrix<float> normalize_rows(const Matrix<float>& rows);

}  // namespace scalevec

#pragma once

#include <cstddef>
#include <optional>
#include <span>

namespace scalevec {

// Index of the largest defined value; ties go to the earliest index, which on
// an increasing scale grid is the smallest beta.
inline std::optional<std::size_t> peak_index(std::span<const std::optional<double>> values) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!values[i]) continue;
        if (!best || *values[i] > *values[*best]) best = i;
    }
    return best;
}

}  // namespace scalevec

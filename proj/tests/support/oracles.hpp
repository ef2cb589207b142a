#pragma once

// Independent reference implementations shared by unit and acceptance tests.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "vocaldyn/align/dtw.hpp"

namespace vocaldyn::testing {

/// Minimum over every monotone step sequence, enumerated explicitly. `paths`
/// receives the number of complete sequences (0: unreachable corner).
inline double brute_force_dtw(const std::vector<double>& c, std::size_t rows, std::size_t cols, std::size_t& paths) {
    double best = std::numeric_limits<double>::infinity();
    paths = 0;
    std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double acc) {
        if (i == rows - 1 && j == cols - 1) {
            ++paths;
            best = std::min(best, acc);
            return;
        }
        const std::size_t di[3] = {1, 2, 1}, dj[3] = {1, 1, 2};
        const double w[3] = {2, 3, 3};
        for (int s = 0; s < 3; ++s)
            if (i + di[s] < rows && j + dj[s] < cols)
                walk(i + di[s], j + dj[s], acc + w[s] * c[(i + di[s]) * cols + j + dj[s]]);
    };
    walk(0, 0, 2 * c[0]);
    return best;
}

/// Cost of a path recomputed from its steps; NaN when a step is not allowed.
inline double dtw_path_cost(const align::WarpingPath& p, const std::vector<double>& c, std::size_t cols) {
    double acc = 2 * c[0];
    for (std::size_t k = 1; k < p.steps.size(); ++k) {
        const auto [i0, j0] = p.steps[k - 1];
        const auto [i1, j1] = p.steps[k];
        const std::size_t di = i1 - i0, dj = j1 - j0;
        if (!((di == 1 && dj == 1) || (di == 2 && dj == 1) || (di == 1 && dj == 2)))
            return std::numeric_limits<double>::quiet_NaN();
        acc += (di == 1 && dj == 1 ? 2.0 : 3.0) * c[i1 * cols + j1];
    }
    return acc;
}

/// Frame-by-frame count of |p - y| <= tol over labels other than `masked`,
/// as a percentage.
inline double direct_accuracy(const std::vector<std::uint8_t>& p, const std::vector<std::uint8_t>& y, int tol,
                              std::uint8_t masked = 255) {
    long long hit = 0, n = 0;
    for (std::size_t t = 0; t < y.size(); ++t) {
        if (y[t] == masked) continue;
        ++n;
        const int d = static_cast<int>(p[t]) - static_cast<int>(y[t]);
        if (d >= -tol && d <= tol) ++hit;
    }
    return 100.0 * static_cast<double>(hit) / static_cast<double>(n);
}

}  // namespace vocaldyn::testing

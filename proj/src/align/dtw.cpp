#include "vocaldyn/align/dtw.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace vocaldyn::align {
namespace {

struct Step {
    std::size_t di, dj;
    double weight;
};
// Order doubles as the tie-break priority.
constexpr Step kSteps[3] = {{1, 1, 2.0}, {2, 1, 3.0}, {1, 2, 3.0}};
constexpr std::uint8_t kNone = 255;

}  // namespace

WarpingPath dtw(std::span<const double> cost, std::size_t rows, std::size_t cols, const DtwOptions& opt) {
    if (rows == 0 || cols == 0) throw InvalidArgument("dtw needs a non-empty cost matrix");
    if (cost.size() != rows * cols) throw ShapeError("dtw cost size does not match rows x cols");
    for (double c : cost)
        if (!(c >= 0.0) || std::isinf(c)) throw InvalidArgument("dtw costs must be finite and non-negative");

    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> acc(rows * cols, inf);
    std::vector<std::uint8_t> from(rows * cols, kNone);

    const double slope = rows > 1 ? static_cast<double>(cols - 1) / static_cast<double>(rows - 1) : 0.0;
    auto in_band = [&](std::size_t i, std::size_t j) {
        if (opt.band == 0) return true;
        return std::abs(static_cast<double>(j) - slope * static_cast<double>(i)) <= static_cast<double>(opt.band);
    };

    acc[0] = 2.0 * cost[0];
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            if ((i == 0 && j == 0) || !in_band(i, j)) continue;
            const double c = cost[i * cols + j];
            double best = inf;
            std::uint8_t arg = kNone;
            for (std::uint8_t s = 0; s < 3; ++s) {
                if (i < kSteps[s].di || j < kSteps[s].dj) continue;
                const double prev = acc[(i - kSteps[s].di) * cols + (j - kSteps[s].dj)];
                if (prev == inf) continue;
                const double v = prev + kSteps[s].weight * c;
                if (v < best) {
                    best = v;
                    arg = s;
                }
            }
            acc[i * cols + j] = best;
            from[i * cols + j] = arg;
        }
    }

    const double total = acc[rows * cols - 1];
    if (total == inf)
        throw InfeasiblePathError("no monotone step sequence reaches (" + std::to_string(rows - 1) + ", " +
                                  std::to_string(cols - 1) + ")");

    WarpingPath path;
    path.total_cost = total;
    std::size_t i = rows - 1, j = cols - 1;
    path.steps.emplace_back(i, j);
    while (i != 0 || j != 0) {
        const auto s = from[i * cols + j];
        i -= kSteps[s].di;
        j -= kSteps[s].dj;
        path.steps.emplace_back(i, j);
    }
    std::reverse(path.steps.begin(), path.steps.end());
    return path;
}

}  // namespace vocaldyn::align

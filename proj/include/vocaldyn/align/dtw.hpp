#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "vocaldyn/error.hpp"

namespace vocaldyn::align {

class InfeasiblePathError : public Error {
public:
    using Error::Error;
};

struct WarpingPath {
    std::vector<std::pair<std::size_t, std::size_t>> steps;  // (score frame, audio frame)
    double total_cost = 0.0;
};

struct DtwOptions {
    /// Half width, in audio frames, of a band around the straight line from
    /// (0,0) to (I-1,J-1). 0 disables the band.
    std::size_t band = 0;
};

/// Step sizes {(1,1),(2,1),(1,2)} with weights {2,3,3} on the target cell;
/// D(0,0) = 2 c(0,0). Equal-cost predecessors are preferred in the order
/// (1,1), (2,1), (1,2). `cost` is I x J row-major and must be non-negative.
/// Throws InfeasiblePathError when (I-1, J-1) cannot be reached.
WarpingPath dtw(std::span<const double> cost, std::size_t rows, std::size_t cols, const DtwOptions& options = {});

}  // namespace vocaldyn::align

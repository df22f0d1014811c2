#pragma once

#include <vector>

namespace corestable {

/// A fractional committee: x ∈ [0,1]^m with Σ x_i = k.
struct FractionalAllocation {
    std::vector<double> x;
    long k = 0;

    bool operator==(const FractionalAllocation&) const = default;
};

}  // namespace corestable

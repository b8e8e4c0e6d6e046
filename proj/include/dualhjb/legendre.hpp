#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dualhjb {

/// Result of a discrete Legendre transform evaluated at sorted queries.
struct DiscreteTransform {
    std::vector<double> value;        // transform value (refined when requested)
    std::vector<double> discrete;     // plain min/max over the nodes
    std::vector<double> argument;     // refined optimizer location
    std::vector<std::size_t> index;   // discrete optimizer node
    std::vector<bool> at_boundary;    // optimizer at the first or last node
};

/// inf_j { w_j + x y_j } for every query x (ascending), y ascending and
/// positive. Linear time: the optimizer index of a convex sequence is
/// nonincreasing in x, so one merge pass over the lower hull suffices.
/// With refine, a parabola in log y through the optimizer and its two
/// neighbours sharpens the value (never above the discrete minimum).
DiscreteTransform inf_transform(std::span<const double> y, std::span<const double> w,
                                std::span<const double> x, bool refine = true);

/// sup_i { v_i - y x_i } for every query y (ascending), x ascending positive.
DiscreteTransform sup_transform(std::span<const double> x, std::span<const double> v,
                                std::span<const double> y, bool refine = true);

/// O(n^2) reference used by tests and small problems.
DiscreteTransform inf_transform_naive(std::span<const double> y, std::span<const double> w,
                                      std::span<const double> x);

}  // namespace dualhjb

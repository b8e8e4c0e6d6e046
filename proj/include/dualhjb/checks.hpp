#pragma once

#include <string>
#include <vector>

#include "dualhjb/dual_solver.hpp"
#include "dualhjb/primal.hpp"
#include "dualhjb/reference.hpp"

namespace dualhjb {

struct Check {
    std::string name;
    bool passed = false;
    double value = 0.0;      // observed statistic
    double threshold = 0.0;  // pass bound for `value`
    std::string detail;
};

bool all_passed(const std::vector<Check>& checks);

/// W_y < 0, W_yy > 0, W >= 0, W(t_n) >= W(t_{n+1}), W >= U2~ and
/// W <= K_W (1 + y^{-q}) at interior nodes; clamp inactivity >= 99%.
std::vector<Check> dual_invariants(const DualSolution& dual, const ConjugateBundle& bundle, double tol = 1e-10);

/// gap in [-1e-8, gap_tol] on every valid slice.
Check gap_check(const PrimalSolution& primal);

/// V_x > 0, V_xx < 0 and discrete concavity / monotonicity of V on valid slices.
Check primal_shape_check(const PrimalSolution& primal);

/// sup_x {V(t_n, x) - x y} against W(t_n, y) for interior y nodes in
/// [y_lo, y_hi]; pass when the error is within 2x the interpolation tolerance.
Check involution_check(const PrimalSolution& primal, const DualSolution& dual, double y_lo = 0.2,
                       double y_hi = 5.0);

/// Max relative error of W on y in [y_lo, y_hi], t <= t_max.
Check merton_dual_check(const DualSolution& dual, const MertonCase& m, double y_lo = 0.2, double y_hi = 5.0,
                        double t_max = 0.9, double tol = 5e-3);

/// Max relative error of V on x in [x_lo, x_hi] for t < T.
Check merton_value_check(const PrimalSolution& primal, const MertonCase& m, double x_lo = 0.25,
                         double x_hi = 4.0, double tol = 1e-2);

/// Max relative deviation of Pi / x from the Merton fraction at interior nodes.
Check merton_fraction_check(const PrimalSolution& primal, const MertonCase& m, double x_lo = 0.25,
                            double x_hi = 4.0, double tol = 2e-2);

struct OrderStudy {
    std::vector<std::size_t> levels;
    std::vector<double> errors;  // max relative error of W(0, y) on [0.2, 5]
    std::vector<double> orders;  // log2 of successive error ratios
};

/// Halving dt at fixed n_y.
OrderStudy temporal_order_study(const MertonCase& m, std::size_t n_y, const std::vector<std::size_t>& n_t);

/// Halving dxi; each level is extrapolated in time from n_t / 2 and n_t steps
/// so the time error does not mask the spatial one.
OrderStudy spatial_order_study(const MertonCase& m, const std::vector<std::size_t>& intervals, std::size_t n_t);

/// Every observed order within target +- tol.
Check order_check(const std::string& name, const OrderStudy& study, double target, double tol = 0.3);

}  // namespace dualhjb

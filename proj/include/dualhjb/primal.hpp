#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "dualhjb/dual_solver.hpp"
#include "dualhjb/model.hpp"

namespace dualhjb {

/// Primal value function and feedback maps recovered from a DualSolution,
/// sampled on the dual time nodes and a geometric wealth grid.
struct PrimalSolution {
    std::vector<double> t;
    std::vector<double> x;
    // [n][i]
    std::vector<std::vector<double>> V;
    std::vector<std::vector<double>> V_x;
    std::vector<std::vector<double>> V_xx;
    std::vector<std::vector<double>> V_t;
    std::vector<std::vector<double>> C;   // consumption rate
    std::vector<std::vector<double>> Pi;  // amount in the risky asset
    std::vector<std::vector<double>> gap;      // discrete min - V  (>= 0)
    std::vector<std::vector<double>> gap_tol;  // interpolation tolerance of the node
    std::vector<bool> slice_valid;             // recovery succeeded on slice n
    double p = 0.5;

    std::size_t n_slices() const { return t.size(); }

    /// V(t, x) by cubic Hermite interpolation in x (values and V_x) and linear
    /// interpolation in t. Outside the x-grid V is extended by p-homogeneity.
    double value(double t, double x) const;

    /// (C, Pi) at (t, x): linear in x between nodes, proportional below and
    /// above the grid, linear in t; slices without valid feedback are skipped.
    std::pair<double, double> feedback(double t, double x) const;
};

/// inf over the y-grid of W(t_n, y) + x y with local quadratic refinement.
/// Throws ArgminAtBoundary when the minimizer sits on an end node.
double legendre_min(const DualSolution& dual, std::size_t n, double x);

struct Derivatives {
    double V_x = 0.0;
    double V_xx = 0.0;
    double V_t = 0.0;
};

/// V_x = the y with W_y(t_n, y) = -x (monotone cubic inverse), V_xx = -1/W_yy,
/// V_t = W_t at that y. Throws OutOfRange when -x is outside the W_y range.
Derivatives recover_derivatives(const DualSolution& dual, std::size_t n, double x);

double consumption_feedback(const UtilityModel& utility, const DualSolution& dual, std::size_t n, double x);

/// -b V_x / (sigma^2 V_xx); 0 at x = 0. Throws DegenerateCurvature.
double portfolio_feedback(const MarketModel& market, const DualSolution& dual, std::size_t n, double x);
double portfolio_from_derivatives(double b, double sigma, double x, double V_x, double V_xx);

struct PrimalOptions {
    std::size_t n_x = 241;
    double shrink = 0.05;
    std::optional<std::pair<double, double>> x_range;  // overrides the derived range
};

/// Wealth range implied by the dual gradient range over every non-degenerate
/// slice, shrunk by `shrink` on each side.
std::pair<double, double> reliable_x_range(const DualSolution& dual, double shrink = 0.05);

PrimalSolution recover_primal(const DualSolution& dual, const MarketModel& market, const UtilityModel& utility,
                              const PrimalOptions& opt = {});

struct ResidualReport {
    std::vector<std::vector<double>> r;  // NaN where not evaluated
    double max_abs = 0.0;
    double max_rel = 0.0;  // |r| / (1 + |V_t|)
    double l2 = 0.0;       // root mean square over evaluated nodes
};

/// r = -V_t - U1*(t, V_x, x) + (b^2 / 2 sigma^2) V_x^2 / V_xx at interior nodes
/// of every slice before T.
ResidualReport primal_hjb_residual(const PrimalSolution& primal, const MarketModel& market,
                                   const UtilityModel& utility);

/// min_j { W(t_n, y_j) + x_i y_j } - V(t_n, x_i). Throws
/// NegativeGapBeyondTolerance below -1e-8 max(1, |V|).
double weak_duality_gap(const PrimalSolution& primal, const DualSolution& dual, std::size_t n, std::size_t i);

}  // namespace dualhjb

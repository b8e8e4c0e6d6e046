#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "dualhjb/model.hpp"
#include "dualhjb/transforms.hpp"

namespace dualhjb {

/// Uniform grid in xi = log y on [y_min, y_max] and uniform time steps on [0, T].
struct LogGrid {
    double y_min = 1e-3;
    double y_max = 1e3;
    std::size_t n_y = 400;
    std::size_t n_t = 200;
    double T = 1.0;

    static LogGrid make(double y_min, double y_max, std::size_t n_y, std::size_t n_t, double T);

    double dxi() const;
    double dt() const;
    double xi(std::size_t j) const;
    double y(std::size_t j) const;
    double t(std::size_t n) const;
    std::vector<double> nodes() const;
};

struct DualDiagnostics {
    double max_residual = 0.0;       // max |residual| over interior nodes
    double max_rel_residual = 0.0;   // |residual| / (1 + |W_t| + |source|)
    std::vector<int> iterations;     // fixed-point iterations per step (index n)
    double min_clamp_inactive = 1.0; // worst per-slice fraction of unclamped interior nodes
    double growth_constant = 0.0;    // fitted K_W in W <= K_W (1 + y^{-q})
    bool boundary_layer_warning = false;
    double truncation_change = 0.0;  // relative change at y_min when y_min is halved
};

struct DualSolution {
    LogGrid grid;
    double p = 0.5;
    std::vector<double> y;
    // Slices indexed [n][j], n = 0..n_t (t_n = n dt), j = 0..n_y-1.
    std::vector<std::vector<double>> W;
    std::vector<std::vector<double>> W_y;
    std::vector<std::vector<double>> W_yy;
    std::vector<std::vector<double>> W_t;
    std::vector<std::pair<double, double>> clamp_bounds;  // (m, M) used at step n
    DualDiagnostics diagnostics;

    std::size_t n_slices() const { return W.size(); }
};

/// W(T, y_j) = Ũ2(y_j). Throws SaturatedConjugate when Ũ2(y_min) hits the cap.
std::vector<double> terminal_slice(const LogGrid& grid, const ConjugateBundle& bundle);

/// (m v q) ^ M.
double clamp_gradient(double q, double m, double M);

struct BoundaryFit {
    double left = 0.0;
    double right = 0.0;
    bool left_degenerate = false;
    bool right_degenerate = false;
};

/// Power-law extrapolation C y^{-p/(1-p)} to the two end nodes, with C
/// least-squares fitted on the `window` outermost interior nodes at each side.
BoundaryFit boundary_values(std::span<const double> slice, const LogGrid& grid, double p,
                            std::size_t window = 5);

struct StepOptions {
    double tolerance = 1e-10;  // sup-change, relative to max(1, sup |W|)
    int max_iterations = 50;
    std::size_t fit_window = 5;
    double clamp_widen_low = 0.5;
    double clamp_widen_high = 2.0;
};

struct StepResult {
    std::vector<double> slice;
    int iterations = 0;
    double clamp_inactive = 1.0;
    std::pair<double, double> clamp = {0.0, 0.0};
};

/// One implicit step from t_{n+1} to t_n = t_next - dt.
StepResult step_backward(std::span<const double> W_next, double t_n, const LogGrid& grid,
                         const ConjugateBundle& bundle, const MarketModel& market,
                         const StepOptions& opt = {});

struct SolveOptions {
    StepOptions step;
    bool check_truncation = false;
    bool check_convexity = true;
};

DualSolution solve_dual(const MarketModel& market, const UtilityModel& utility, const LogGrid& grid,
                        const SolveOptions& opt = {});

/// Same solve from a prebuilt bundle.
DualSolution solve_dual(const MarketModel& market, const ConjugateBundle& bundle, const LogGrid& grid,
                        const SolveOptions& opt = {});

/// Relative change of W(0, y_min) when y_min is halved at fixed dxi.
double truncation_sensitivity(const MarketModel& market, const ConjugateBundle& bundle, const LogGrid& grid,
                              const SolveOptions& opt = {});

/// Fills W_y, W_yy (log-grid differences) and W_t (centred in time, one-sided
/// at both ends) from W. Used by the solver and by CSV loading.
void compute_derivatives(DualSolution& sol);

}  // namespace dualhjb

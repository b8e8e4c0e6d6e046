#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "dualhjb/dual_solver.hpp"
#include "dualhjb/model.hpp"
#include "dualhjb/simulate.hpp"

namespace dualhjb {

// ---------------------------------------------------------------- random horizon

struct RandomHorizonSpec {
    Field2 G1;    // (t, c)
    Field2 G1_c;  // may be empty
    Field2 G2;    // (t, x)
    Field2 G2_x;  // may be empty
    HorizonLaw law;
    double T = 1.0;
    double p = 0.5;  // growth exponent of G1, G2
};

struct WeightCheck {
    double max_density_error = 0.0;  // |int_0^t f - (F(t) - F(0))| over the sample times
    double min_density = 0.0;
    double min_survival = 0.0;
};

/// Samples the law on [0, T]: throws NegativeWeight when f < 0 or F
/// decreases, InvalidArgument when F leaves [0, 1] or the density does not
/// integrate to F within 1e-6.
WeightCheck check_horizon_law(const HorizonLaw& law, double T);

/// U1(t,c,x) = G1(t,c)(1 - F(t)) + G2(t,x) f(t), U2(x) = (1 - F(T)) G2(T,x).
UtilityModel random_horizon_transform(const RandomHorizonSpec& spec);

/// Closed-form variant for G1 = a_c c^p/p, G2 = a_x x^p/p with optional
/// discount e^{-delta t} on both.
UtilityModel power_random_horizon(double p, const HorizonLaw& law, double T, double a_c = 1.0,
                                  double a_x = 1.0, double delta = 0.0);

// ---------------------------------------------------------------- illiquid market

struct IlliquidParams {
    double b_L = 0.2;
    double sigma_L = 0.3;
    double b_I = 0.1;
    double sigma_I = 0.4;
    double rho = 0.0;
    double p = 0.5;
    double beta = 1.0;
    double arrival_rate = 1.0;  // exponential inter-arrival law of the trading dates
    double margin = 1e-6;       // required beta - k_{Y,p}
};

/// k_{Y,p} = p rho sigma_I b_L / sigma_L - p(1-p) rho^2 sigma_I^2 / 2.
double discount_shift(const IlliquidParams& par);
/// b_L - rho sigma_I sigma_L (1 - p).
double effective_drift(const IlliquidParams& par);

struct IlliquidReduction {
    MarketModel market;  // (b_eff, sigma_L) on [0, T]
    double k = 0.0;
    double b_eff = 0.0;
    double discount = 0.0;  // beta - k
};

/// Throws InvalidArgument on out-of-range parameters, DiscountTooSmall when
/// beta - k <= margin.
IlliquidReduction illiquid_reduction(const IlliquidParams& par, double T = 1.0);

struct LogMoments {
    double mean = 0.0;
    double var = 0.0;
};

/// Law of log J_t: mean (b_I - sigma_I^2/2 - rho sigma_I b_L/sigma_L + rho^2 sigma_I^2/2) t,
/// variance sigma_I^2 (1 - rho^2) t.
LogMoments log_J_moments(const IlliquidParams& par, double t);

/// (K/p) E[(x + y J_t)^p] by Gauss-Hermite of the given order. Throws
/// QuadratureUnstable when doubling the order moves the result by more
/// than 1e-6 relative.
double liquidation_value(const IlliquidParams& par, double K, double t, double x, double y,
                         std::size_t quad_order = 32);

/// Same quadrature without the stability check.
double liquidation_value_fixed(const IlliquidParams& par, double K, double t, double x, double y,
                               std::size_t quad_order);

/// K with V(r) = K r^p / p for the discounted infinite-horizon Merton
/// problem; throws DiscountTooSmall when the value is infinite.
double merton_infinite_constant(double beta, double b, double sigma, double p);

struct KvOptions {
    double y_min = 1e-3;
    double y_max = 1e3;
    std::size_t n_y = 400;
    std::size_t n_t = 200;
    double T_trunc = 0.0;  // 0: smallest T with e^{-(beta - k) T} < 1e-4
    int max_iter = 60;
    double tol = 1e-8;
    std::size_t quad_order = 32;
    bool force_alpha_zero = false;
    bool richardson = true;      // extrapolate in time from n_t and 2 n_t
    std::size_t alpha_scan = 21; // coarse scan before golden-section
    double alpha_tol = 1e-3;
    double K_start = 1.0;
};

struct KvIterate {
    double K = 0.0;
    double alpha0 = 0.0;
    double value = 0.0;  // sup over alpha0 at r = 1
};

struct KvResult {
    double K = 0.0;
    double alpha0 = 0.0;
    bool converged = false;
    double T_trunc = 0.0;
    double truncation_factor = 0.0;  // e^{-(beta - k) T_trunc}
    std::vector<KvIterate> trace;
};

double default_truncation(const IlliquidParams& par);

/// K_{n+1} = p sup_{alpha0} value(alpha0; K_n). Throws NoConvergence (after
/// max_iter) with the trace in the message; `result_on_failure` receives it.
KvResult kv_fixed_point(const IlliquidParams& par, const KvOptions& opt = {},
                        KvResult* result_on_failure = nullptr);

/// Value at r = 1 for a fixed K and alpha0 (one pass of the map).
double kv_objective(const IlliquidParams& par, double K, double alpha0, const KvOptions& opt = {});

}  // namespace dualhjb

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dualhjb/model.hpp"
#include "dualhjb/primal.hpp"
#include "dualhjb/transforms.hpp"

namespace dualhjb {

struct SimConfig {
    std::size_t n_paths = 100000;
    double dt_sim = 1e-3;
    std::uint64_t seed = 7;
    bool antithetic = true;
    unsigned threads = 0;  // 0: hardware concurrency
    double budget = 2e9;   // max n_paths * steps
};

struct SimReport {
    double estimate = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    std::size_t n_absorbed = 0;
    std::size_t n_rejected = 0;
    double mean_terminal_wealth = 0.0;  // mean terminal state (Y_T for the dual)
};

/// (t, x) -> (c, pi).
using Policy = std::function<std::pair<double, double>(double, double)>;
/// (t, y) -> u >= 0.
using DualPolicy = std::function<double(double, double)>;

/// Feedback maps of a PrimalSolution, scaled by (gamma_c, gamma_pi).
Policy feedback_policy(const PrimalSolution& primal, double gamma_c = 1.0, double gamma_pi = 1.0);

struct TraceRow {
    std::size_t path = 0;
    double t = 0.0;
    double X = 0.0;
    double c = 0.0;
    double pi = 0.0;
};

struct TraceOptions {
    std::size_t n_paths = 0;  // first paths to record
    std::size_t stride = 10;  // record every stride-th step
};

/// Closed-loop wealth under each policy with shared noise. Reports follow
/// the order of `policies`; the trace records policy 0.
std::vector<SimReport> simulate_policies(double t0, double x0, std::span<const Policy> policies,
                                         const MarketModel& market, const UtilityModel& utility,
                                         const SimConfig& cfg, std::vector<TraceRow>* trace = nullptr,
                                         const TraceOptions& trace_opt = {});

SimReport simulate_closed_loop(double t0, double x0, const PrimalSolution& primal, const MarketModel& market,
                               const UtilityModel& utility, const SimConfig& cfg,
                               std::vector<TraceRow>* trace = nullptr, const TraceOptions& trace_opt = {});

/// Estimate of the dual functional with Y_{k+1} = Y_k exp(-theta dW - theta^2 dt / 2) - u dt.
SimReport simulate_dual_state(double t0, double y0, const DualPolicy& u_policy, const MarketModel& market,
                              const ConjugateBundle& bundle, const SimConfig& cfg);

struct PerturbationCheck {
    double gamma_c = 1.0;
    double gamma_pi = 1.0;
    SimReport report;
    double bound = 0.0;  // V + 2 SE, or the two-sided band for (1, 1)
    bool passed = false;
};

struct TestReport {
    double value = 0.0;  // V(t0, x0)
    std::vector<PerturbationCheck> checks;
    bool passed() const;
};

/// (1, 1) is checked against |estimate - V| <= 2 SE; every other pair
/// against estimate <= V + 2 SE.
TestReport verification_test(double t0, double x0, const PrimalSolution& primal, const MarketModel& market,
                             const UtilityModel& utility, const SimConfig& cfg,
                             const std::vector<std::pair<double, double>>& perturbations);

struct PairedReport {
    double mean = 0.0;  // E[X_T Y_T + int (u X + c Y) ds]
    double std_error = 0.0;
    double bound = 0.0;  // x y
    bool passed() const { return mean <= bound + 2.0 * std_error; }
};

PairedReport paired_supermartingale(double t0, double x0, double y0, const Policy& policy,
                                    const DualPolicy& u_policy, const MarketModel& market, const SimConfig& cfg);

struct HorizonLaw {
    Curve F;          // CDF
    Curve density;    // f
    Curve quantile;   // inverse CDF on (0, 1); may return +inf
};

HorizonLaw exponential_law(double rate);

struct RandomHorizonReport {
    SimReport direct;       // tau sampled per path, stopped at tau ^ T
    SimReport transformed;  // fixed horizon with weights 1 - F and f
    double combined_se = 0.0;
    bool agree() const;
};

/// Both functionals on shared wealth paths of one policy.
RandomHorizonReport random_horizon_mc(double x0, const Policy& policy, const MarketModel& market,
                                      const Field2& G1, const Field2& G2, const HorizonLaw& law,
                                      const SimConfig& cfg);

/// Pairwise (cascade) summation.
double pairwise_sum(std::span<const double> v);

}  // namespace dualhjb

#include "dualhjb/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "dualhjb/rng.hpp"

namespace dualhjb {

namespace {

constexpr double kTinyControl = std::numeric_limits<double>::min();

constexpr std::uint32_t kWealthStream = 0;
constexpr std::uint32_t kHorizonStream = 1;

struct StepGrid {
    std::size_t n = 0;
    double dt = 0.0;
    double sqdt = 0.0;
    std::vector<double> t;  // left endpoints, size n + 1 (t[n] = T)
    std::vector<double> b;
    std::vector<double> sigma;
};

StepGrid make_steps(double t0, const MarketModel& market, const SimConfig& cfg) {
    const double T = market.T;
    if (!(cfg.dt_sim > 0.0) || cfg.dt_sim > T / 16.0)
        throw Error(ErrorCode::InvalidArgument, "dt_sim must lie in (0, T/16]");
    if (cfg.n_paths < 100) throw Error(ErrorCode::InvalidArgument, "n_paths must be >= 100");
    if (cfg.antithetic && cfg.n_paths % 2 != 0)
        throw Error(ErrorCode::InvalidArgument, "antithetic sampling needs an even n_paths");
    if (!(t0 >= 0.0 && t0 < T)) throw Error(ErrorCode::InvalidArgument, "t0 must lie in [0, T)");
    StepGrid g;
    g.n = static_cast<std::size_t>(std::max(1.0, std::round((T - t0) / cfg.dt_sim)));
    if (static_cast<double>(cfg.n_paths) * static_cast<double>(g.n) > cfg.budget)
        throw Error(ErrorCode::BudgetExceeded, "n_paths * steps = " +
                                                   std::to_string(static_cast<double>(cfg.n_paths) * g.n) +
                                                   " exceeds the budget " + std::to_string(cfg.budget));
    g.dt = (T - t0) / static_cast<double>(g.n);
    g.sqdt = std::sqrt(g.dt);
    g.t.resize(g.n + 1);
    g.b.resize(g.n);
    g.sigma.resize(g.n);
    for (std::size_t j = 0; j <= g.n; ++j) g.t[j] = t0 + g.dt * static_cast<double>(j);
    g.t[g.n] = T;
    for (std::size_t j = 0; j < g.n; ++j) {
        g.b[j] = market.b(g.t[j]);
        g.sigma[j] = market.sigma(g.t[j]);
    }
    return g;
}

unsigned worker_count(const SimConfig& cfg) {
    if (cfg.threads > 0) return cfg.threads;
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs f(i) for i in [0, n). Results must be written by index; the first
/// failing index (lowest) is rethrown.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& f) {
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    constexpr std::size_t kBlock = 64;
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::size_t failed_at = std::numeric_limits<std::size_t>::max();
    std::exception_ptr failure;
    auto worker = [&] {
        for (;;) {
            const std::size_t start = next.fetch_add(kBlock);
            if (start >= n) return;
            const std::size_t stop = std::min(n, start + kBlock);
            for (std::size_t i = start; i < stop; ++i) {
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (i < failed_at) {
                        failed_at = i;
                        failure = std::current_exception();
                    }
                    break;
                }
            }
        }
    };
    std::vector<std::thread> pool;
    const unsigned k = std::min<std::size_t>(threads, (n + kBlock - 1) / kBlock);
    for (unsigned i = 0; i < k; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

/// Mean and standard error over independent samples.
MeanSe mean_se(std::span<const double> v) {
    const double n = static_cast<double>(v.size());
    if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
    const double mean = pairwise_sum(v) / n;
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - mean) * (v[i] - mean);
    const double var = v.size() > 1 ? pairwise_sum(sq) / (n - 1.0) : 0.0;
    return {mean, std::sqrt(var / n)};
}

/// Antithetic pairs are averaged first; `valid` drops whole pairs.
MeanSe summarize(std::span<const double> values, const std::vector<char>* valid, bool antithetic) {
    std::vector<double> samples;
    const std::size_t step = antithetic ? 2 : 1;
    samples.reserve(values.size() / step);
    for (std::size_t i = 0; i + step <= values.size(); i += step) {
        bool ok = true;
        double s = 0.0;
        for (std::size_t k = 0; k < step; ++k) {
            if (valid && !(*valid)[i + k]) ok = false;
            s += values[i + k];
        }
        if (ok) samples.push_back(s / static_cast<double>(step));
    }
    return mean_se(samples);
}

void check_finite_controls(double c, double pi, std::size_t path, double t) {
    if (!std::isfinite(c) || !std::isfinite(pi))
        throw Error(ErrorCode::NaNPath, "non-finite feedback on path " + std::to_string(path) +
                                            " at t = " + std::to_string(t));
}

/// U1 along the step grid; power families skip the std::function path.
class RunningUtility {
public:
    RunningUtility(const UtilityModel& u, const StepGrid& g) : u_(u) {
        if (!u.power) return;
        power_ = true;
        p_ = u.p;
        sqrt_ = (u.p == 0.5);
        for (std::size_t j = 0; j < g.n; ++j) {
            ac_.push_back(u.power->a_c(g.t[j]) / p_);
            ax_.push_back(u.power->a_x ? (*u.power->a_x)(g.t[j]) / p_ : 0.0);
        }
    }

    double operator()(std::size_t j, double t, double c, double x) const {
        if (!power_) return u_.u1(t, c, x);
        double v = ac_[j] == 0.0 ? 0.0 : ac_[j] * pw(c);
        if (ax_[j] != 0.0) v += ax_[j] * pw(x);
        return v;
    }

private:
    double pw(double s) const { return sqrt_ ? std::sqrt(s) : std::pow(s, p_); }

    const UtilityModel& u_;
    bool power_ = false;
    bool sqrt_ = false;
    double p_ = 0.5;
    std::vector<double> ac_;
    std::vector<double> ax_;
};

/// log2 estimate (|error| < 0.01) from the exponent bits and a quadratic
/// in the mantissa; only used to seed an index search.
inline double rough_log2(double x) {
    const auto bits = std::bit_cast<std::uint64_t>(x);
    const double e = static_cast<double>(static_cast<int>(bits >> 52) - 1023);
    const double m = std::bit_cast<double>((bits & 0x000FFFFFFFFFFFFFull) | 0x3FF0000000000000ull) - 1.0;
    return e + m * (1.3465 - 0.3465 * m);
}

/// Feedback maps of a PrimalSolution resampled on the simulation steps:
/// time weights are precomputed per step and x is located on the
/// geometric grid without a libm call.
class FeedbackTable {
public:
    FeedbackTable(const PrimalSolution& primal, const StepGrid& g)
        : x_(primal.x), M_(primal.x.size()) {
        lx0_ = std::log2(x_.front());
        inv_step_ = static_cast<double>(M_ - 1) / (std::log2(x_.back()) - lx0_);
        for (std::size_t i = 0; i + 1 < M_; ++i) inv_dx_.push_back(1.0 / (x_[i + 1] - x_[i]));
        C_.reserve(primal.n_slices() * M_);
        Pi_.reserve(primal.n_slices() * M_);
        for (std::size_t n = 0; n < primal.n_slices(); ++n) {
            C_.insert(C_.end(), primal.C[n].begin(), primal.C[n].end());
            Pi_.insert(Pi_.end(), primal.Pi[n].begin(), primal.Pi[n].end());
        }
        const auto& t = primal.t;
        const double dt = t[1] - t[0];
        for (std::size_t j = 0; j < g.n; ++j) {
            const double s = (g.t[j] - t[0]) / dt;
            std::size_t n = static_cast<std::size_t>(std::clamp(s, 0.0, static_cast<double>(t.size() - 2)));
            double w = std::clamp(s - static_cast<double>(n), 0.0, 1.0);
            const bool left = primal.slice_valid[n], right = primal.slice_valid[n + 1];
            if (!left && !right)
                throw Error(ErrorCode::NaNPath, "no valid feedback near t = " + std::to_string(g.t[j]));
            if (!left) {
                ++n;
                w = 0.0;
            } else if (!right) {
                w = 0.0;
            }
            slice_.push_back(n);
            weight_.push_back(w);
        }
    }

    std::pair<double, double> operator()(std::size_t j, double x) const {
        if (x <= 0.0) return {0.0, 0.0};
        std::size_t i = 0;
        double wx = 0.0, scale = 1.0;
        if (x <= x_.front()) {
            scale = x / x_.front();
        } else if (x >= x_.back()) {
            i = M_ - 2;
            wx = 1.0;
            scale = x / x_.back();
        } else {
            const double s = (rough_log2(x) - lx0_) * inv_step_;
            i = static_cast<std::size_t>(std::clamp(s, 0.0, static_cast<double>(M_ - 2)));
            while (i > 0 && x_[i] > x) --i;
            while (i + 2 < M_ && x_[i + 1] < x) ++i;
            wx = (x - x_[i]) * inv_dx_[i];
        }
        const std::size_t n = slice_[j];
        const double w = weight_[j];
        const std::size_t a = n * M_ + i;
        double c = (1.0 - wx) * C_[a] + wx * C_[a + 1];
        double pi = (1.0 - wx) * Pi_[a] + wx * Pi_[a + 1];
        if (w != 0.0) {
            const std::size_t b = a + M_;
            c = (1.0 - w) * c + w * ((1.0 - wx) * C_[b] + wx * C_[b + 1]);
            pi = (1.0 - w) * pi + w * ((1.0 - wx) * Pi_[b] + wx * Pi_[b + 1]);
        }
        return {scale * c, scale * pi};
    }

private:
    std::vector<double> x_;
    std::vector<double> inv_dx_;
    std::size_t M_;
    double lx0_ = 0.0;
    double inv_step_ = 1.0;
    std::vector<double> C_, Pi_;  // [n * M + i]
    std::vector<std::size_t> slice_;
    std::vector<double> weight_;
};

/// Closed-loop wealth paths for P policies on shared noise;
/// eval(p, j, t, x) returns the controls of policy p at step j.
template <class Eval>
std::vector<SimReport> wealth_kernel(double x0, std::size_t P, Eval&& eval, const StepGrid& g,
                                     const UtilityModel& utility, const SimConfig& cfg,
                                     std::vector<TraceRow>* trace, const TraceOptions& trace_opt) {
    const std::size_t N = cfg.n_paths;
    const std::size_t S = cfg.antithetic ? 2 : 1;
    const std::size_t items = N / S;

    std::vector<double> u1_zero(g.n);
    for (std::size_t j = 0; j < g.n; ++j) u1_zero[j] = utility.u1(g.t[j], 0.0, 0.0);
    const double u2_zero = utility.u2(0.0);
    const RunningUtility U1(utility, g);

    std::vector<std::vector<double>> value(P, std::vector<double>(N));
    std::vector<std::vector<double>> terminal(P, std::vector<double>(N));
    std::vector<std::vector<char>> absorbed(P, std::vector<char>(N));
    const std::size_t n_trace = trace ? std::min(trace_opt.n_paths, N) : 0;
    const std::size_t stride = std::max<std::size_t>(1, trace_opt.stride);
    std::vector<std::vector<TraceRow>> rows(n_trace);

    parallel_for(items, worker_count(cfg), [&](std::size_t item) {
        const NormalStream noise(cfg.seed, item, kWealthStream);
        std::vector<double> X(S * P, x0);
        std::vector<double> run(S * P, 0.0);
        std::vector<char> dead(S * P, x0 <= 0.0 ? 1 : 0);
        std::array<double, 2> z2{};
        for (std::size_t j = 0; j < g.n; ++j) {
            if ((j & 1) == 0) z2 = noise.pair(static_cast<std::uint32_t>(j / 2));
            const double t = g.t[j];
            const double dt = g.dt;
            for (std::size_t s = 0; s < S; ++s) {
                const double dw = (s == 0 ? z2[j & 1] : -z2[j & 1]) * g.sqdt;
                const std::size_t path = item * S + s;
                for (std::size_t p = 0; p < P; ++p) {
                    const std::size_t k = s * P + p;
                    if (dead[k]) {
                        run[k] += u1_zero[j] * dt;
                        if (p == 0 && path < n_trace && j % stride == 0) rows[path].push_back({path, t, 0.0, 0.0, 0.0});
                        continue;
                    }
                    auto [c, pi] = eval(p, j, t, X[k]);
                    check_finite_controls(c, pi, path, t);
                    c = std::max(c, 0.0);
                    if (p == 0 && path < n_trace && j % stride == 0) rows[path].push_back({path, t, X[k], c, pi});
                    run[k] += U1(j, t, c, X[k]) * dt;
                    const double next = X[k] + (g.b[j] * pi - c) * dt + g.sigma[j] * pi * dw;
                    if (!(next > 0.0)) {
                        X[k] = 0.0;
                        dead[k] = 1;
                    } else {
                        X[k] = next;
                    }
                }
            }
        }
        for (std::size_t s = 0; s < S; ++s) {
            const std::size_t path = item * S + s;
            for (std::size_t p = 0; p < P; ++p) {
                const std::size_t k = s * P + p;
                value[p][path] = run[k] + (dead[k] ? u2_zero : utility.u2(X[k]));
                terminal[p][path] = X[k];
                absorbed[p][path] = dead[k];
            }
            if (path < n_trace) rows[path].push_back({path, g.t[g.n], X[s * P], 0.0, 0.0});
        }
    });

    std::vector<SimReport> out(P);
    for (std::size_t p = 0; p < P; ++p) {
        const auto ms = summarize(value[p], nullptr, cfg.antithetic);
        out[p].estimate = ms.mean;
        out[p].std_error = ms.se;
        out[p].n_paths = N;
        out[p].n_absorbed = static_cast<std::size_t>(std::count(absorbed[p].begin(), absorbed[p].end(), 1));
        out[p].mean_terminal_wealth = pairwise_sum(terminal[p]) / static_cast<double>(N);
    }
    if (trace) {
        trace->clear();
        for (auto& r : rows) trace->insert(trace->end(), r.begin(), r.end());
    }
    return out;
}

}  // namespace

double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 128) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

Policy feedback_policy(const PrimalSolution& primal, double gamma_c, double gamma_pi) {
    return [&primal, gamma_c, gamma_pi](double t, double x) {
        const auto [c, pi] = primal.feedback(t, x);
        return std::pair<double, double>{gamma_c * c, gamma_pi * pi};
    };
}

std::vector<SimReport> simulate_policies(double t0, double x0, std::span<const Policy> policies,
                                         const MarketModel& market, const UtilityModel& utility,
                                         const SimConfig& cfg, std::vector<TraceRow>* trace,
                                         const TraceOptions& trace_opt) {
    if (!(x0 >= 0.0)) throw Error(ErrorCode::InvalidArgument, "x0 must be >= 0");
    if (policies.empty()) return {};
    const StepGrid g = make_steps(t0, market, cfg);
    auto eval = [&](std::size_t p, std::size_t, double t, double x) { return policies[p](t, x); };
    return wealth_kernel(x0, policies.size(), eval, g, utility, cfg, trace, trace_opt);
}

namespace {

std::vector<SimReport> simulate_feedback(double t0, double x0, const PrimalSolution& primal,
                                         const std::vector<std::pair<double, double>>& gammas,
                                         const MarketModel& market, const UtilityModel& utility,
                                         const SimConfig& cfg, std::vector<TraceRow>* trace,
                                         const TraceOptions& trace_opt) {
    if (!(x0 >= 0.0)) throw Error(ErrorCode::InvalidArgument, "x0 must be >= 0");
    const StepGrid g = make_steps(t0, market, cfg);
    const FeedbackTable table(primal, g);
    auto eval = [&](std::size_t p, std::size_t j, double, double x) {
        const auto [c, pi] = table(j, x);
        return std::pair<double, double>{gammas[p].first * c, gammas[p].second * pi};
    };
    return wealth_kernel(x0, gammas.size(), eval, g, utility, cfg, trace, trace_opt);
}

}  // namespace

SimReport simulate_closed_loop(double t0, double x0, const PrimalSolution& primal, const MarketModel& market,
                               const UtilityModel& utility, const SimConfig& cfg, std::vector<TraceRow>* trace,
                               const TraceOptions& trace_opt) {
    return simulate_feedback(t0, x0, primal, {{1.0, 1.0}}, market, utility, cfg, trace, trace_opt).front();
}

SimReport simulate_dual_state(double t0, double y0, const DualPolicy& u_policy, const MarketModel& market,
                              const ConjugateBundle& bundle, const SimConfig& cfg) {
    if (!(y0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "y0 must be > 0");
    const StepGrid g = make_steps(t0, market, cfg);
    const std::size_t N = cfg.n_paths;
    const std::size_t S = cfg.antithetic ? 2 : 1;
    std::vector<double> theta(g.n);
    for (std::size_t j = 0; j < g.n; ++j) theta[j] = g.b[j] / g.sigma[j];

    std::vector<double> value(N);
    std::vector<double> terminal(N);
    std::vector<char> valid(N, 1);
    parallel_for(N / S, worker_count(cfg), [&](std::size_t item) {
        const NormalStream noise(cfg.seed, item, kWealthStream);
        std::array<double, 2> z2{};
        double Y[2] = {y0, y0};
        double run[2] = {0.0, 0.0};
        for (std::size_t j = 0; j < g.n; ++j) {
            if ((j & 1) == 0) z2 = noise.pair(static_cast<std::uint32_t>(j / 2));
            const double t = g.t[j];
            for (std::size_t s = 0; s < S; ++s) {
                if (!valid[item * S + s]) continue;
                const double dw = (s == 0 ? z2[j & 1] : -z2[j & 1]) * g.sqdt;
                const double u = u_policy(t, Y[s]);
                if (!(u >= 0.0)) throw Error(ErrorCode::InvalidArgument, "dual policy must be nonnegative");
                // u = 0 is taken as the limit from above
                if (!bundle.zero_source)
                    run[s] += bundle.U1_star_tilde(t, Y[s], u > 0.0 ? u : kTinyControl) * g.dt;
                Y[s] = Y[s] * std::exp(-theta[j] * dw - 0.5 * theta[j] * theta[j] * g.dt) - u * g.dt;
                if (!(Y[s] > 0.0)) valid[item * S + s] = 0;
            }
        }
        for (std::size_t s = 0; s < S; ++s) {
            const std::size_t path = item * S + s;
            if (!valid[path]) continue;
            value[path] = run[s] + (bundle.zero_terminal ? 0.0 : bundle.U2_tilde(Y[s]));
            terminal[path] = Y[s];
        }
    });

    SimReport rep;
    rep.n_paths = N;
    rep.n_rejected = static_cast<std::size_t>(std::count(valid.begin(), valid.end(), 0));
    if (static_cast<double>(rep.n_rejected) > 0.01 * static_cast<double>(N))
        throw Error(ErrorCode::ExcessiveRejection, std::to_string(rep.n_rejected) + " of " + std::to_string(N) +
                                                       " dual paths left (0, inf)");
    const auto ms = summarize(value, &valid, cfg.antithetic);
    rep.estimate = ms.mean;
    rep.std_error = ms.se;
    std::vector<double> kept;
    for (std::size_t i = 0; i < N; ++i)
        if (valid[i]) kept.push_back(terminal[i]);
    rep.mean_terminal_wealth = pairwise_sum(kept) / static_cast<double>(kept.size());
    return rep;
}

bool TestReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const PerturbationCheck& c) { return c.passed; });
}

TestReport verification_test(double t0, double x0, const PrimalSolution& primal, const MarketModel& market,
                             const UtilityModel& utility, const SimConfig& cfg,
                             const std::vector<std::pair<double, double>>& perturbations) {
    TestReport rep;
    rep.value = primal.value(t0, x0);
    std::vector<std::pair<double, double>> gammas = {{1.0, 1.0}};
    for (const auto& g : perturbations)
        if (g != std::pair<double, double>{1.0, 1.0}) gammas.push_back(g);
    const auto reports = simulate_feedback(t0, x0, primal, gammas, market, utility, cfg, nullptr, {});
    for (std::size_t i = 0; i < gammas.size(); ++i) {
        PerturbationCheck c;
        c.gamma_c = gammas[i].first;
        c.gamma_pi = gammas[i].second;
        c.report = reports[i];
        c.bound = rep.value + 2.0 * reports[i].std_error;
        c.passed = i == 0 ? std::abs(reports[i].estimate - rep.value) <= 2.0 * reports[i].std_error
                          : reports[i].estimate <= c.bound;
        rep.checks.push_back(c);
    }
    return rep;
}

PairedReport paired_supermartingale(double t0, double x0, double y0, const Policy& policy,
                                    const DualPolicy& u_policy, const MarketModel& market, const SimConfig& cfg) {
    const StepGrid g = make_steps(t0, market, cfg);
    const std::size_t N = cfg.n_paths;
    const std::size_t S = cfg.antithetic ? 2 : 1;
    std::vector<double> value(N);
    parallel_for(N / S, worker_count(cfg), [&](std::size_t item) {
        const NormalStream noise(cfg.seed, item, kWealthStream);
        std::array<double, 2> z2{};
        for (std::size_t s = 0; s < S; ++s) {
            const std::size_t path = item * S + s;
            double X = x0, Y = y0, acc = 0.0;
            for (std::size_t j = 0; j < g.n; ++j) {
                if ((j & 1) == 0) z2 = noise.pair(static_cast<std::uint32_t>(j / 2));
                const double dw = (s == 0 ? z2[j & 1] : -z2[j & 1]) * g.sqdt;
                const double t = g.t[j];
                const double th = g.b[j] / g.sigma[j];
                double c = 0.0, pi = 0.0;
                if (X > 0.0) {
                    std::tie(c, pi) = policy(t, X);
                    check_finite_controls(c, pi, path, t);
                    c = std::max(c, 0.0);
                }
                const double u = u_policy(t, Y);
                acc += (u * X + c * Y) * g.dt;
                const double next = X + (g.b[j] * pi - c) * g.dt + g.sigma[j] * pi * dw;
                X = next > 0.0 ? next : 0.0;
                Y = Y * std::exp(-th * dw - 0.5 * th * th * g.dt) - u * g.dt;
            }
            value[path] = X * Y + acc;
        }
    });
    const auto ms = summarize(value, nullptr, cfg.antithetic);
    return {ms.mean, ms.se, x0 * y0};
}

HorizonLaw exponential_law(double rate) {
    if (!(rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "exponential rate must be > 0");
    return {[rate](double t) { return t <= 0.0 ? 0.0 : -std::expm1(-rate * t); },
            [rate](double t) { return t < 0.0 ? 0.0 : rate * std::exp(-rate * t); },
            [rate](double u) { return -std::log1p(-u) / rate; }};
}

bool RandomHorizonReport::agree() const {
    return std::abs(direct.estimate - transformed.estimate) <= 2.0 * combined_se;
}

RandomHorizonReport random_horizon_mc(double x0, const Policy& policy, const MarketModel& market,
                                      const Field2& G1, const Field2& G2, const HorizonLaw& law,
                                      const SimConfig& cfg) {
    const StepGrid g = make_steps(0.0, market, cfg);
    const double T = market.T;
    const std::size_t N = cfg.n_paths;
    const std::size_t S = cfg.antithetic ? 2 : 1;
    std::vector<double> survive(g.n), dens(g.n);
    for (std::size_t j = 0; j < g.n; ++j) {
        survive[j] = 1.0 - law.F(g.t[j]);
        dens[j] = law.density(g.t[j]);
    }
    const double survive_T = 1.0 - law.F(T);
    std::vector<double> direct(N), transformed(N), terminal(N);
    std::vector<char> absorbed(N);

    parallel_for(N / S, worker_count(cfg), [&](std::size_t item) {
        const NormalStream noise(cfg.seed, item, kWealthStream);
        const auto taus = NormalStream(cfg.seed, item, kHorizonStream).uniforms(0);
        std::array<double, 2> z2{};
        for (std::size_t s = 0; s < S; ++s) {
            const std::size_t path = item * S + s;
            const double tau = law.quantile(taus[s]);
            double X = x0, d = 0.0, tr = 0.0;
            bool stopped = false, dead = x0 <= 0.0;
            for (std::size_t j = 0; j < g.n; ++j) {
                if ((j & 1) == 0) z2 = noise.pair(static_cast<std::uint32_t>(j / 2));
                const double dw = (s == 0 ? z2[j & 1] : -z2[j & 1]) * g.sqdt;
                const double t = g.t[j];
                double c = 0.0, pi = 0.0;
                if (!dead) {
                    std::tie(c, pi) = policy(t, X);
                    check_finite_controls(c, pi, path, t);
                    c = std::max(c, 0.0);
                }
                const double g1 = G1(t, c);
                tr += (g1 * survive[j] + G2(t, X) * dens[j]) * g.dt;
                double next = dead ? 0.0 : X + (g.b[j] * pi - c) * g.dt + g.sigma[j] * pi * dw;
                if (!(next > 0.0)) {
                    next = 0.0;
                    dead = true;
                }
                if (!stopped) {
                    if (tau < g.t[j + 1]) {
                        const double w = (tau - t) / g.dt;
                        d += g1 * (tau - t) + G2(tau, X + w * (next - X));
                        stopped = true;
                    } else {
                        d += g1 * g.dt;
                    }
                }
                X = next;
            }
            if (!stopped) d += G2(T, X);
            tr += survive_T * G2(T, X);
            direct[path] = d;
            transformed[path] = tr;
            terminal[path] = X;
            absorbed[path] = dead;
        }
    });

    RandomHorizonReport rep;
    auto fill = [&](SimReport& r, const std::vector<double>& v) {
        const auto ms = summarize(v, nullptr, cfg.antithetic);
        r.estimate = ms.mean;
        r.std_error = ms.se;
        r.n_paths = N;
        r.n_absorbed = static_cast<std::size_t>(std::count(absorbed.begin(), absorbed.end(), 1));
        r.mean_terminal_wealth = pairwise_sum(terminal) / static_cast<double>(N);
    };
    fill(rep.direct, direct);
    fill(rep.transformed, transformed);
    rep.combined_se = std::hypot(rep.direct.std_error, rep.transformed.std_error);
    return rep;
}

}  // namespace dualhjb

#include "dualhjb/applications.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <mutex>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>
#include <gsl/gsl_min.h>

#include "dualhjb/primal.hpp"

namespace dualhjb {

namespace {

double integrate(const Curve& f, double a, double b) {
    if (!(b > a)) return 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 15, 1e-12);
}

/// Nodes and weights with E[g(Z)] = sum w_i g(z_i) for Z ~ N(0,1).
struct GaussHermite {
    std::vector<double> z;
    std::vector<double> w;
};

const GaussHermite& gauss_hermite(std::size_t n) {
    static std::mutex mu;
    static std::map<std::size_t, GaussHermite> cache;
    std::lock_guard lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    gsl_integration_fixed_workspace* ws = gsl_integration_fixed_alloc(gsl_integration_fixed_hermite, n, 0.0, 1.0, 0.0, 0.0);
    if (!ws) throw Error(ErrorCode::InvalidArgument, "Gauss-Hermite order " + std::to_string(n) + " unavailable");
    const double* x = gsl_integration_fixed_nodes(ws);
    const double* w = gsl_integration_fixed_weights(ws);
    GaussHermite gh;
    const double norm = 1.0 / std::sqrt(std::numbers::pi);
    for (std::size_t i = 0; i < n; ++i) {
        gh.z.push_back(std::sqrt(2.0) * x[i]);
        gh.w.push_back(w[i] * norm);
    }
    gsl_integration_fixed_free(ws);
    return cache.emplace(n, std::move(gh)).first->second;
}

/// E[g(J_t)] under the lognormal law of J_t.
template <class G>
double expect_J(const IlliquidParams& par, double t, std::size_t order, G&& g) {
    const auto m = log_J_moments(par, t);
    if (m.var <= 0.0) return g(std::exp(m.mean));
    const auto& gh = gauss_hermite(order);
    const double s = std::sqrt(m.var);
    double acc = 0.0;
    for (std::size_t i = 0; i < gh.z.size(); ++i) acc += gh.w[i] * g(std::exp(m.mean + s * gh.z[i]));
    return acc;
}

double horizon_K(double p, const Curve& a_c, const Curve& a_x, double a_T, double T) {
    double k = 0.0;
    for (int i = 0; i <= 100; ++i) {
        const double t = T * i / 100.0;
        k = std::max({k, a_c(t), a_x(t) + a_T});
    }
    return std::max(k, 1e-300) / p;
}

}  // namespace

WeightCheck check_horizon_law(const HorizonLaw& law, double T) {
    if (!law.F || !law.density) throw Error(ErrorCode::InvalidArgument, "horizon law needs F and f");
    WeightCheck wc;
    wc.min_density = std::numeric_limits<double>::infinity();
    wc.min_survival = std::numeric_limits<double>::infinity();
    double prev = law.F(0.0);
    for (int i = 0; i <= 200; ++i) {
        const double t = T * i / 200.0;
        const double F = law.F(t);
        const double f = law.density(t);
        if (f < 0.0) throw Error(ErrorCode::NegativeWeight, "density f(" + std::to_string(t) + ") < 0");
        if (F < prev - 1e-15) throw Error(ErrorCode::NegativeWeight, "F decreases at t = " + std::to_string(t));
        if (F < 0.0 || F > 1.0) throw Error(ErrorCode::InvalidArgument, "F leaves [0, 1]");
        prev = F;
        wc.min_density = std::min(wc.min_density, f);
        wc.min_survival = std::min(wc.min_survival, 1.0 - F);
    }
    const double F0 = law.F(0.0);
    for (int i = 1; i <= 4; ++i) {
        const double t = T * i / 4.0;
        const double err = std::abs(integrate(law.density, 0.0, t) - (law.F(t) - F0));
        wc.max_density_error = std::max(wc.max_density_error, err);
    }
    if (wc.max_density_error > 1e-6)
        throw Error(ErrorCode::InvalidArgument, "density does not integrate to F (error " +
                                                    std::to_string(wc.max_density_error) + ")");
    return wc;
}

UtilityModel random_horizon_transform(const RandomHorizonSpec& spec) {
    if (!spec.G1 || !spec.G2) throw Error(ErrorCode::InvalidArgument, "random horizon needs G1 and G2");
    check_horizon_law(spec.law, spec.T);
    const auto F = spec.law.F;
    const auto f = spec.law.density;
    const auto G1 = spec.G1;
    const auto G2 = spec.G2;
    const double T = spec.T;
    const double surv_T = 1.0 - F(T);

    UtilityModel u;
    u.p = spec.p;
    u.u1 = [=](double t, double c, double x) { return G1(t, c) * (1.0 - F(t)) + G2(t, x) * f(t); };
    if (spec.G1_c) {
        const auto G1c = spec.G1_c;
        u.u1_c = [=](double t, double c, double) { return G1c(t, c) * (1.0 - F(t)); };
    }
    if (spec.G2_x) {
        const auto G2x = spec.G2_x;
        u.u1_x = [=](double t, double, double x) { return G2x(t, x) * f(t); };
        u.u2_x = [=](double x) { return surv_T * G2x(T, x); };
    }
    u.u2 = [=](double x) { return surv_T * G2(T, x); };
    SeparableParts parts;
    parts.consumption = [=](double t, double c) { return G1(t, c) * (1.0 - F(t)); };
    if (u.u1_c) parts.consumption_c = [uc = u.u1_c](double t, double c) { return uc(t, c, 0.0); };
    parts.wealth = [=](double t, double x) { return G2(t, x) * f(t); };
    if (u.u1_x) parts.wealth_x = [ux = u.u1_x](double t, double x) { return ux(t, 0.0, x); };
    u.separable = parts;

    // Growth constant from samples of U1 / (1 + c^p + x^p) and U2 / (1 + x^p).
    double k = 0.0;
    for (int i = 0; i <= 20; ++i) {
        const double t = T * i / 20.0;
        for (int e = -4; e <= 4; ++e) {
            const double s = std::pow(10.0, e);
            const double sp = std::pow(s, spec.p);
            k = std::max(k, std::abs(u.u1(t, s, s)) / (1.0 + 2.0 * sp));
            k = std::max(k, std::abs(u.u2(s)) / (1.0 + sp));
        }
    }
    u.K = std::max(1.01 * k, 1e-300);
    const bool consumes = G1(0.0, 1.0) != G1(0.0, 0.0);
    u.regime = consumes ? ConsumptionRegime::Inada : ConsumptionRegime::NoConsumption;
    const bool terminal = surv_T > 0.0 && u.u2(1.0) != u.u2(0.0);
    u.unbounded = consumes ? (terminal ? Unbounded::Both : Unbounded::Consumption) : Unbounded::Wealth;
    u.family = "random_horizon";
    return u;
}

UtilityModel power_random_horizon(double p, const HorizonLaw& law, double T, double a_c, double a_x,
                                  double delta) {
    check_horizon_law(law, T);
    const Curve F = law.F;
    const Curve f = law.density;
    Curve ac = [=](double t) { return a_c * std::exp(-delta * t) * (1.0 - F(t)); };
    Curve ax = [=](double t) { return a_x * std::exp(-delta * t) * f(t); };
    const double a_T = a_x * std::exp(-delta * T) * (1.0 - F(T));
    auto u = power_utility(p, ac, ax, a_T);
    u.K = horizon_K(p, ac, ax, a_T, T);
    u.family = "random_horizon_power";
    return u;
}

double discount_shift(const IlliquidParams& par) {
    return par.p * par.rho * par.sigma_I * par.b_L / par.sigma_L -
           0.5 * par.p * (1.0 - par.p) * par.rho * par.rho * par.sigma_I * par.sigma_I;
}

double effective_drift(const IlliquidParams& par) {
    return par.b_L - par.rho * par.sigma_I * par.sigma_L * (1.0 - par.p);
}

namespace {

void check_params(const IlliquidParams& par) {
    if (!(par.b_L > 0.0 && par.sigma_L > 0.0 && par.b_I > 0.0 && par.sigma_I > 0.0))
        throw Error(ErrorCode::InvalidArgument, "b_L, sigma_L, b_I, sigma_I must be positive");
    if (!(std::abs(par.rho) < 1.0)) throw Error(ErrorCode::InvalidArgument, "rho must lie in (-1, 1)");
    if (!(par.p > 0.0 && par.p < 1.0)) throw Error(ErrorCode::InvalidArgument, "p must lie in (0, 1)");
    if (!(par.beta > 0.0)) throw Error(ErrorCode::InvalidArgument, "beta must be positive");
    if (!(par.arrival_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "arrival rate must be positive");
}

}  // namespace

IlliquidReduction illiquid_reduction(const IlliquidParams& par, double T) {
    check_params(par);
    IlliquidReduction r;
    r.k = discount_shift(par);
    r.b_eff = effective_drift(par);
    r.discount = par.beta - r.k;
    if (!(r.discount > par.margin))
        throw Error(ErrorCode::DiscountTooSmall, "beta = " + std::to_string(par.beta) +
                                                     " does not exceed k_{Y,p} = " + std::to_string(r.k));
    if (!(r.b_eff > 0.0))
        throw Error(ErrorCode::NonPositiveDrift, "effective drift " + std::to_string(r.b_eff) + " <= 0");
    r.market = MarketModel::constant(r.b_eff, par.sigma_L, T);
    return r;
}

LogMoments log_J_moments(const IlliquidParams& par, double t) {
    const double si = par.sigma_I;
    const double mean = (par.b_I - 0.5 * si * si - par.rho * si * par.b_L / par.sigma_L +
                         0.5 * par.rho * par.rho * si * si) * t;
    return {mean, si * si * (1.0 - par.rho * par.rho) * t};
}

double liquidation_value_fixed(const IlliquidParams& par, double K, double t, double x, double y,
                               std::size_t quad_order) {
    const double p = par.p;
    if (y == 0.0) return K * std::pow(x, p) / p;
    return K / p * expect_J(par, t, quad_order, [&](double j) { return std::pow(x + y * j, p); });
}

double liquidation_value(const IlliquidParams& par, double K, double t, double x, double y,
                         std::size_t quad_order) {
    if (!(x >= 0.0 && y >= 0.0)) throw Error(ErrorCode::InvalidArgument, "liquidation_value needs x, y >= 0");
    if (!(t >= 0.0)) throw Error(ErrorCode::InvalidArgument, "liquidation_value needs t >= 0");
    if (!(K > 0.0)) throw Error(ErrorCode::InvalidArgument, "K_V must be positive");
    if (quad_order < 2) throw Error(ErrorCode::InvalidArgument, "quadrature order must be >= 2");
    const double v = liquidation_value_fixed(par, K, t, x, y, quad_order);
    const double v2 = liquidation_value_fixed(par, K, t, x, y, 2 * quad_order);
    if (std::abs(v2 - v) > 1e-6 * std::abs(v2))
        throw Error(ErrorCode::QuadratureUnstable, "order " + std::to_string(quad_order) + " vs " +
                                                       std::to_string(2 * quad_order) + " differ by " +
                                                       std::to_string(std::abs(v2 - v)));
    return v2;
}

double merton_infinite_constant(double beta, double b, double sigma, double p) {
    const double theta = b / sigma;
    const double nu = (beta - p * theta * theta / (2.0 * (1.0 - p))) / (1.0 - p);
    if (!(nu > 0.0)) throw Error(ErrorCode::DiscountTooSmall, "discount too small for a finite Merton value");
    return std::pow(nu, -(1.0 - p));
}

double default_truncation(const IlliquidParams& par) {
    const double d = par.beta - discount_shift(par);
    if (!(d > 0.0)) throw Error(ErrorCode::DiscountTooSmall, "beta <= k_{Y,p}");
    return 1.01 * std::log(1e4) / d;
}

namespace {

/// Value map at r = 1 for a fixed K: alpha0 -> alpha0^p V(0, (1 - alpha0)/alpha0).
class KvMap {
public:
    KvMap(const IlliquidParams& par, const KvOptions& opt, double T) : par_(par), opt_(opt), T_(T) {}

    /// Builds the dual solutions for K; one per time resolution.
    void prepare(double K) {
        levels_.clear();
        const std::size_t n_levels = opt_.richardson ? 2 : 1;
        for (std::size_t l = 0; l < n_levels; ++l) {
            const std::size_t n_t = opt_.n_t << l;
            const auto grid = LogGrid::make(opt_.y_min, opt_.y_max, opt_.n_y, n_t, T_);
            Level lev;
            if (opt_.force_alpha_zero) {
                const auto u = power_random_horizon(par_.p, exponential_law(par_.arrival_rate), T_, 1.0, K, par_.beta);
                const auto m = MarketModel::constant(par_.b_L, par_.sigma_L, T_);
                lev.dual = solve_dual(m, u, grid);
            } else {
                const auto red = illiquid_reduction(par_, T_);
                const auto u = reduced_utility(K, red.discount);
                lev.dual = solve_dual(red.market, u, grid);
                lev.offset = offset_;
            }
            levels_.push_back(std::move(lev));
        }
    }

    double operator()(double alpha0) const {
        if (opt_.force_alpha_zero) return combine([this](const Level& l) { return value_at(l, 1.0); });
        return combine([&](const Level& l) {
            if (alpha0 <= 0.0) return unit_tail(l);
            const double z = (1.0 - alpha0) / alpha0;
            return std::pow(alpha0, par_.p) * (value_at(l, z) + l.offset);
        });
    }

private:
    struct Level {
        DualSolution dual;
        double offset = 0.0;
    };

    template <class F>
    double combine(F&& f) const {
        if (levels_.size() == 1) return f(levels_[0]);
        return 2.0 * f(levels_[1]) - f(levels_[0]);
    }

    static std::pair<double, double> range(const Level& l) {
        const auto& wy = l.dual.W_y[0];
        return {-wy[wy.size() - 2], -wy[1]};
    }

    // Normalized value at t = 0, extended p-homogeneously outside the grid.
    double value_at(const Level& l, double z) const {
        if (z <= 0.0) return 0.0;
        const auto [lo, hi] = range(l);
        const double a = lo * 1.05, b = hi * 0.95;
        if (z < a) return legendre_min(l.dual, 0, a) * std::pow(z / a, par_.p);
        if (z > b) return legendre_min(l.dual, 0, b) * std::pow(z / b, par_.p);
        return legendre_min(l.dual, 0, z);
    }

    // lim alpha0 -> 0 of alpha0^p V(z) under the homogeneous extension.
    double unit_tail(const Level& l) const {
        const double b = range(l).second * 0.95;
        return legendre_min(l.dual, 0, b) * std::pow(b, -par_.p);
    }

    UtilityModel reduced_utility(double K, double delta) {
        const auto law = exponential_law(par_.arrival_rate);
        const double p = par_.p;
        const std::size_t order = opt_.quad_order;
        const IlliquidParams par = par_;
        const double T = T_;
        Curve F = law.F, f = law.density;
        Curve ac = [=](double t) { return std::exp(-delta * t) * (1.0 - F(t)); };
        Curve w = [=](double t) { return std::exp(-delta * t) * f(t); };
        const double wT = std::exp(-delta * T) * (1.0 - F(T));
        auto G = [=](double t, double x) { return liquidation_value_fixed(par, K, t, x, 1.0, order); };
        auto Gx = [=](double t, double x) {
            return K * expect_J(par, t, order, [&](double j) { return std::pow(x + j, p - 1.0); });
        };
        // liquidation_value() at a few probe points guards the fixed order.
        for (double t : {0.25 * T, T})
            for (double x : {0.0, 1.0, 100.0}) (void)liquidation_value(par, K, t, x, 1.0, order);
        offset_ = integrate([&](double t) { return w(t) * G(t, 0.0); }, 0.0, T) + wT * G(T, 0.0);

        UtilityModel u;
        u.p = p;
        u.u1 = [=](double t, double c, double x) {
            return ac(t) * std::pow(c, p) / p + w(t) * (G(t, x) - G(t, 0.0));
        };
        u.u1_c = [=](double t, double c, double) { return ac(t) * std::pow(c, p - 1.0); };
        u.u1_x = [=](double t, double, double x) { return w(t) * Gx(t, x); };
        u.u2 = [=](double x) { return wT * (G(T, x) - G(T, 0.0)); };
        u.u2_x = [=](double x) { return wT * Gx(T, x); };
        u.separable = SeparableParts{
            [=](double t, double c) { return ac(t) * std::pow(c, p) / p; },
            [=](double t, double c) { return ac(t) * std::pow(c, p - 1.0); },
            [=](double t, double x) { return w(t) * (G(t, x) - G(t, 0.0)); },
            [=](double t, double x) { return w(t) * Gx(t, x); },
        };
        u.power = PowerForm{ac, std::nullopt, std::nullopt};
        u.K = (1.0 + K * (par.arrival_rate + 1.0)) / p;
        u.regime = ConsumptionRegime::Inada;
        u.unbounded = Unbounded::Both;
        u.family = "illiquid";
        return u;
    }

    IlliquidParams par_;
    KvOptions opt_;
    double T_;
    double offset_ = 0.0;
    std::vector<Level> levels_;
};

double golden_max(const std::function<double(double)>& f, double a, double m, double b, double tol) {
    struct Ctx {
        const std::function<double(double)>* f;
    } ctx{&f};
    gsl_function F;
    F.function = [](double x, void* c) { return -(*static_cast<Ctx*>(c)->f)(x); };
    F.params = &ctx;
    gsl_min_fminimizer* s = gsl_min_fminimizer_alloc(gsl_min_fminimizer_goldensection);
    gsl_error_handler_t* old = gsl_set_error_handler_off();
    double best = m;
    if (gsl_min_fminimizer_set(s, &F, m, a, b) == GSL_SUCCESS) {
        for (int i = 0; i < 200; ++i) {
            if (gsl_min_fminimizer_iterate(s) != GSL_SUCCESS) break;
            best = gsl_min_fminimizer_x_minimum(s);
            if (gsl_min_fminimizer_x_upper(s) - gsl_min_fminimizer_x_lower(s) < tol) break;
        }
    }
    gsl_set_error_handler(old);
    gsl_min_fminimizer_free(s);
    return best;
}

std::pair<double, double> maximize_alpha(const KvMap& map, const KvOptions& opt) {
    if (opt.force_alpha_zero) return {0.0, map(0.0)};
    const std::size_t n = std::max<std::size_t>(opt.alpha_scan, 3);
    std::vector<double> a(n), v(n);
    std::size_t best = 0;
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = static_cast<double>(i) / static_cast<double>(n - 1);
        v[i] = map(a[i]);
        if (v[i] > v[best]) best = i;
    }
    if (best == 0 || best + 1 == n) return {a[best], v[best]};
    if (!(v[best] > v[best - 1] && v[best] > v[best + 1])) return {a[best], v[best]};
    const std::function<double(double)> f = [&](double x) { return map(x); };
    const double x = golden_max(f, a[best - 1], a[best], a[best + 1], opt.alpha_tol);
    const double fx = map(x);
    return fx > v[best] ? std::pair{x, fx} : std::pair{a[best], v[best]};
}

}  // namespace

double kv_objective(const IlliquidParams& par, double K, double alpha0, const KvOptions& opt) {
    check_params(par);
    const double T = opt.T_trunc > 0.0 ? opt.T_trunc : default_truncation(par);
    KvMap map(par, opt, T);
    map.prepare(K);
    return map(alpha0);
}

KvResult kv_fixed_point(const IlliquidParams& par, const KvOptions& opt, KvResult* result_on_failure) {
    check_params(par);
    if (!opt.force_alpha_zero) (void)illiquid_reduction(par);
    const double delta = par.beta - discount_shift(par);
    if (!(delta > par.margin)) throw Error(ErrorCode::DiscountTooSmall, "beta <= k_{Y,p} + margin");
    KvResult res;
    res.T_trunc = opt.T_trunc > 0.0 ? opt.T_trunc : default_truncation(par);
    res.truncation_factor = std::exp(-delta * res.T_trunc);
    KvMap map(par, opt, res.T_trunc);
    double K = opt.K_start;
    for (int it = 0; it < opt.max_iter; ++it) {
        map.prepare(K);
        const auto [alpha, value] = maximize_alpha(map, opt);
        const double K_next = par.p * value;
        res.trace.push_back({K_next, alpha, value});
        res.alpha0 = alpha;
        const bool done = std::abs(K_next - K) < opt.tol * K;
        K = K_next;
        res.K = K;
        if (done) {
            res.converged = true;
            return res;
        }
    }
    if (result_on_failure) *result_on_failure = res;
    std::ostringstream msg;
    msg << "K_V iteration did not converge in " << opt.max_iter << " steps; last K = " << K;
    throw Error(ErrorCode::NoConvergence, msg.str());
}

}  // namespace dualhjb

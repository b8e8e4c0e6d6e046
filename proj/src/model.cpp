#include "dualhjb/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dualhjb {

namespace {

constexpr double kFdStep = 1e-6;

std::string describe(const ProbePoint& pt) {
    std::ostringstream os;
    os.precision(6);
    os << "(t=" << pt.t << ", c=" << pt.c << ", x=" << pt.x << ")";
    return os.str();
}

double scaled_tol(double a, double b) {
    return kShapeTolerance * std::max({1.0, std::abs(a), std::abs(b)});
}

struct CheckBuilder {
    CheckOutcome outcome;

    CheckBuilder(std::string name, ErrorCode code) {
        outcome.name = std::move(name);
        outcome.code = code;
    }

    // Records the first violation only.
    void fail(const ProbePoint& pt, const std::string& detail) {
        if (!outcome.passed) return;
        outcome.passed = false;
        outcome.where = pt;
        outcome.detail = detail + " at " + describe(pt);
    }
};

}  // namespace

Curve piecewise_linear_curve(std::vector<std::pair<double, double>> knots) {
    if (knots.empty()) throw Error(ErrorCode::InvalidArgument, "piecewise-linear curve needs knots");
    std::sort(knots.begin(), knots.end());
    return [knots = std::move(knots)](double t) {
        if (t <= knots.front().first) return knots.front().second;
        if (t >= knots.back().first) return knots.back().second;
        auto hi = std::upper_bound(knots.begin(), knots.end(), t,
                                   [](double v, const auto& k) { return v < k.first; });
        auto lo = hi - 1;
        const double w = (t - lo->first) / (hi->first - lo->first);
        return (1.0 - w) * lo->second + w * hi->second;
    };
}

MarketModel MarketModel::constant(double b, double sigma, double T) {
    return MarketModel{[b](double) { return b; }, [sigma](double) { return sigma; }, T, 1.0};
}

MarketModel MarketModel::piecewise_linear(std::vector<std::pair<double, double>> b_knots,
                                          std::vector<std::pair<double, double>> sigma_knots,
                                          double T) {
    return MarketModel{piecewise_linear_curve(std::move(b_knots)),
                       piecewise_linear_curve(std::move(sigma_knots)), T, 1.0};
}

UtilityModel power_utility(double p, Curve a_c, Curve a_x, double a_T) {
    if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::InvalidArgument, "power exponent must lie in (0,1)");
    if (a_T < 0.0) throw Error(ErrorCode::InvalidArgument, "a_T must be nonnegative");
    UtilityModel u;
    u.p = p;
    u.u1 = [p, a_c, a_x](double t, double c, double x) {
        return a_c(t) * std::pow(c, p) / p + a_x(t) * std::pow(x, p) / p;
    };
    u.u1_c = [p, a_c](double t, double c, double) { return a_c(t) * std::pow(c, p - 1.0); };
    u.u1_x = [p, a_x](double t, double, double x) { return a_x(t) * std::pow(x, p - 1.0); };
    u.u2 = [p, a_T](double x) { return a_T * std::pow(x, p) / p; };
    u.u2_x = [p, a_T](double x) { return a_T * std::pow(x, p - 1.0); };
    u.separable = SeparableParts{
        [p, a_c](double t, double c) { return a_c(t) * std::pow(c, p) / p; },
        [p, a_c](double t, double c) { return a_c(t) * std::pow(c, p - 1.0); },
        [p, a_x](double t, double x) { return a_x(t) * std::pow(x, p) / p; },
        [p, a_x](double t, double x) { return a_x(t) * std::pow(x, p - 1.0); },
    };
    u.power = PowerForm{a_c, a_x, a_T};

    const double ac0 = a_c(0.0);
    const double ax0 = a_x(0.0);
    u.regime = ac0 > 0.0 ? ConsumptionRegime::Inada : ConsumptionRegime::NoConsumption;
    if (ac0 > 0.0 && a_T > 0.0)
        u.unbounded = Unbounded::Both;
    else if (a_T > 0.0)
        u.unbounded = Unbounded::Wealth;
    else
        u.unbounded = Unbounded::Consumption;
    u.K = std::max({ac0, ax0 + a_T, 1e-300}) / p;
    u.identically_zero = false;
    u.family = "power";
    return u;
}

UtilityModel power_utility(double p, double a_c, double a_x, double a_T) {
    if (a_c < 0.0 || a_x < 0.0) throw Error(ErrorCode::InvalidArgument, "power coefficients must be nonnegative");
    auto u = power_utility(p, Curve([a_c](double) { return a_c; }), Curve([a_x](double) { return a_x; }), a_T);
    u.identically_zero = (a_c == 0.0 && a_x == 0.0 && a_T == 0.0);
    if (u.identically_zero) u.K = 1.0;
    return u;
}

UtilityModel zero_utility(double p) {
    auto u = power_utility(p, 0.0, 0.0, 0.0);
    u.family = "zero";
    return u;
}

double central_difference(const Curve& f, double x) {
    const double h = kFdStep * std::max(std::abs(x), 1e-8);
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

double marginal_c(const UtilityModel& u, double t, double c, double x) {
    if (u.u1_c) return u.u1_c(t, c, x);
    return central_difference([&](double cc) { return u.u1(t, cc, x); }, c);
}

double marginal_x(const UtilityModel& u, double t, double c, double x) {
    if (u.u1_x) return u.u1_x(t, c, x);
    return central_difference([&](double xx) { return u.u1(t, c, xx); }, x);
}

double marginal_u2(const UtilityModel& u, double x) {
    if (u.u2_x) return u.u2_x(x);
    return central_difference(u.u2, x);
}

bool uses_fd_fallback(const UtilityModel& u) { return !u.u1_c || !u.u1_x || !u.u2_x; }

ProbeGrid ProbeGrid::regular(double T, std::size_t n) {
    ProbeGrid g;
    for (std::size_t i = 0; i < n; ++i) {
        g.t.push_back(T * static_cast<double>(i) / static_cast<double>(n));
        const double e = -2.0 + 4.0 * static_cast<double>(i) / static_cast<double>(n - 1);
        g.c.push_back(std::pow(10.0, e));
        g.x.push_back(std::pow(10.0, e));
    }
    return g;
}

bool ValidationReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

const CheckOutcome* ValidationReport::first_failure() const {
    for (const auto& c : checks)
        if (!c.passed) return &c;
    return nullptr;
}

ValidationReport validate_model(const MarketModel& market, const UtilityModel& utility,
                                const ProbeGrid& probes) {
    if (probes.t.empty() || probes.c.empty() || probes.x.empty())
        throw Error(ErrorCode::InvalidArgument, "probe grid must be nonempty");
    for (double t : probes.t)
        if (t < 0.0 || t >= market.T) throw Error(ErrorCode::InvalidArgument, "probe time outside [0,T)");
    for (double v : probes.c)
        if (!(v > 0.0)) throw Error(ErrorCode::InvalidArgument, "probe consumption must be positive");
    for (double v : probes.x)
        if (!(v > 0.0)) throw Error(ErrorCode::InvalidArgument, "probe wealth must be positive");

    ValidationReport report;
    report.derivative_fallback = uses_fd_fallback(utility);

    auto cs = probes.c;
    auto xs = probes.x;
    std::sort(cs.begin(), cs.end());
    std::sort(xs.begin(), xs.end());

    // Market coefficients are checked on the probe times and on a uniform
    // sweep of the closed interval [0, T].
    std::vector<double> market_times = probes.t;
    for (int i = 0; i <= 100; ++i) market_times.push_back(market.T * i / 100.0);
    {
        CheckBuilder vol("volatility_positive", ErrorCode::NonPositiveVolatility);
        CheckBuilder drift("drift_positive", ErrorCode::NonPositiveDrift);
        CheckBuilder sharpe("sharpe_finite", ErrorCode::NonPositiveVolatility);
        for (double t : market_times) {
            const double s = market.sigma(t);
            const double b = market.b(t);
            if (!(s > 0.0)) vol.fail({t, 0.0, 0.0}, "sigma(t) = " + std::to_string(s));
            if (!(b > 0.0)) drift.fail({t, 0.0, 0.0}, "b(t) = " + std::to_string(b));
            if (s > 0.0 && b > 0.0) {
                const double th = market.theta(t);
                const double lam = market.lambda(t);
                if (!std::isfinite(th) || !std::isfinite(lam) || !(lam > 0.0))
                    sharpe.fail({t, 0.0, 0.0}, "non-finite Sharpe quantities");
            }
        }
        report.checks.push_back(vol.outcome);
        report.checks.push_back(drift.outcome);
        report.checks.push_back(sharpe.outcome);
    }

    const auto& U1 = utility.u1;
    const auto& U2 = utility.u2;

    {
        CheckBuilder norm("normalization", ErrorCode::NormalizationViolation);
        for (double t : probes.t) {
            const double v = U1(t, 0.0, 0.0);
            if (std::abs(v) > kShapeTolerance) norm.fail({t, 0.0, 0.0}, "U1(t,0,0) = " + std::to_string(v));
        }
        const double v2 = U2(0.0);
        if (std::abs(v2) > kShapeTolerance) norm.fail({0.0, 0.0, 0.0}, "U2(0) = " + std::to_string(v2));
        report.checks.push_back(norm.outcome);
    }

    {
        CheckBuilder conc("concavity", ErrorCode::ConcavityViolation);
        CheckBuilder mono("monotonicity", ErrorCode::MonotonicityViolation);
        auto midpoint = [&](double t, double c0, double x0, double c1, double x1) {
            const double f0 = U1(t, c0, x0);
            const double f1 = U1(t, c1, x1);
            const double fm = U1(t, 0.5 * (c0 + c1), 0.5 * (x0 + x1));
            if (fm - 0.5 * (f0 + f1) < -scaled_tol(f0, f1))
                conc.fail({t, c0, x0}, "U1 midpoint concavity violated");
        };
        for (double t : probes.t) {
            for (std::size_t i = 0; i < cs.size(); ++i) {
                for (std::size_t k = 0; k < xs.size(); ++k) {
                    const double c = cs[i], x = xs[k];
                    if (i + 1 < cs.size()) {
                        midpoint(t, c, x, cs[i + 1], x);
                        const double a = U1(t, c, x), b = U1(t, cs[i + 1], x);
                        if (b < a - scaled_tol(a, b)) mono.fail({t, c, x}, "U1 decreasing in c");
                    }
                    if (k + 1 < xs.size()) {
                        midpoint(t, c, x, c, xs[k + 1]);
                        const double a = U1(t, c, x), b = U1(t, c, xs[k + 1]);
                        if (b < a - scaled_tol(a, b)) mono.fail({t, c, x}, "U1 decreasing in x");
                    }
                    if (i + 1 < cs.size() && k + 1 < xs.size()) {
                        midpoint(t, c, x, cs[i + 1], xs[k + 1]);
                        midpoint(t, cs[i + 1], x, c, xs[k + 1]);
                    }
                }
            }
        }
        for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
            const double a = U2(xs[k]), b = U2(xs[k + 1]);
            if (b < a - scaled_tol(a, b)) mono.fail({0.0, 0.0, xs[k]}, "U2 decreasing");
            if (k + 2 < xs.size()) {
                // second divided difference on the (possibly nonuniform) probe points
                const double c2 = U2(xs[k + 2]);
                const double s0 = (b - a) / (xs[k + 1] - xs[k]);
                const double s1 = (c2 - b) / (xs[k + 2] - xs[k + 1]);
                if (s1 - s0 > scaled_tol(s0, s1)) conc.fail({0.0, 0.0, xs[k + 1]}, "U2 not concave");
            }
        }
        report.checks.push_back(conc.outcome);
        report.checks.push_back(mono.outcome);
    }

    {
        CheckBuilder growth("growth_bound", ErrorCode::GrowthBoundViolation);
        const double p = utility.p;
        for (double t : probes.t)
            for (double c : cs)
                for (double x : xs) {
                    const double lhs = U1(t, c, x) + U2(x);
                    const double rhs = utility.K * (1.0 + std::pow(c, p) + std::pow(x, p));
                    if (lhs > rhs + scaled_tol(lhs, rhs))
                        growth.fail({t, c, x}, "U1+U2 = " + std::to_string(lhs) + " > K(1+c^p+x^p) = " +
                                                   std::to_string(rhs));
                }
        report.checks.push_back(growth.outcome);
    }

    {
        CheckBuilder inada("inada", ErrorCode::InadaViolation);
        for (double t : probes.t)
            for (double x : xs) {
                if (utility.regime == ConsumptionRegime::NoConsumption) {
                    for (double c : cs) {
                        const double m = marginal_c(utility, t, c, x);
                        if (std::abs(m) > 1e-6) inada.fail({t, c, x}, "U1_c nonzero in no-consumption regime");
                    }
                    continue;
                }
                double prev = marginal_c(utility, t, cs.front(), x);
                for (std::size_t i = 1; i < cs.size(); ++i) {
                    const double m = marginal_c(utility, t, cs[i], x);
                    if (!(m < prev)) inada.fail({t, cs[i], x}, "U1_c not strictly decreasing in c");
                    prev = m;
                }
                // Scale-free limits: U1_c(0+) / U1_c(1) and U1_c(inf) / U1_c(1).
                const double mid = marginal_c(utility, t, 1.0, x);
                const double lo = marginal_c(utility, t, 1e-10, x);
                const double hi = marginal_c(utility, t, 1e10, x);
                if (!(mid > 0.0) || !(lo >= 1e3 * mid) || !(hi <= 1e-3 * mid))
                    inada.fail({t, 1.0, x}, "U1_c limits at 0+ and +inf not Inada-like");
            }
        report.checks.push_back(inada.outcome);
    }

    {
        CheckBuilder unb("unboundedness_declared", ErrorCode::ModelValidation);
        if (!utility.identically_zero) {
            const double t0 = probes.t.front();
            const bool cons = U1(t0, 1e8, 0.0) > U1(t0, 1e4, 0.0) + kShapeTolerance;
            const bool wealth = U2(1e8) > U2(1e4) + kShapeTolerance;
            const bool ok = (utility.unbounded == Unbounded::Consumption && cons) ||
                            (utility.unbounded == Unbounded::Wealth && wealth) ||
                            (utility.unbounded == Unbounded::Both && cons && wealth);
            if (!ok) unb.fail({t0, 1e8, 1e8}, "declared unbounded direction does not grow");
        }
        report.checks.push_back(unb.outcome);
    }

    return report;
}

void require_valid(const ValidationReport& report) {
    if (const auto* f = report.first_failure()) throw Error(f->code, f->name + ": " + f->detail);
}

}  // namespace dualhjb

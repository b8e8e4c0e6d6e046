#include "dualhjb/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/tools/minima.hpp>

namespace dualhjb {

namespace {

constexpr double kTiny = 1e-300;
constexpr double kHuge = 1e300;

enum class BracketState { Found, PositiveEverywhere, NonPositiveEverywhere };

struct Bracket {
    BracketState state;
    double lo = 0.0;
    double hi = 0.0;
};

// Brackets the root of a nonincreasing h on (0, inf) by doubling/halving from 1
// so that h(lo) > 0 >= h(hi) with hi = 2 lo.
template <class H>
Bracket bracket_decreasing(const H& h, const ConjugateOptions& opt) {
    double x = 1.0;
    if (h(x) > 0.0) {
        for (int i = 0; i < opt.max_expansions; ++i) {
            const double next = 2.0 * x;
            if (next > kHuge) break;
            if (!(h(next) > 0.0)) return {BracketState::Found, x, next};
            x = next;
        }
        return {BracketState::PositiveEverywhere};
    }
    for (int i = 0; i < opt.max_expansions; ++i) {
        const double next = 0.5 * x;
        if (next < kTiny) break;
        if (h(next) > 0.0) return {BracketState::Found, next, x};
        x = next;
    }
    return {BracketState::NonPositiveEverywhere};
}

template <class H>
double bisect(const H& h, double lo, double hi, int steps) {
    for (int i = 0; i < steps; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (h(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

bool use_power(const UtilityModel& u, const ConjugateOptions& opt) {
    return opt.route == Route::Auto && u.power.has_value();
}

// ((1-p)/p) a^{1/(1-p)} y^{-p/(1-p)}: conjugate of a s^p / p.
double power_conjugate(double a, double p, double y) {
    if (a <= 0.0) return 0.0;
    return (1.0 - p) / p * std::pow(a, 1.0 / (1.0 - p)) * std::pow(y, -p / (1.0 - p));
}

double wealth_part(const UtilityModel& u, double t, double x) {
    if (u.separable) return u.separable->wealth(t, x);
    return u.u1(t, 0.0, x);
}

}  // namespace

double scalar_conjugate_argmax(const Curve& f_prime, double y, const ConjugateOptions& opt) {
    if (!(y > 0.0)) throw Error(ErrorCode::InvalidArgument, "conjugate requires y > 0");
    auto h = [&](double x) { return f_prime(x) - y; };
    const auto br = bracket_decreasing(h, opt);
    switch (br.state) {
        case BracketState::PositiveEverywhere:
            throw Error(ErrorCode::UnboundedConjugate,
                        "marginal stays above y = " + std::to_string(y) + " on the search domain");
        case BracketState::NonPositiveEverywhere: return 0.0;
        case BracketState::Found: break;
    }
    return bisect(h, br.lo, br.hi, opt.bisection_steps);
}

ExtendedReal scalar_conjugate(const Curve& f, const Curve& f_prime, double y, const ConjugateOptions& opt) {
    const Curve deriv = f_prime ? f_prime : Curve([&f](double x) { return central_difference(f, x); });
    const double xs = scalar_conjugate_argmax(deriv, y, opt);
    const double value = std::max(f(xs) - xs * y, f(0.0));
    if (value > opt.cap) return {opt.cap, true};
    return {value, false};
}

ExtendedReal conjugate_U2(const UtilityModel& u, double y, const ConjugateOptions& opt) {
    if (!(y > 0.0)) throw Error(ErrorCode::InvalidArgument, "conjugate_U2 requires y > 0");
    if (use_power(u, opt) && u.power->a_T) {
        const double v = power_conjugate(*u.power->a_T, u.p, y);
        if (v > opt.cap) return {opt.cap, true};
        return {v, false};
    }
    return scalar_conjugate(u.u2, u.u2_x, y, opt);
}

double optimal_c(const UtilityModel& u, double t, double y, double x, const ConjugateOptions& opt) {
    if (!(y > 0.0)) throw Error(ErrorCode::InvalidArgument, "optimal_c requires y > 0");
    if (u.regime == ConsumptionRegime::NoConsumption) return 0.0;
    if (use_power(u, opt)) {
        const double a = u.power->a_c(t);
        if (a <= 0.0) return 0.0;
        return std::pow(y / a, 1.0 / (u.p - 1.0));
    }
    auto h = [&](double c) { return marginal_c(u, t, c, x) - y; };
    const auto br = bracket_decreasing(h, opt);
    if (br.state != BracketState::Found)
        throw Error(ErrorCode::RootBracketFailure,
                    "U1_c(t,.,x) does not cross y = " + std::to_string(y) + " (non-Inada input?)");
    return bisect(h, br.lo, br.hi, opt.bisection_steps);
}

double conjugate_c_U1(const UtilityModel& u, double t, double y, double x, const ConjugateOptions& opt) {
    if (use_power(u, opt)) return power_conjugate(u.power->a_c(t), u.p, y) + wealth_part(u, t, x);
    const double c = optimal_c(u, t, y, x, opt);
    return u.u1(t, c, x) - c * y;
}

double double_conjugate_U1(const UtilityModel& u, double t, double y, double dual_u,
                           const ConjugateOptions& opt) {
    if (!(y > 0.0) || !(dual_u > 0.0))
        throw Error(ErrorCode::InvalidArgument, "double conjugate requires y > 0 and u > 0");
    if (use_power(u, opt) && u.power->a_x)
        return power_conjugate(u.power->a_c(t), u.p, y) + power_conjugate((*u.power->a_x)(t), u.p, dual_u);
    if (opt.route == Route::Auto && u.separable) {
        const auto& s = *u.separable;
        const double cons = conjugate_c_U1(u, t, y, 0.0, opt) - wealth_part(u, t, 0.0);
        Curve g = [&](double x) { return s.wealth(t, x); };
        Curve gx;
        if (s.wealth_x) gx = [&](double x) { return s.wealth_x(t, x); };
        return cons + scalar_conjugate(g, gx, dual_u, opt).value;
    }
    // General route: d/dx U1*(t,y,x) = U1_x(t, c*(t,y,x), x) by the envelope identity.
    Curve f = [&](double x) { return conjugate_c_U1(u, t, y, x, opt); };
    Curve fx = [&](double x) { return marginal_x(u, t, optimal_c(u, t, y, x, opt), x); };
    return scalar_conjugate(f, fx, dual_u, opt).value;
}

MarginalArgmin inverse_marginal_x(const UtilityModel& u, double t, double y, double q,
                                  const ConjugateOptions& opt) {
    if (!(q < 0.0)) throw Error(ErrorCode::InvalidArgument, "inverse_marginal_x requires q < 0");
    if (!(y > 0.0)) throw Error(ErrorCode::InvalidArgument, "inverse_marginal_x requires y > 0");
    if (opt.route == Route::Auto) {
        const double x = -q;
        const double us = marginal_x(u, t, optimal_c(u, t, y, x, opt), x);
        if (!(us > 0.0)) return {0.0, true};
        return {us, false};
    }
    auto phi = [&](double v) {
        if (v <= 0.0) return std::numeric_limits<double>::infinity();
        return double_conjugate_U1(u, t, y, v, opt) - v * q;
    };
    // Expand the right end until phi turns upward; convexity makes the
    // minimizer lie in [0, hi].
    double hi = 1.0;
    for (int i = 0; i < 200 && phi(2.0 * hi) < phi(hi); ++i) hi *= 2.0;
    hi *= 2.0;
    const double lo = hi * 1e-12;
    const auto [arg, val] = boost::math::tools::brent_find_minima(phi, lo, hi, 40);
    (void)val;
    if (arg <= lo * 1e3) return {0.0, true};
    return {arg, false};
}

ConjugateBundle make_bundle(const UtilityModel& u, double T, const ConjugateOptions& opt) {
    ConjugateBundle b;
    b.p = u.p;
    b.cap = opt.cap;
    b.U1_star = [u, opt](double t, double y, double x) { return conjugate_c_U1(u, t, y, x, opt); };
    b.U1_star_tilde = [u, opt](double t, double y, double v) { return double_conjugate_U1(u, t, y, v, opt); };
    b.U2_tilde = [u, opt](double y) { return conjugate_U2(u, y, opt).value; };
    b.c_star = [u, opt](double t, double y, double x) { return optimal_c(u, t, y, x, opt); };

    const double q = u.q();
    const double samples[] = {1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3};
    const double times[] = {0.0, 0.5 * T, T};
    bool zero_source = true;
    bool zero_terminal = true;
    double k_tilde = 0.0;
    for (double y : samples) {
        const double u2t = b.U2_tilde(y);
        if (u2t != 0.0) zero_terminal = false;
        for (double t : times) {
            for (double x : samples)
                if (b.U1_star(t, y, x) != 0.0) zero_source = false;
            for (double v : samples) {
                const double lhs = b.U1_star_tilde(t, y, v) + u2t;
                k_tilde = std::max(k_tilde, lhs / (1.0 + std::pow(y, -q) + std::pow(v, -q)));
            }
        }
    }
    b.zero_source = zero_source;
    b.zero_terminal = zero_terminal;
    b.K_tilde = std::max(k_tilde, 1e-300);
    return b;
}

}  // namespace dualhjb

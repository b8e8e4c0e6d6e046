#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "dualhjb/applications.hpp"
#include "oracles.hpp"

using namespace dualhjb;

namespace {

RandomHorizonSpec power_spec(const HorizonLaw& law, double T = 1.0, double p = 0.5) {
    RandomHorizonSpec s;
    s.G1 = [p](double, double c) { return std::pow(c, p) / p; };
    s.G2 = [p](double, double x) { return std::pow(x, p) / p; };
    s.law = law;
    s.T = T;
    s.p = p;
    return s;
}

HorizonLaw never_stops() {
    return {[](double) { return 0.0; }, [](double) { return 0.0; },
            [](double) { return std::numeric_limits<double>::infinity(); }};
}

IlliquidParams example_params() {
    IlliquidParams par;
    par.p = 0.5;
    par.rho = 0.5;
    par.sigma_I = 0.4;
    par.b_L = 0.2;
    par.sigma_L = 0.3;
    return par;
}

// Plug-in formulas, coded from scratch.
double k_formula(double p, double rho, double sI, double bL, double sL) {
    return p * rho * (sI * bL / sL) - p * (1 - p) * rho * rho * sI * sI / 2;
}
double beff_formula(double p, double rho, double sI, double bL, double sL) { return bL - rho * sI * sL * (1 - p); }

bool throws_code(ErrorCode code, const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code() == code;
    }
    return false;
}

}  // namespace

TEST_CASE("identity transform when the horizon is never reached") {
    const auto u = random_horizon_transform(power_spec(never_stops()));
    for (double t : {0.0, 0.3, 1.0})
        for (double c : {0.1, 1.0, 7.0})
            for (double x : {0.0, 2.0}) CHECK(u.u1(t, c, x) == doctest::Approx(2.0 * std::sqrt(c)).epsilon(1e-15));
    for (double x : {0.0, 0.5, 9.0}) CHECK(u.u2(x) == doctest::Approx(2.0 * std::sqrt(x)).epsilon(1e-15));
}

TEST_CASE("exponential weights at t = 1") {
    const auto u = random_horizon_transform(power_spec(exponential_law(0.5)));
    // G1(1,1) = G2(1,1) = 2
    CHECK(u.u1(1.0, 1.0, 0.0) / 2.0 == doctest::Approx(0.60653).epsilon(1e-5));
    CHECK(u.u1(1.0, 0.0, 1.0) / 2.0 == doctest::Approx(0.30327).epsilon(1e-5));
    CHECK(u.u2(1.0) / 2.0 == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
}

TEST_CASE("terminal weight vanishes for a fast horizon") {
    const auto u = random_horizon_transform(power_spec(exponential_law(60.0)));
    CHECK(u.u2(1.0) < 1e-25);
    // at t = 0 the running weight is dominated by f G2
    CHECK(u.u1(0.0, 0.0, 1.0) == doctest::Approx(120.0));
    CHECK(u.u1(0.0, 1.0, 0.0) == doctest::Approx(2.0));
}

TEST_CASE("negative density is rejected") {
    HorizonLaw bad{[](double t) { return 0.1 * t; }, [](double t) { return t < 0.5 ? 0.1 : -0.1; }, {}};
    CHECK(throws_code(ErrorCode::NegativeWeight, [&] { random_horizon_transform(power_spec(bad)); }));
    HorizonLaw inconsistent{[](double t) { return 0.5 * t; }, [](double) { return 0.1; }, {}};
    CHECK(throws_code(ErrorCode::InvalidArgument, [&] { random_horizon_transform(power_spec(inconsistent)); }));
}

TEST_CASE("power closed form agrees with the generic transform") {
    const auto law = exponential_law(0.7);
    const auto generic = random_horizon_transform(power_spec(law, 2.0));
    const auto closed = power_random_horizon(0.5, law, 2.0, 1.0, 1.0);
    for (double t : {0.0, 0.5, 1.7, 2.0})
        for (double c : {0.2, 3.0})
            for (double x : {0.1, 4.0}) CHECK(closed.u1(t, c, x) == doctest::Approx(generic.u1(t, c, x)).epsilon(1e-13));
    CHECK(closed.u2(3.0) == doctest::Approx(generic.u2(3.0)).epsilon(1e-13));
}

TEST_CASE("transformed model passes validation") {
    const auto u = power_random_horizon(0.5, exponential_law(0.5), 1.0, 1.0, 1.0);
    const auto rep = validate_model(MarketModel::constant(0.3, 0.5, 1.0), u, ProbeGrid::regular(1.0, 8));
    CHECK(rep.passed());
}

TEST_CASE("illiquid reduction examples") {
    auto par = example_params();
    const auto r = illiquid_reduction(par);
    CHECK(r.k == doctest::Approx(0.061667).epsilon(1e-5));
    CHECK(r.b_eff == doctest::Approx(0.17).epsilon(1e-14));
    CHECK(r.discount == doctest::Approx(par.beta - r.k).epsilon(1e-15));
    CHECK(r.market.b(0.5) == r.b_eff);
    CHECK(r.market.sigma(0.5) == par.sigma_L);

    par.rho = 0.0;
    CHECK(discount_shift(par) == 0.0);
    CHECK(effective_drift(par) == par.b_L);

    par.rho = 0.5;
    par.p = 1e-12;
    CHECK(std::abs(discount_shift(par)) < 1e-11);
    CHECK(effective_drift(par) == doctest::Approx(0.2 - 0.5 * 0.4 * 0.3).epsilon(1e-11));
}

TEST_CASE("discount below the shift is rejected") {
    auto par = example_params();
    par.beta = 0.05;
    CHECK(throws_code(ErrorCode::DiscountTooSmall, [&] { illiquid_reduction(par); }));
    CHECK(throws_code(ErrorCode::DiscountTooSmall, [&] { kv_fixed_point(par); }));
    par.beta = 1.0;
    par.rho = 1.0;
    CHECK(throws_code(ErrorCode::InvalidArgument, [&] { illiquid_reduction(par); }));
}

TEST_CASE("random sweep of the reduction arithmetic") {
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> pos(0.05, 1.0), corr(-0.99, 0.99), expo(0.01, 0.99);
    const double eps = std::numeric_limits<double>::epsilon();
    for (int i = 0; i < 100; ++i) {
        IlliquidParams par;
        par.b_L = pos(gen);
        par.sigma_L = pos(gen);
        par.b_I = pos(gen);
        par.sigma_I = pos(gen);
        par.rho = corr(gen);
        par.p = expo(gen);
        const double k = k_formula(par.p, par.rho, par.sigma_I, par.b_L, par.sigma_L);
        const double be = beff_formula(par.p, par.rho, par.sigma_I, par.b_L, par.sigma_L);
        const double k_scale = std::abs(par.p * par.rho * par.sigma_I * par.b_L / par.sigma_L) + 1.0;
        CHECK(std::abs(discount_shift(par) - k) <= 8 * eps * k_scale);
        CHECK(std::abs(effective_drift(par) - be) <= 8 * eps * (par.b_L + 1.0));
    }
}

TEST_CASE("law of log J from an Euler scheme of the I and Y dynamics") {
    auto par = example_params();
    par.b_I = 0.1;
    const double t = 1.0;
    const int steps = 400, paths = 20000;
    const double dt = t / steps, sq = std::sqrt(dt);
    std::mt19937_64 gen(11);
    std::normal_distribution<double> n01;
    double s1 = 0.0, s2 = 0.0;
    for (int k = 0; k < paths; ++k) {
        double I = 1.0, Y = 1.0;
        for (int s = 0; s < steps; ++s) {
            const double dW = sq * n01(gen), dB = sq * n01(gen);
            I += I * (par.b_I * dt + par.sigma_I * (par.rho * dW + std::sqrt(1 - par.rho * par.rho) * dB));
            Y += Y * (par.rho * par.b_L * par.sigma_I / par.sigma_L * dt + par.rho * par.sigma_I * dW);
        }
        const double l = std::log(I / Y);
        s1 += l;
        s2 += l * l;
    }
    const double mean = s1 / paths, var = s2 / paths - mean * mean;
    const auto m = log_J_moments(par, t);
    const double se_mean = std::sqrt(var / paths), se_var = var * std::sqrt(2.0 / paths);
    CHECK(std::abs(mean - m.mean) < 4 * se_mean);
    CHECK(std::abs(var - m.var) < 4 * se_var);
}

TEST_CASE("liquidation value limits") {
    auto par = example_params();
    const double K = 0.8, p = par.p;
    CHECK(liquidation_value(par, K, 1.0, 2.0, 0.0) == K * std::sqrt(2.0) / p);

    const auto m = log_J_moments(par, 1.5);
    const double EJp = std::exp(p * m.mean + p * p * m.var / 2);
    CHECK(liquidation_value(par, K, 1.5, 0.0, 3.0) == doctest::Approx(K / p * std::pow(3.0, p) * EJp).epsilon(1e-10));

    par.rho = 1.0 - 1e-12;
    const auto m1 = log_J_moments(par, 1.0);
    CHECK(m1.var < 1e-12);
    CHECK(liquidation_value(par, K, 1.0, 1.0, 2.0) ==
          doctest::Approx(K / p * std::pow(1.0 + 2.0 * std::exp(m1.mean), p)).epsilon(1e-9));
}

TEST_CASE("liquidation value is monotone") {
    const auto par = example_params();
    double prev = 0.0;
    for (double x : {0.0, 0.5, 1.0, 4.0}) {
        const double v = liquidation_value(par, 1.0, 1.0, x, 1.0);
        CHECK(v > prev);
        prev = v;
    }
    prev = liquidation_value(par, 1.0, 1.0, 1.0, 0.0);
    for (double y : {0.5, 1.0, 4.0}) {
        const double v = liquidation_value(par, 1.0, 1.0, 1.0, y);
        CHECK(v > prev);
        prev = v;
    }
    CHECK(liquidation_value(par, 2.0, 1.0, 1.0, 1.0) > liquidation_value(par, 1.0, 1.0, 1.0, 1.0));
}

TEST_CASE("liquidation value against plain sampling") {
    const auto par = example_params();
    const double K = 0.8, t = 1.0, x = 1.0, y = 1.0;
    const auto m = log_J_moments(par, t);
    std::mt19937_64 gen(5);
    std::normal_distribution<double> n01;
    const int n = 1000000;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = K / par.p * std::pow(x + y * std::exp(m.mean + std::sqrt(m.var) * n01(gen)), par.p);
        s1 += v;
        s2 += v * v;
    }
    const double mean = s1 / n, se = std::sqrt((s2 / n - mean * mean) / n);
    CHECK(std::abs(liquidation_value(par, K, t, x, y) - mean) < 3 * se);
}

TEST_CASE("unstable quadrature is reported") {
    auto par = example_params();
    par.sigma_I = 1.0;
    par.rho = 0.0;
    CHECK(throws_code(ErrorCode::QuadratureUnstable, [&] { liquidation_value(par, 1.0, 20.0, 0.01, 1.0, 2); }));
    CHECK(throws_code(ErrorCode::InvalidArgument, [&] { liquidation_value(par, 1.0, 1.0, -1.0, 1.0); }));
}

TEST_CASE("infinite horizon merton constant solves its algebraic equation") {
    for (double beta : {1.0, 2.0, 3.0})
        for (double p : {0.3, 0.5, 0.7}) {
            const double b = 0.2, s = 0.3, th2 = (b / s) * (b / s);
            // beta K/p = (1-p)/p K^{p/(p-1)} + theta^2 K / (2(1-p))
            auto g = [&](double K) {
                return beta * K / p - (1 - p) / p * std::pow(K, p / (p - 1)) - th2 * K / (2 * (1 - p));
            };
            const double K = oracle::bisect(g, 1e-6, 1e6);
            CHECK(merton_infinite_constant(beta, b, s, p) == doctest::Approx(K).epsilon(1e-9));
        }
    CHECK(throws_code(ErrorCode::DiscountTooSmall, [] { merton_infinite_constant(0.01, 0.3, 0.2, 0.5); }));
}

TEST_CASE("forced liquid-only fixed point reproduces the merton constant") {
    const auto par = example_params();
    KvOptions opt;
    opt.force_alpha_zero = true;
    opt.n_y = 200;
    opt.n_t = 400;
    const auto res = kv_fixed_point(par, opt);
    CHECK(res.converged);
    CHECK(res.truncation_factor < 1e-4);
    CHECK(res.alpha0 == 0.0);
    const double K = merton_infinite_constant(par.beta, par.b_L, par.sigma_L, par.p);
    CHECK(std::abs(res.K / K - 1.0) <= 1e-3);
    // the iterates approach their limit monotonically
    for (std::size_t i = 1; i < res.trace.size(); ++i)
        CHECK(std::abs(res.trace[i].K - res.K) <= std::abs(res.trace[i - 1].K - res.K) + 1e-12);
}

TEST_CASE("iteration budget exhaustion keeps the trace") {
    const auto par = example_params();
    KvOptions opt;
    opt.force_alpha_zero = true;
    opt.n_y = 100;
    opt.n_t = 50;
    opt.max_iter = 2;
    KvResult partial;
    CHECK(throws_code(ErrorCode::NoConvergence, [&] { kv_fixed_point(par, opt, &partial); }));
    CHECK(partial.trace.size() == 2);
}

TEST_CASE("better illiquid drift cannot lower the one-step value") {
    KvOptions opt;
    opt.n_y = 120;
    opt.n_t = 40;
    opt.richardson = false;
    opt.T_trunc = 6.0;
    auto par = example_params();
    double prev = -1.0;
    for (double bI : {0.05, 0.1, 0.2}) {
        par.b_I = bI;
        const double v = kv_objective(par, 0.8, 0.5, opt);
        CHECK(v >= prev);
        prev = v;
    }
}

#include <doctest.h>

#include <cmath>
#include <numeric>

#include "dualhjb/simulate.hpp"
#include "oracles.hpp"

using namespace dualhjb;

namespace {

const auto kMarket = MarketModel::constant(0.3, 0.5, 1.0);

SimConfig small(std::size_t n = 20000, double dt = 1e-2) {
    SimConfig c;
    c.n_paths = n;
    c.dt_sim = dt;
    c.seed = 7;
    return c;
}

// Value of c = gc x / B(t), pi = gp 2.4 x for the merton case (a_T given), by Simpson in t.
double perturbed_value(const oracle::Merton& m, double gc, double gp, double x0) {
    const double pf = gp * m.fraction();
    const int n = 2000;
    const double h = m.T / n;
    auto log_drift = [&](double s) { return m.b * pf - gc / m.B(s) - 0.5 * m.sigma * m.sigma * pf * pf; };
    // cumulative integral of log_drift by trapezoid on a fine grid
    std::vector<double> I(n + 1, 0.0);
    for (int k = 1; k <= n; ++k) I[k] = I[k - 1] + 0.5 * h * (log_drift((k - 1) * h) + log_drift(k * h));
    const double p = m.p;
    auto moment = [&](int k) {
        const double t = k * h;
        return std::pow(x0, p) * std::exp(p * I[k] + 0.5 * p * p * m.sigma * m.sigma * pf * pf * t);
    };
    auto run = [&](int k) {
        const double t = k * h;
        if (k == n && m.a_T == 0.0) return 0.0;
        return std::pow(gc / m.B(t), p) * moment(k) / p;
    };
    double s = run(0) + run(n);
    for (int k = 1; k < n; ++k) s += (k % 2 ? 4.0 : 2.0) * run(k);
    return s * h / 3.0 + m.a_T * moment(n) / p;
}

Policy merton_policy(const oracle::Merton& m, double gc = 1.0, double gp = 1.0) {
    return [m, gc, gp](double t, double x) { return std::pair{gc * x / m.B(t), gp * m.fraction() * x}; };
}

}  // namespace

TEST_CASE("zero initial wealth is absorbed") {
    const auto u = power_utility(0.5, 1.0, 0.0, 1.0);
    const std::vector<Policy> pol = {[](double, double x) { return std::pair{x, 2.0 * x}; }};
    const auto r = simulate_policies(0.0, 0.0, pol, kMarket, u, small(1000))[0];
    CHECK(r.estimate == 0.0);
    CHECK(r.n_absorbed == r.n_paths);
}

TEST_CASE("zero policy keeps wealth constant") {
    const auto u = power_utility(0.5, 1.0, 0.0, 1.0);
    const std::vector<Policy> pol = {[](double, double) { return std::pair{0.0, 0.0}; }};
    const auto r = simulate_policies(0.0, 2.25, pol, kMarket, u, small(1000))[0];
    CHECK(r.estimate == u.u2(2.25));
    CHECK(r.std_error == 0.0);
}

TEST_CASE("closed-form policy values match simulation") {
    oracle::Merton m;
    m.a_T = 1.0;
    const auto u = power_utility(0.5, 1.0, 0.0, 1.0);
    const std::vector<Policy> pols = {merton_policy(m), merton_policy(m, 0.5, 1.0), merton_policy(m, 1.0, 0.0)};
    const auto rep = simulate_policies(0.0, 1.0, pols, kMarket, u, small(40000, 1e-3));
    CHECK(std::abs(rep[0].estimate - m.V(0.0, 1.0)) <= 3.0 * rep[0].std_error);
    const double v_half = perturbed_value(m, 0.5, 1.0, 1.0);
    CHECK(perturbed_value(m, 1.0, 1.0, 1.0) == doctest::Approx(m.V(0.0, 1.0)).epsilon(1e-6));
    CHECK(std::abs(rep[1].estimate - v_half) <= 3.0 * rep[1].std_error);
    CHECK(rep[1].estimate < m.V(0.0, 1.0) - 2.0 * rep[1].std_error);
    CHECK(rep[2].estimate <= m.V(0.0, 1.0) + 2.0 * rep[2].std_error);
}

TEST_CASE("determinism across runs and thread counts") {
    oracle::Merton m;
    m.a_T = 1.0;
    const auto u = power_utility(0.5, 1.0, 0.0, 1.0);
    const std::vector<Policy> pol = {merton_policy(m)};
    auto c1 = small(4000);
    c1.threads = 1;
    auto c4 = c1;
    c4.threads = 4;
    const auto a = simulate_policies(0.0, 1.0, pol, kMarket, u, c1)[0];
    const auto b = simulate_policies(0.0, 1.0, pol, kMarket, u, c1)[0];
    const auto c = simulate_policies(0.0, 1.0, pol, kMarket, u, c4)[0];
    CHECK(a.estimate == b.estimate);
    CHECK(a.std_error == b.std_error);
    CHECK(a.estimate == c.estimate);
    CHECK(a.std_error == c.std_error);
    auto other = c1;
    other.seed = 8;
    CHECK(simulate_policies(0.0, 1.0, pol, kMarket, u, other)[0].estimate != a.estimate);
}

TEST_CASE("standard error scales with the path count") {
    oracle::Merton m;
    const auto u = power_utility(0.5, 1.0, 0.0, 0.0);
    const std::vector<Policy> pol = {merton_policy(m, 1.0, 1.5)};
    const auto a = simulate_policies(0.0, 1.0, pol, kMarket, u, small(5000))[0];
    const auto b = simulate_policies(0.0, 1.0, pol, kMarket, u, small(20000))[0];
    CHECK(b.std_error / a.std_error == doctest::Approx(0.5).epsilon(0.2));
}

TEST_CASE("absorption keeps traced wealth nonnegative") {
    const auto u = power_utility(0.5, 1.0, 0.0, 1.0);
    const std::vector<Policy> pol = {[](double, double x) { return std::pair{0.5 * x, 40.0 * x}; }};
    std::vector<TraceRow> trace;
    const auto r = simulate_policies(0.0, 1.0, pol, kMarket, u, small(2000, 1.0 / 16), &trace, {50, 1})[0];
    CHECK(r.n_absorbed > 0);
    CHECK(r.n_absorbed <= r.n_paths);
    REQUIRE_FALSE(trace.empty());
    for (const auto& row : trace) CHECK(row.X >= 0.0);
}

TEST_CASE("configuration and policy errors") {
    const auto u = power_utility(0.5, 1.0, 0.0, 1.0);
    const std::vector<Policy> pol = {[](double, double x) { return std::pair{x, x}; }};
    auto c = small(1000);
    c.budget = 1e3;
    CHECK_THROWS_AS(simulate_policies(0.0, 1.0, pol, kMarket, u, c), Error);
    c = small(1000, 0.1);
    CHECK_THROWS_AS(simulate_policies(0.0, 1.0, pol, kMarket, u, c), Error);
    c = small(50);
    CHECK_THROWS_AS(simulate_policies(0.0, 1.0, pol, kMarket, u, c), Error);
    const std::vector<Policy> bad = {[](double t, double x) {
        return std::pair{t > 0.5 ? std::nan("") : x, x};
    }};
    try {
        simulate_policies(0.0, 1.0, bad, kMarket, u, small(1000));
        FAIL("expected NaNPath");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NaNPath);
    }
}

TEST_CASE("dual state without control is a martingale") {
    const auto b = make_bundle(power_utility(0.5, 0.0, 0.0, 1.0), 1.0);
    const auto r = simulate_dual_state(0.0, 1.5, [](double, double) { return 0.0; }, kMarket, b, small(20000));
    CHECK(r.n_rejected == 0);
    CHECK(std::abs(r.mean_terminal_wealth - 1.5) < 0.05);
}

TEST_CASE("dual state with proportional control") {
    // u = y: log Y_T has drift -1 - theta^2/2, so E[1/Y_T] = e^{1 + theta^2} / y0
    const auto b = make_bundle(power_utility(0.5, 0.0, 0.0, 1.0), 1.0);
    const double y0 = 2.0;
    const auto r = simulate_dual_state(0.0, y0, [](double, double y) { return y; }, kMarket, b, small(40000, 1e-3));
    const double exact = std::exp(1.0 + 0.36) / y0;
    CHECK(std::abs(r.estimate - exact) <= 2.0 * r.std_error + 2e-3 * exact);
}

TEST_CASE("dual value is a lower bound for any dual control") {
    oracle::Merton m;
    const auto u = power_utility(0.5, 1.0, 0.0, 0.0);
    const auto b = make_bundle(u, 1.0);
    for (double alpha : {0.0, 0.5, 1.0, 2.0}) {
        const auto r = simulate_dual_state(0.0, 1.0, [alpha](double, double y) { return alpha * y; }, kMarket, b,
                                           small(20000, 1e-2));
        CHECK(r.estimate >= m.W(0.0, 1.0) - 2.0 * r.std_error - 1e-2 * m.W(0.0, 1.0));
    }
}

TEST_CASE("excessive rejection is reported") {
    const auto b = make_bundle(power_utility(0.5, 0.0, 0.0, 1.0), 1.0);
    try {
        simulate_dual_state(0.0, 0.01, [](double, double) { return 5.0; }, kMarket, b, small(1000));
        FAIL("expected ExcessiveRejection");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ExcessiveRejection);
    }
}

TEST_CASE("paired supermartingale inequality") {
    oracle::Merton m;
    const auto r = paired_supermartingale(0.0, 1.0, 0.8, merton_policy(m), [](double, double y) { return 0.3 * y; },
                                          kMarket, small(20000, 1e-2));
    CHECK(r.passed());
    CHECK(r.bound == doctest::Approx(0.8));
}

TEST_CASE("random horizon estimators agree") {
    oracle::Merton m;
    m.a_T = 1.0;
    const Field2 G1 = [](double, double c) { return 2.0 * std::sqrt(c); };
    const Field2 G2 = [](double, double x) { return 2.0 * std::sqrt(x); };
    const auto r = random_horizon_mc(1.0, merton_policy(m), kMarket, G1, G2, exponential_law(0.5), small(10000, 1e-3));
    CHECK(r.agree());
    CHECK(r.direct.n_paths == 10000);
}

TEST_CASE("exponential law") {
    const auto law = exponential_law(0.5);
    CHECK(1.0 - law.F(1.0) == doctest::Approx(0.60653).epsilon(1e-5));
    CHECK(law.density(1.0) == doctest::Approx(0.30327).epsilon(1e-4));
    CHECK(law.quantile(law.F(0.7)) == doctest::Approx(0.7));
}

TEST_CASE("pairwise summation") {
    std::vector<double> v(1000001, 0.1);
    const double s = pairwise_sum(v);
    CHECK(std::abs(s - 100000.1) < 1e-8);
    std::vector<double> ints(1000);
    std::iota(ints.begin(), ints.end(), 1.0);
    CHECK(pairwise_sum(ints) == 500500.0);
}

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dualhjb/checks.hpp"
#include "dualhjb/dual_solver.hpp"
#include "oracles.hpp"

using namespace dualhjb;

namespace {

const auto kMarket = MarketModel::constant(0.3, 0.5, 1.0);

double max_rel_error(const DualSolution& d, const oracle::Merton& m, double t_max) {
    double worst = 0.0;
    for (std::size_t n = 0; n < d.n_slices(); ++n) {
        const double t = d.grid.t(n);
        if (t > t_max + 1e-12) continue;
        for (std::size_t j = 0; j < d.y.size(); ++j) {
            if (d.y[j] < 0.2 || d.y[j] > 5.0) continue;
            const double ex = m.W(t, d.y[j]);
            worst = std::max(worst, std::abs(d.W[n][j] - ex) / ex);
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("log grid nodes") {
    const auto g = LogGrid::make(1e-3, 1e3, 400, 200, 1.0);
    const auto y = g.nodes();
    CHECK(y.front() == doctest::Approx(1e-3).epsilon(1e-14));
    CHECK(std::abs(y.back() / 1e3 - 1.0) < 1e-12);
    for (std::size_t j = 1; j < y.size(); ++j) CHECK(y[j] > y[j - 1]);
    CHECK(g.dt() == doctest::Approx(0.005));
    CHECK_THROWS_AS(LogGrid::make(1e-3, 1e3, 8, 200, 1.0), Error);
    CHECK_THROWS_AS(LogGrid::make(1.0, 0.5, 400, 200, 1.0), Error);
}

TEST_CASE("clamp gradient") {
    CHECK(clamp_gradient(0.5, 1, 10) == 1);
    CHECK(clamp_gradient(5, 1, 10) == 5);
    CHECK(clamp_gradient(50, 1, 10) == 10);
    for (double q : {0.1, 3.0, 99.0}) CHECK(clamp_gradient(clamp_gradient(q, 1, 10), 1, 10) == clamp_gradient(q, 1, 10));
}

TEST_CASE("terminal slice") {
    const auto g = LogGrid::make(0.25, 2.0, 16, 8, 1.0);
    const auto b = make_bundle(power_utility(0.5, 0.0, 0.0, 1.0), 1.0);
    const auto s = terminal_slice(g, b);
    CHECK(s.front() == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(s.back() == doctest::Approx(0.5).epsilon(1e-12));
    const auto z = terminal_slice(g, make_bundle(zero_utility(), 1.0));
    CHECK(std::all_of(z.begin(), z.end(), [](double v) { return v == 0.0; }));
    const auto wide = LogGrid::make(1e-14, 1.0, 64, 8, 1.0);
    CHECK_THROWS_AS(terminal_slice(wide, b), Error);
}

TEST_CASE("single implicit step of pure diffusion") {
    // U1 = 0, U2 = 2 sqrt(x): W = e^{theta^2 (T - t)} / y with theta = 0.6.
    const auto g = LogGrid::make(1e-3, 1e3, 801, 8, 0.08);
    const auto b = make_bundle(power_utility(0.5, 0.0, 0.0, 1.0), g.T);
    const auto m = MarketModel::constant(0.3, 0.5, g.T);
    const auto W_T = terminal_slice(g, b);
    const auto step = step_backward(W_T, g.T - g.dt(), g, b, m);
    const auto y = g.nodes();
    const std::size_t j = 400;  // y = 1
    CHECK(y[j] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(step.slice[j] == doctest::Approx(1.003606).epsilon(1e-5));
}

TEST_CASE("zero data gives the zero solution") {
    const auto g = LogGrid::make(1e-3, 1e3, 100, 20, 1.0);
    const auto d = solve_dual(kMarket, zero_utility(), g);
    for (const auto& s : d.W) CHECK(std::all_of(s.begin(), s.end(), [](double v) { return v == 0.0; }));
    const auto b = make_bundle(zero_utility(), 1.0);
    const std::vector<double> zero(100, 0.0);
    const auto step = step_backward(zero, 0.5, g, b, kMarket);
    CHECK(std::all_of(step.slice.begin(), step.slice.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("merton consumption case on 400x200") {
    oracle::Merton m;
    const auto d = solve_dual(kMarket, power_utility(0.5, 1.0, 0.0, 0.0), LogGrid::make(1e-3, 1e3, 400, 200, 1.0));
    CHECK(m.W(0.0, 1.0) == doctest::Approx(1.203694).epsilon(1e-6));
    CHECK(max_rel_error(d, m, 0.9) <= 5e-3);
    const auto b = make_bundle(power_utility(0.5, 1.0, 0.0, 0.0), 1.0);
    CHECK(all_passed(dual_invariants(d, b)));
}

TEST_CASE("boundary fit reproduces a power law") {
    const auto g = LogGrid::make(1e-3, 1e3, 400, 200, 1.0);
    const auto y = g.nodes();
    std::vector<double> w(y.size());
    const double A = 1.7;
    for (std::size_t j = 0; j < y.size(); ++j) w[j] = A / y[j];
    const auto fit = boundary_values(w, g, 0.5);
    CHECK(fit.left == doctest::Approx(A / y.front()).epsilon(1e-6));
    CHECK(fit.right == doctest::Approx(A / y.back()).epsilon(1e-6));
    const std::vector<double> zero(y.size(), 0.0);
    const auto z = boundary_values(zero, g, 0.5);
    CHECK(z.left == 0.0);
    CHECK(z.right == 0.0);
}

TEST_CASE("doubling y_max barely moves the interior") {
    const auto u = power_utility(0.5, 1.0, 0.0, 0.0);
    const double h = std::log(1e6) / 399.0;
    const auto a = solve_dual(kMarket, u, LogGrid::make(1e-3, 1e3, 400, 100, 1.0));
    const std::size_t extra = static_cast<std::size_t>(std::round(std::log(2.0) / h));
    const auto b = solve_dual(kMarket, u, LogGrid::make(1e-3, 1e-3 * std::exp(h * (399 + extra)), 400 + extra, 100, 1.0));
    double worst = 0.0;
    for (std::size_t j = 0; j < a.y.size(); ++j) {
        if (a.y[j] < 0.2 || a.y[j] > 5.0) continue;
        worst = std::max(worst, std::abs(a.W[0][j] - b.W[0][j]) / a.W[0][j]);
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("wealth utility invariants") {
    const auto u = power_utility(0.5, 1.0, 1.0, 1.0);
    const auto b = make_bundle(u, 1.0);
    const auto d = solve_dual(kMarket, b, LogGrid::make(1e-3, 1e3, 400, 200, 1.0));
    for (const auto& c : dual_invariants(d, b)) {
        INFO(c.name << " " << c.value << " " << c.detail);
        CHECK(c.passed);
    }
    CHECK(d.diagnostics.min_clamp_inactive >= 0.99);
    // W = C(t)/y exactly, with C solving a Riccati-type ODE
    const double C0 = oracle::wealth_C0(0.3, 0.5, 1.0);
    CHECK(d.W[0][200] * d.y[200] == doctest::Approx(C0).epsilon(1e-2));
}

TEST_CASE("time variable market") {
    const auto m = MarketModel::piecewise_linear({{0.0, 0.2}, {1.0, 0.4}}, {{0.0, 0.5}, {1.0, 0.4}}, 1.0);
    const auto u = power_utility(0.5, 1.0, 1.0, 1.0);
    const auto b = make_bundle(u, 1.0);
    const auto d = solve_dual(m, b, LogGrid::make(1e-3, 1e3, 300, 100, 1.0));
    CHECK(all_passed(dual_invariants(d, b)));
}

TEST_CASE("fixed point budget exhaustion is reported") {
    const auto g = LogGrid::make(1e-3, 1e3, 200, 10, 1.0);
    const auto b = make_bundle(power_utility(0.5, 1.0, 1.0, 1.0), 1.0);
    StepOptions opt;
    opt.max_iterations = 1;
    CHECK_THROWS_AS(step_backward(terminal_slice(g, b), 0.9, g, b, kMarket, opt), Error);
}

TEST_CASE("truncation sensitivity is small for the default grid") {
    const auto b = make_bundle(power_utility(0.5, 1.0, 0.0, 0.0), 1.0);
    CHECK(truncation_sensitivity(kMarket, b, LogGrid::make(1e-3, 1e3, 400, 50, 1.0)) < 0.01);
}

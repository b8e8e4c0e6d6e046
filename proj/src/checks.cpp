#include "dualhjb/checks.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dualhjb/legendre.hpp"

namespace dualhjb {

namespace {

Check make_check(std::string name, double value, double threshold, bool passed, std::string detail = {}) {
    return {std::move(name), passed, value, threshold, std::move(detail)};
}

std::string where(double t, double s) {
    std::ostringstream os;
    os << "worst at t=" << t << ", " << s;
    return os.str();
}

}  // namespace

bool all_passed(const std::vector<Check>& checks) {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

std::vector<Check> dual_invariants(const DualSolution& dual, const ConjugateBundle& bundle, double tol) {
    const std::size_t S = dual.W.size();
    const std::size_t N = dual.y.size();
    const double q = dual.p / (1.0 - dual.p);
    double max_wy = -std::numeric_limits<double>::infinity();
    double min_wyy = std::numeric_limits<double>::infinity();
    double min_w = std::numeric_limits<double>::infinity();
    double worst_time = 0.0, worst_jensen = 0.0, growth = 0.0;
    std::vector<double> u2(N);
    for (std::size_t j = 0; j < N; ++j) u2[j] = bundle.zero_terminal ? 0.0 : bundle.U2_tilde(dual.y[j]);
    for (std::size_t n = 0; n < S; ++n) {
        const auto& w = dual.W[n];
        // the terminal slice is exempt from strict signs when it vanishes
        const bool strict = !(n + 1 == S && bundle.zero_terminal);
        for (std::size_t j = 1; j + 1 < N; ++j) {
            const double scale = std::max(1.0, std::abs(w[j]));
            if (strict) {
                max_wy = std::max(max_wy, dual.W_y[n][j]);
                min_wyy = std::min(min_wyy, dual.W_yy[n][j]);
            }
            min_w = std::min(min_w, w[j]);
            if (n + 1 < S) worst_time = std::max(worst_time, (dual.W[n + 1][j] - w[j]) / scale);
            worst_jensen = std::max(worst_jensen, (u2[j] - w[j]) / scale);
            growth = std::max(growth, w[j] / (1.0 + std::pow(dual.y[j], -q)));
        }
    }
    std::vector<Check> out;
    out.push_back(make_check("dual_gradient_negative", max_wy, 0.0, max_wy < 0.0));
    out.push_back(make_check("dual_curvature_positive", min_wyy, 0.0, min_wyy > 0.0));
    out.push_back(make_check("dual_nonnegative", min_w, -tol, min_w >= -tol));
    out.push_back(make_check("dual_time_monotone", worst_time, tol, worst_time <= tol));
    out.push_back(make_check("dual_jensen_bound", worst_jensen, tol, worst_jensen <= tol));
    out.push_back(make_check("dual_growth_bound", growth, dual.diagnostics.growth_constant * (1.0 + 1e-12),
                             std::isfinite(growth) && growth <= dual.diagnostics.growth_constant * (1.0 + 1e-12)));
    out.push_back(make_check("dual_clamp_inactive", dual.diagnostics.min_clamp_inactive, 0.99,
                             dual.diagnostics.min_clamp_inactive >= 0.99));
    return out;
}

Check gap_check(const PrimalSolution& primal) {
    double worst = 0.0;  // max excess beyond the band, in units of the band edge
    double lo = 0.0, hi_ratio = 0.0;
    std::string detail;
    for (std::size_t n = 0; n < primal.n_slices(); ++n) {
        if (!primal.slice_valid[n]) continue;
        for (std::size_t i = 0; i < primal.x.size(); ++i) {
            const double g = primal.gap[n][i];
            const double tol = primal.gap_tol[n][i];
            lo = std::min(lo, g);
            if (tol > 0.0 && g / tol > hi_ratio) {
                hi_ratio = g / tol;
                detail = where(primal.t[n], primal.x[i]);
            }
            if (g < -1e-8 || g > tol + 1e-15) worst = std::max(worst, 1.0);
        }
    }
    return make_check("duality_gap_band", hi_ratio, 1.0, worst == 0.0,
                      "min gap " + std::to_string(lo) + "; max gap/tol " + std::to_string(hi_ratio) + "; " + detail);
}

Check primal_shape_check(const PrimalSolution& primal) {
    std::size_t bad = 0, total = 0;
    for (std::size_t n = 0; n < primal.n_slices(); ++n) {
        if (!primal.slice_valid[n]) continue;
        const auto& v = primal.V[n];
        for (std::size_t i = 1; i + 1 < primal.x.size(); ++i) {
            ++total;
            const double x0 = primal.x[i - 1], x1 = primal.x[i], x2 = primal.x[i + 1];
            const double s1 = (v[i] - v[i - 1]) / (x1 - x0);
            const double s2 = (v[i + 1] - v[i]) / (x2 - x1);
            const double scale = 1e-10 * std::max(1.0, std::abs(s1));
            if (!(primal.V_x[n][i] > 0.0) || !(primal.V_xx[n][i] < 0.0) || s1 < 0.0 || s2 > s1 + scale) ++bad;
        }
    }
    return make_check("primal_concave_increasing", static_cast<double>(bad), 0.0, bad == 0,
                      std::to_string(bad) + " of " + std::to_string(total) + " interior nodes violate");
}

Check involution_check(const PrimalSolution& primal, const DualSolution& dual, double y_lo, double y_hi) {
    const double h_xi = dual.grid.dxi();
    const double h_s = std::log(primal.x[1] / primal.x[0]);
    double worst_ratio = 0.0, worst_err = 0.0;
    std::string detail;
    for (std::size_t n = 0; n < primal.n_slices(); ++n) {
        if (!primal.slice_valid[n]) continue;
        std::vector<double> ys;
        std::vector<std::size_t> js;
        for (std::size_t j = 1; j + 1 < dual.y.size(); ++j)
            if (dual.y[j] >= y_lo && dual.y[j] <= y_hi) {
                ys.push_back(dual.y[j]);
                js.push_back(j);
            }
        const auto tr = sup_transform(primal.x, primal.V[n], ys, true);
        for (std::size_t k = 0; k < ys.size(); ++k) {
            const std::size_t j = js[k];
            const double y = dual.y[j];
            const double err = std::abs(tr.value[k] - dual.W[n][j]);
            if (tr.at_boundary[k]) {
                worst_ratio = std::max(worst_ratio, 1e300);
                detail = "maximizer on the x-grid boundary at " + where(primal.t[n], y);
                continue;
            }
            const double xs = tr.argument[k];
            const double tol = 0.125 * y * y * dual.W_yy[n][j] * h_xi * h_xi +
                               0.125 * xs * xs / (y * y * dual.W_yy[n][j]) * h_s * h_s;
            const double ratio = err / tol;
            worst_err = std::max(worst_err, err);
            if (ratio > worst_ratio) {
                worst_ratio = ratio;
                detail = where(primal.t[n], y) + ", err " + std::to_string(err) + ", tol " + std::to_string(tol);
            }
        }
    }
    return make_check("legendre_involution", worst_ratio, 2.0, worst_ratio <= 2.0, detail);
}

Check merton_dual_check(const DualSolution& dual, const MertonCase& m, double y_lo, double y_hi, double t_max,
                        double tol) {
    double worst = 0.0;
    std::string detail;
    for (std::size_t n = 0; n < dual.W.size(); ++n) {
        const double t = dual.grid.t(n);
        if (t > t_max + 1e-12) continue;
        for (std::size_t j = 0; j < dual.y.size(); ++j) {
            const double y = dual.y[j];
            if (y < y_lo || y > y_hi) continue;
            const double exact = m.W(t, y);
            const double err = std::abs(dual.W[n][j] - exact) / exact;
            if (err > worst) {
                worst = err;
                detail = where(t, y);
            }
        }
    }
    return make_check("merton_dual_error", worst, tol, worst <= tol, detail);
}

Check merton_value_check(const PrimalSolution& primal, const MertonCase& m, double x_lo, double x_hi, double tol) {
    double worst = 0.0;
    std::string detail;
    for (std::size_t n = 0; n + 1 < primal.n_slices(); ++n) {
        if (!primal.slice_valid[n]) continue;
        for (std::size_t i = 0; i < primal.x.size(); ++i) {
            const double x = primal.x[i];
            if (x < x_lo || x > x_hi) continue;
            const double exact = m.V(primal.t[n], x);
            const double err = std::abs(primal.V[n][i] - exact) / exact;
            if (err > worst) {
                worst = err;
                detail = where(primal.t[n], x);
            }
        }
    }
    return make_check("merton_value_error", worst, tol, worst <= tol, detail);
}

Check merton_fraction_check(const PrimalSolution& primal, const MertonCase& m, double x_lo, double x_hi,
                            double tol) {
    const double target = m.fraction();
    double worst = 0.0;
    std::string detail;
    for (std::size_t n = 0; n + 1 < primal.n_slices(); ++n) {
        if (!primal.slice_valid[n]) continue;
        for (std::size_t i = 1; i + 1 < primal.x.size(); ++i) {
            const double x = primal.x[i];
            if (x < x_lo || x > x_hi) continue;
            const double err = std::abs(primal.Pi[n][i] / x - target) / target;
            if (err > worst) {
                worst = err;
                detail = where(primal.t[n], x);
            }
        }
    }
    return make_check("merton_fraction_error", worst, tol, worst <= tol, detail);
}

}  // namespace dualhjb

namespace dualhjb {

namespace {

double oracle_error(const std::vector<double>& y, const std::vector<double>& W0, const MertonCase& m) {
    double worst = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) {
        if (y[j] < 0.2 || y[j] > 5.0) continue;
        const double exact = m.W(0.0, y[j]);
        worst = std::max(worst, std::abs(W0[j] - exact) / exact);
    }
    return worst;
}

void fill_orders(OrderStudy& s) {
    for (std::size_t k = 1; k < s.errors.size(); ++k) s.orders.push_back(std::log2(s.errors[k - 1] / s.errors[k]));
}

}  // namespace

OrderStudy temporal_order_study(const MertonCase& m, std::size_t n_y, const std::vector<std::size_t>& n_t) {
    const auto market = MarketModel::constant(m.b, m.sigma, m.T);
    const auto u = power_utility(m.p, m.a_c, 0.0, m.a_T);
    OrderStudy s;
    for (std::size_t nt : n_t) {
        const auto d = solve_dual(market, u, LogGrid::make(1e-3, 1e3, n_y, nt, m.T));
        s.levels.push_back(nt);
        s.errors.push_back(oracle_error(d.y, d.W[0], m));
    }
    fill_orders(s);
    return s;
}

OrderStudy spatial_order_study(const MertonCase& m, const std::vector<std::size_t>& intervals, std::size_t n_t) {
    const auto market = MarketModel::constant(m.b, m.sigma, m.T);
    const auto u = power_utility(m.p, m.a_c, 0.0, m.a_T);
    const auto bundle = make_bundle(u, m.T);
    OrderStudy s;
    for (std::size_t n : intervals) {
        const auto coarse = solve_dual(market, bundle, LogGrid::make(1e-3, 1e3, n + 1, n_t / 2, m.T));
        const auto fine = solve_dual(market, bundle, LogGrid::make(1e-3, 1e3, n + 1, n_t, m.T));
        std::vector<double> w0(fine.y.size());
        for (std::size_t j = 0; j < w0.size(); ++j) w0[j] = 2.0 * fine.W[0][j] - coarse.W[0][j];
        s.levels.push_back(n);
        s.errors.push_back(oracle_error(fine.y, w0, m));
    }
    fill_orders(s);
    return s;
}

Check order_check(const std::string& name, const OrderStudy& study, double target, double tol) {
    double worst = 0.0;
    std::ostringstream os;
    os << "orders";
    for (double o : study.orders) {
        worst = std::max(worst, std::abs(o - target));
        os << ' ' << o;
    }
    const bool ok = !study.orders.empty() && worst <= tol;
    return make_check(name, worst, tol, ok, os.str());
}

}  // namespace dualhjb

#include "dualhjb/primal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <math.h>  // boost 1.74 pchip calls isnan unqualified

#include <boost/math/interpolators/pchip.hpp>

#include "dualhjb/legendre.hpp"
#include "dualhjb/transforms.hpp"

namespace dualhjb {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool slice_has_gradient(const DualSolution& dual, std::size_t n) {
    const auto& wy = dual.W_y[n];
    for (std::size_t j = 1; j + 1 < wy.size(); ++j)
        if (!(wy[j] < 0.0)) return false;
    return true;
}

/// Monotone inverse of y -> W_y(t_n, y) on the interior nodes. log(-W_y)
/// and log(W_yy) are interpolated in xi = log y, which is exact for the
/// power-law tails.
class SliceInverse {
public:
    SliceInverse(const DualSolution& dual, std::size_t n) : dual_(dual), n_(n) {
        if (!slice_has_gradient(dual, n))
            throw Error(ErrorCode::OutOfRange, "dual slice has no strictly negative gradient");
        const std::size_t N = dual.y.size();
        std::vector<double> xi, lg, lc;
        bool curv_positive = true;
        for (std::size_t j = 1; j + 1 < N; ++j) {
            xi.push_back(std::log(dual.y[j]));
            lg.push_back(std::log(-dual.W_y[n][j]));
            if (!(dual.W_yy[n][j] > 0.0)) curv_positive = false;
        }
        log_curv_ = curv_positive;
        for (std::size_t j = 1; j + 1 < N; ++j)
            lc.push_back(curv_positive ? std::log(dual.W_yy[n][j]) : dual.W_yy[n][j]);
        xi_ = xi;
        lg_ = lg;
        grad_.emplace(std::vector<double>(xi), std::vector<double>(lg));
        curv_.emplace(std::move(xi), std::move(lc));
    }

    double lo() const { return std::exp(lg_.back()); }
    double hi() const { return std::exp(lg_.front()); }

    /// xi* with W_y(e^{xi*}) = -x.
    double solve(double x) const {
        const double target = std::log(x);
        if (!(target <= lg_.front() && target >= lg_.back()))
            throw Error(ErrorCode::OutOfRange, "x = " + std::to_string(x) + " outside dual gradient range [" +
                                                   std::to_string(lo()) + ", " + std::to_string(hi()) + "]");
        // lg_ is decreasing; locate the bracketing cell, then bisect the interpolant.
        auto it = std::lower_bound(lg_.begin(), lg_.end(), target, std::greater<double>());
        std::size_t k = static_cast<std::size_t>(it - lg_.begin());
        if (k == 0) return xi_.front();
        double a = xi_[k - 1], b = xi_[k];
        const auto& g = *grad_;
        for (int i = 0; i < 80; ++i) {
            const double mid = 0.5 * (a + b);
            if (g(mid) > target)
                a = mid;
            else
                b = mid;
        }
        return 0.5 * (a + b);
    }

    double curvature(double xi) const {
        const double v = (*curv_)(xi);
        return log_curv_ ? std::exp(v) : v;
    }

    double time_derivative(double xi) const {
        const auto& y = dual_.y;
        const double h = dual_.grid.dxi();
        const double s = (xi - std::log(y.front())) / h;
        const std::size_t j = std::min(static_cast<std::size_t>(std::max(s, 0.0)), y.size() - 2);
        const double w = s - static_cast<double>(j);
        return (1.0 - w) * dual_.W_t[n_][j] + w * dual_.W_t[n_][j + 1];
    }

private:
    const DualSolution& dual_;
    std::size_t n_;
    std::vector<double> xi_;
    std::vector<double> lg_;
    bool log_curv_ = true;
    std::optional<boost::math::interpolators::pchip<std::vector<double>>> grad_;
    std::optional<boost::math::interpolators::pchip<std::vector<double>>> curv_;
};

/// max over the cells around node j of d^2/dxi^2 [W + x y] = y^2 W_yy + y W_y + x y.
double cell_curvature(const DualSolution& dual, std::size_t n, std::size_t j, double x) {
    const std::size_t lo = j > 0 ? j - 1 : 0;
    const std::size_t hi = std::min(j + 1, dual.y.size() - 1);
    double m = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) {
        const double y = dual.y[k];
        m = std::max(m, y * y * dual.W_yy[n][k] + y * dual.W_y[n][k] + x * y);
    }
    return m;
}

Derivatives derivatives_at(const SliceInverse& inv, double x) {
    const double xi = inv.solve(x);
    const double curv = inv.curvature(xi);
    return {std::exp(xi), -1.0 / curv, inv.time_derivative(xi)};
}

}  // namespace

double legendre_min(const DualSolution& dual, std::size_t n, double x) {
    if (n >= dual.W.size()) throw Error(ErrorCode::InvalidArgument, "slice index out of range");
    if (!(x > 0.0)) throw Error(ErrorCode::InvalidArgument, "legendre_min needs x > 0");
    const double xs[] = {x};
    const auto tr = inf_transform(dual.y, dual.W[n], xs, true);
    if (tr.at_boundary[0])
        throw Error(ErrorCode::ArgminAtBoundary,
                    "x = " + std::to_string(x) + " outside the reliable range of the dual grid");
    return tr.value[0];
}

Derivatives recover_derivatives(const DualSolution& dual, std::size_t n, double x) {
    if (n >= dual.W.size()) throw Error(ErrorCode::InvalidArgument, "slice index out of range");
    if (!(x > 0.0)) throw Error(ErrorCode::OutOfRange, "recover_derivatives needs x > 0");
    const SliceInverse inv(dual, n);
    return derivatives_at(inv, x);
}

double consumption_feedback(const UtilityModel& utility, const DualSolution& dual, std::size_t n, double x) {
    if (x < 0.0) throw Error(ErrorCode::InvalidArgument, "negative wealth");
    if (x == 0.0 || utility.regime == ConsumptionRegime::NoConsumption) return 0.0;
    const auto d = recover_derivatives(dual, n, x);
    return optimal_c(utility, dual.grid.t(n), d.V_x, x);
}

double portfolio_from_derivatives(double b, double sigma, double x, double V_x, double V_xx) {
    if (x == 0.0) return 0.0;
    if (!(std::abs(V_xx) >= 1e-12 * std::abs(V_x) / x))
        throw Error(ErrorCode::DegenerateCurvature, "V_xx ~ 0 at x = " + std::to_string(x));
    return -b * V_x / (sigma * sigma * V_xx);
}

double portfolio_feedback(const MarketModel& market, const DualSolution& dual, std::size_t n, double x) {
    if (x < 0.0) throw Error(ErrorCode::InvalidArgument, "negative wealth");
    if (x == 0.0) return 0.0;
    const auto d = recover_derivatives(dual, n, x);
    const double t = dual.grid.t(n);
    return portfolio_from_derivatives(market.b(t), market.sigma(t), x, d.V_x, d.V_xx);
}

std::pair<double, double> reliable_x_range(const DualSolution& dual, double shrink) {
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t n = 0; n < dual.W.size(); ++n) {
        if (!slice_has_gradient(dual, n)) continue;
        const auto& wy = dual.W_y[n];
        lo = std::max(lo, -wy[wy.size() - 2]);
        hi = std::min(hi, -wy[1]);
        any = true;
    }
    if (!any || !(hi > lo)) throw Error(ErrorCode::OutOfRange, "dual solution has no usable gradient range");
    return {lo * (1.0 + shrink), hi * (1.0 - shrink)};
}

PrimalSolution recover_primal(const DualSolution& dual, const MarketModel& market, const UtilityModel& utility,
                              const PrimalOptions& opt) {
    if (opt.n_x < 4) throw Error(ErrorCode::InvalidArgument, "n_x must be >= 4");
    const auto [x_lo, x_hi] = opt.x_range ? *opt.x_range : reliable_x_range(dual, opt.shrink);
    PrimalSolution out;
    out.p = dual.p;
    const std::size_t S = dual.W.size();
    const std::size_t M = opt.n_x;
    for (std::size_t n = 0; n < S; ++n) out.t.push_back(dual.grid.t(n));
    out.x.resize(M);
    const double ratio = std::log(x_hi / x_lo) / static_cast<double>(M - 1);
    for (std::size_t i = 0; i < M; ++i) out.x[i] = x_lo * std::exp(ratio * static_cast<double>(i));
    out.x.back() = x_hi;

    auto table = [&] { return std::vector<std::vector<double>>(S, std::vector<double>(M, kNaN)); };
    out.V = table();
    out.V_x = table();
    out.V_xx = table();
    out.V_t = table();
    out.C = table();
    out.Pi = table();
    out.gap = table();
    out.gap_tol = table();
    out.slice_valid.assign(S, false);

    const double h = dual.grid.dxi();
    for (std::size_t n = 0; n < S; ++n) {
        const double t = dual.grid.t(n);
        if (!slice_has_gradient(dual, n)) {
            // Degenerate slice (zero terminal data): V(T, .) = U2 directly.
            if (n + 1 == S)
                for (std::size_t i = 0; i < M; ++i) {
                    out.V[n][i] = utility.u2(out.x[i]);
                    out.V_x[n][i] = marginal_u2(utility, out.x[i]);
                }
            continue;
        }
        const auto tr = inf_transform(dual.y, dual.W[n], out.x, true);
        const SliceInverse inv(dual, n);
        const double b = market.b(t);
        const double s = market.sigma(t);
        for (std::size_t i = 0; i < M; ++i) {
            const double x = out.x[i];
            out.V[n][i] = tr.value[i];
            out.gap[n][i] = tr.discrete[i] - tr.value[i];
            const auto d = derivatives_at(inv, x);
            out.V_x[n][i] = d.V_x;
            out.V_xx[n][i] = d.V_xx;
            out.V_t[n][i] = d.V_t;
            out.gap_tol[n][i] = 0.125 * h * h * cell_curvature(dual, n, tr.index[i], x);
            out.C[n][i] = optimal_c(utility, t, d.V_x, x);
            out.Pi[n][i] = portfolio_from_derivatives(b, s, x, d.V_x, d.V_xx);
        }
        out.slice_valid[n] = true;
    }
    return out;
}

namespace {

struct Bracket1 {
    std::size_t i = 0;
    double w = 0.0;
};

Bracket1 locate_geometric(const std::vector<double>& x, double v) {
    const double step = std::log(x[1] / x[0]);
    const double s = std::log(v / x[0]) / step;
    std::size_t i = static_cast<std::size_t>(std::clamp(s, 0.0, static_cast<double>(x.size() - 2)));
    // guard the geometric index against rounding
    while (i > 0 && x[i] > v) --i;
    while (i + 2 < x.size() && x[i + 1] < v) ++i;
    return {i, (v - x[i]) / (x[i + 1] - x[i])};
}

Bracket1 locate_time(const std::vector<double>& t, double v) {
    const double dt = t[1] - t[0];
    const double s = (v - t[0]) / dt;
    const std::size_t n = static_cast<std::size_t>(std::clamp(s, 0.0, static_cast<double>(t.size() - 2)));
    return {n, std::clamp(s - static_cast<double>(n), 0.0, 1.0)};
}

}  // namespace

double PrimalSolution::value(double tv, double xv) const {
    if (xv <= 0.0) return 0.0;
    auto at_slice = [&](std::size_t n) {
        const auto& v = V[n];
        const auto& vx = V_x[n];
        if (xv <= x.front()) return v.front() * std::pow(xv / x.front(), p);
        if (xv >= x.back()) return v.back() * std::pow(xv / x.back(), p);
        const auto [i, w] = locate_geometric(x, xv);
        const double hx = x[i + 1] - x[i];
        const double w2 = w * w, w3 = w2 * w;
        return (2 * w3 - 3 * w2 + 1) * v[i] + (w3 - 2 * w2 + w) * hx * vx[i] + (-2 * w3 + 3 * w2) * v[i + 1] +
               (w3 - w2) * hx * vx[i + 1];
    };
    const auto [n, w] = locate_time(t, tv);
    if (w == 0.0) return at_slice(n);
    return (1.0 - w) * at_slice(n) + w * at_slice(n + 1);
}

std::pair<double, double> PrimalSolution::feedback(double tv, double xv) const {
    if (xv <= 0.0) return {0.0, 0.0};
    auto [n, w] = locate_time(t, tv);
    const bool left_ok = slice_valid[n];
    const bool right_ok = slice_valid[n + 1];
    if (!left_ok && !right_ok) throw Error(ErrorCode::NaNPath, "no valid feedback near t = " + std::to_string(tv));
    if (!left_ok) {
        ++n;
        w = 0.0;
    } else if (!right_ok) {
        w = 0.0;
    }
    // One spatial lookup shared by both time slices.
    std::size_t i = 0;
    double wx = 0.0, scale = 1.0;
    if (xv <= x.front()) {
        scale = xv / x.front();
    } else if (xv >= x.back()) {
        i = x.size() - 2;
        wx = 1.0;
        scale = xv / x.back();
    } else {
        const auto b = locate_geometric(x, xv);
        i = b.i;
        wx = b.w;
    }
    auto at_slice = [&](std::size_t k) -> std::pair<double, double> {
        const auto& c = C[k];
        const auto& pi = Pi[k];
        return {scale * ((1.0 - wx) * c[i] + wx * c[i + 1]), scale * ((1.0 - wx) * pi[i] + wx * pi[i + 1])};
    };
    const auto a = at_slice(n);
    if (w == 0.0) return a;
    const auto b = at_slice(n + 1);
    return {(1.0 - w) * a.first + w * b.first, (1.0 - w) * a.second + w * b.second};
}

ResidualReport primal_hjb_residual(const PrimalSolution& primal, const MarketModel& market,
                                   const UtilityModel& utility) {
    ResidualReport rep;
    const std::size_t S = primal.n_slices();
    const std::size_t M = primal.x.size();
    rep.r.assign(S, std::vector<double>(M, kNaN));
    double sum_sq = 0.0;
    std::size_t count = 0;
    for (std::size_t n = 0; n + 1 < S; ++n) {
        if (!primal.slice_valid[n]) continue;
        const double t = primal.t[n];
        const double lam = market.lambda(t);
        for (std::size_t i = 1; i + 1 < M; ++i) {
            const double vx = primal.V_x[n][i];
            const double vxx = primal.V_xx[n][i];
            const double vt = primal.V_t[n][i];
            const double r = -vt - conjugate_c_U1(utility, t, vx, primal.x[i]) + lam * vx * vx / vxx;
            rep.r[n][i] = r;
            rep.max_abs = std::max(rep.max_abs, std::abs(r));
            rep.max_rel = std::max(rep.max_rel, std::abs(r) / (1.0 + std::abs(vt)));
            sum_sq += r * r;
            ++count;
        }
    }
    if (count > 0) rep.l2 = std::sqrt(sum_sq / static_cast<double>(count));
    return rep;
}

double weak_duality_gap(const PrimalSolution& primal, const DualSolution& dual, std::size_t n, std::size_t i) {
    if (n >= primal.n_slices() || i >= primal.x.size())
        throw Error(ErrorCode::InvalidArgument, "gap index out of range");
    const double x = primal.x[i];
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < dual.y.size(); ++j) best = std::min(best, dual.W[n][j] + x * dual.y[j]);
    const double v = primal.V[n][i];
    const double gap = best - v;
    if (gap < -1e-8 * std::max(1.0, std::abs(v)))
        throw Error(ErrorCode::NegativeGapBeyondTolerance,
                    "gap " + std::to_string(gap) + " at t = " + std::to_string(primal.t[n]) +
                        ", x = " + std::to_string(x));
    return gap;
}

}  // namespace dualhjb

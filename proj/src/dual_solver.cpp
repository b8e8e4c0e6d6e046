#include "dualhjb/dual_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dualhjb {

namespace {

/// Thomas factorisation of a constant-coefficient tridiagonal matrix
/// (sub a, diag b, super c), reused for several right-hand sides.
class Tridiagonal {
public:
    Tridiagonal(std::size_t n, double a, double b, double c) : a_(a), c_(c), inv_(n), cp_(n) {
        double denom = b;
        inv_[0] = 1.0 / denom;
        cp_[0] = c * inv_[0];
        for (std::size_t i = 1; i < n; ++i) {
            denom = b - a * cp_[i - 1];
            inv_[i] = 1.0 / denom;
            cp_[i] = c * inv_[i];
        }
    }

    void solve(std::vector<double>& rhs) const {
        const std::size_t n = rhs.size();
        rhs[0] *= inv_[0];
        for (std::size_t i = 1; i < n; ++i) rhs[i] = (rhs[i] - a_ * rhs[i - 1]) * inv_[i];
        for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= cp_[i] * rhs[i + 1];
    }

private:
    double a_;
    double c_;
    std::vector<double> inv_;
    std::vector<double> cp_;
};

// -W_y at interior node j by central differences in xi.
inline double neg_gradient(std::span<const double> W, const std::vector<double>& y, std::size_t j, double h) {
    return -(W[j + 1] - W[j - 1]) / (2.0 * h * y[j]);
}

// Least-squares weights so that C = sum_k weight_k W_k for C y^{-q}.
std::vector<double> fit_weights(const std::vector<double>& y, std::span<const std::size_t> window, double q,
                                double y_end) {
    double norm = 0.0;
    for (std::size_t k : window) norm += std::pow(y[k], -2.0 * q);
    std::vector<double> w;
    for (std::size_t k : window) w.push_back(std::pow(y_end, -q) * std::pow(y[k], -q) / norm);
    return w;
}

}  // namespace

LogGrid LogGrid::make(double y_min, double y_max, std::size_t n_y, std::size_t n_t, double T) {
    if (!(y_min > 0.0) || !(y_max > y_min)) throw Error(ErrorCode::InvalidArgument, "need 0 < y_min < y_max");
    if (n_y < 16) throw Error(ErrorCode::InvalidArgument, "n_y must be >= 16");
    if (n_t < 8) throw Error(ErrorCode::InvalidArgument, "n_t must be >= 8");
    if (!(T > 0.0)) throw Error(ErrorCode::InvalidArgument, "horizon must be positive");
    return LogGrid{y_min, y_max, n_y, n_t, T};
}

double LogGrid::dxi() const { return std::log(y_max / y_min) / static_cast<double>(n_y - 1); }
double LogGrid::dt() const { return T / static_cast<double>(n_t); }
double LogGrid::xi(std::size_t j) const { return std::log(y_min) + static_cast<double>(j) * dxi(); }
double LogGrid::y(std::size_t j) const { return j + 1 == n_y ? y_max : std::exp(xi(j)); }
double LogGrid::t(std::size_t n) const { return n == n_t ? T : static_cast<double>(n) * dt(); }

std::vector<double> LogGrid::nodes() const {
    std::vector<double> out(n_y);
    for (std::size_t j = 0; j < n_y; ++j) out[j] = y(j);
    return out;
}

std::vector<double> terminal_slice(const LogGrid& grid, const ConjugateBundle& bundle) {
    std::vector<double> out(grid.n_y);
    for (std::size_t j = 0; j < grid.n_y; ++j) {
        out[j] = bundle.U2_tilde(grid.y(j));
        if (out[j] >= bundle.cap)
            throw Error(ErrorCode::SaturatedConjugate,
                        "terminal conjugate saturates at y = " + std::to_string(grid.y(j)) +
                            "; raise y_min");
    }
    return out;
}

double clamp_gradient(double q, double m, double M) { return std::min(std::max(m, q), M); }

BoundaryFit boundary_values(std::span<const double> slice, const LogGrid& grid, double p, std::size_t window) {
    const std::size_t n = grid.n_y;
    if (slice.size() != n) throw Error(ErrorCode::InvalidArgument, "slice size does not match grid");
    if (n < 2 * window + 2) throw Error(ErrorCode::InvalidArgument, "fit window too wide for grid");
    const double q = p / (1.0 - p);
    const auto y = grid.nodes();

    auto fit = [&](std::size_t first, double y_end, bool& degenerate) {
        double num = 0.0, den = 0.0, peak = 0.0;
        for (std::size_t k = first; k < first + window; ++k) {
            const double basis = std::pow(y[k], -q);
            num += slice[k] * basis;
            den += basis * basis;
            peak = std::max(peak, std::abs(slice[k]));
        }
        if (peak < 1e-14) {
            degenerate = true;
            return 0.0;
        }
        return num / den * std::pow(y_end, -q);
    };
    BoundaryFit out;
    out.left = fit(1, y.front(), out.left_degenerate);
    out.right = fit(n - 1 - window, y.back(), out.right_degenerate);
    return out;
}

StepResult step_backward(std::span<const double> W_next, double t_n, const LogGrid& grid,
                         const ConjugateBundle& bundle, const MarketModel& market, const StepOptions& opt) {
    const std::size_t n = grid.n_y;
    if (W_next.size() != n) throw Error(ErrorCode::InvalidArgument, "slice size does not match grid");
    const std::size_t m = n - 2;  // interior unknowns
    const double h = grid.dxi();
    const double dt = grid.dt();
    const double lam = market.lambda(t_n);
    const double q = bundle.p / (1.0 - bundle.p);
    const auto y = grid.nodes();

    // Clamp band from the gradient range of the previous slice.
    double g_min = std::numeric_limits<double>::infinity();
    double g_max = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 1; j + 1 < n; ++j) {
        const double g = neg_gradient(W_next, y, j, h);
        g_min = std::min(g_min, g);
        g_max = std::max(g_max, g);
    }
    const bool clamp_on = std::isfinite(g_max) && g_max > 0.0;
    const double lo = clamp_on ? opt.clamp_widen_low * std::max(g_min, 0.0) : 0.0;
    const double hi = clamp_on ? opt.clamp_widen_high * g_max : std::numeric_limits<double>::infinity();

    const double alpha = dt * lam / (h * h);
    const double beta = dt * lam / (2.0 * h);
    const double sub = -(alpha + beta);
    const double sup = -(alpha - beta);
    const Tridiagonal lu(m, sub, 1.0 + 2.0 * alpha, sup);

    // Responses to unit boundary values; interior index i = j - 1.
    std::vector<double> phi_l(m, 0.0), phi_r(m, 0.0);
    phi_l.front() = -sub;
    phi_r.back() = -sup;
    lu.solve(phi_l);
    lu.solve(phi_r);

    std::vector<std::size_t> left_win, right_win;
    for (std::size_t k = 1; k <= opt.fit_window; ++k) left_win.push_back(k);
    for (std::size_t k = n - 1 - opt.fit_window; k < n - 1; ++k) right_win.push_back(k);
    const auto wl = fit_weights(y, left_win, q, y.front());
    const auto wr = fit_weights(y, right_win, q, y.back());
    auto dot = [&](const std::vector<double>& weights, const std::vector<std::size_t>& win,
                   const std::vector<double>& interior) {
        double s = 0.0;
        for (std::size_t k = 0; k < win.size(); ++k) s += weights[k] * interior[win[k] - 1];
        return s;
    };
    const double a11 = 1.0 - dot(wl, left_win, phi_l), a12 = -dot(wl, left_win, phi_r);
    const double a21 = -dot(wr, right_win, phi_l), a22 = 1.0 - dot(wr, right_win, phi_r);
    const double det = a11 * a22 - a12 * a21;

    auto source_arg = [&](double g) { return clamp_on ? clamp_gradient(g, lo, hi) : std::max(g, 0.0); };

    std::vector<double> W(W_next.begin(), W_next.end());
    std::vector<double> interior(m);
    StepResult res;
    res.clamp = {lo, hi};
    bool converged = false;
    for (int it = 1; it <= opt.max_iterations; ++it) {
        for (std::size_t j = 1; j + 1 < n; ++j) {
            const double s = bundle.zero_source ? 0.0 : bundle.U1_star(t_n, y[j], source_arg(neg_gradient(W, y, j, h)));
            interior[j - 1] = W_next[j] + dt * s;
        }
        lu.solve(interior);
        const double bl = dot(wl, left_win, interior);
        const double br = dot(wr, right_win, interior);
        const double L = (bl * a22 - a12 * br) / det;
        const double R = (a11 * br - a21 * bl) / det;

        double change = 0.0, scale = 1.0;
        auto update = [&](std::size_t j, double v) {
            change = std::max(change, std::abs(v - W[j]));
            scale = std::max(scale, std::abs(v));
            W[j] = v;
        };
        update(0, L);
        update(n - 1, R);
        for (std::size_t j = 1; j + 1 < n; ++j) update(j, interior[j - 1] + L * phi_l[j - 1] + R * phi_r[j - 1]);
        res.iterations = it;
        if (change <= opt.tolerance * scale) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw Error(ErrorCode::FixedPointDivergence,
                    "no fixed point at t = " + std::to_string(t_n) + " within " +
                        std::to_string(opt.max_iterations) + " iterations; refine dt");

    std::size_t inactive = 0;
    for (std::size_t j = 1; j + 1 < n; ++j) {
        const double g = neg_gradient(W, y, j, h);
        if (!clamp_on || (g >= lo && g <= hi)) ++inactive;
    }
    res.clamp_inactive = static_cast<double>(inactive) / static_cast<double>(m);
    res.slice = std::move(W);
    return res;
}

void compute_derivatives(DualSolution& sol) {
    const auto& g = sol.grid;
    const std::size_t n = g.n_y;
    const std::size_t slices = sol.W.size();
    const double h = g.dxi();
    const double dt = g.dt();
    sol.W_y.assign(slices, std::vector<double>(n));
    sol.W_yy.assign(slices, std::vector<double>(n));
    sol.W_t.assign(slices, std::vector<double>(n));
    for (std::size_t s = 0; s < slices; ++s) {
        const auto& W = sol.W[s];
        auto& Wy = sol.W_y[s];
        auto& Wyy = sol.W_yy[s];
        for (std::size_t j = 0; j < n; ++j) {
            double d1, d2;
            if (j == 0) {
                d1 = (-3.0 * W[0] + 4.0 * W[1] - W[2]) / (2.0 * h);
                d2 = (2.0 * W[0] - 5.0 * W[1] + 4.0 * W[2] - W[3]) / (h * h);
            } else if (j + 1 == n) {
                d1 = (3.0 * W[j] - 4.0 * W[j - 1] + W[j - 2]) / (2.0 * h);
                d2 = (2.0 * W[j] - 5.0 * W[j - 1] + 4.0 * W[j - 2] - W[j - 3]) / (h * h);
            } else {
                d1 = (W[j + 1] - W[j - 1]) / (2.0 * h);
                d2 = (W[j + 1] - 2.0 * W[j] + W[j - 1]) / (h * h);
            }
            const double yj = sol.y[j];
            Wy[j] = d1 / yj;
            Wyy[j] = (d2 - d1) / (yj * yj);
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (slices == 1) {
                sol.W_t[s][j] = 0.0;
            } else if (s == 0) {
                sol.W_t[s][j] = (sol.W[1][j] - sol.W[0][j]) / dt;
            } else if (s + 1 == slices) {
                sol.W_t[s][j] = (sol.W[s][j] - sol.W[s - 1][j]) / dt;
            } else {
                sol.W_t[s][j] = (sol.W[s + 1][j] - sol.W[s - 1][j]) / (2.0 * dt);
            }
        }
    }
}

DualSolution solve_dual(const MarketModel& market, const UtilityModel& utility, const LogGrid& grid,
                        const SolveOptions& opt) {
    return solve_dual(market, make_bundle(utility, grid.T), grid, opt);
}

DualSolution solve_dual(const MarketModel& market, const ConjugateBundle& bundle, const LogGrid& grid,
                        const SolveOptions& opt) {
    DualSolution sol;
    sol.grid = grid;
    sol.p = bundle.p;
    sol.y = grid.nodes();
    const std::size_t n = grid.n_y;
    const std::size_t nt = grid.n_t;
    sol.W.assign(nt + 1, std::vector<double>(n, 0.0));
    sol.clamp_bounds.assign(nt + 1, {0.0, 0.0});
    sol.diagnostics.iterations.assign(nt + 1, 0);

    if (bundle.zero_source && bundle.zero_terminal) {
        compute_derivatives(sol);
        return sol;
    }

    sol.W[nt] = terminal_slice(grid, bundle);
    const double h = grid.dxi();
    for (std::size_t k = nt; k-- > 0;) {
        auto step = step_backward(sol.W[k + 1], grid.t(k), grid, bundle, market, opt.step);
        sol.W[k] = std::move(step.slice);
        sol.clamp_bounds[k] = step.clamp;
        sol.diagnostics.iterations[k] = step.iterations;
        sol.diagnostics.min_clamp_inactive = std::min(sol.diagnostics.min_clamp_inactive, step.clamp_inactive);
        if (opt.check_convexity) {
            const auto& W = sol.W[k];
            for (std::size_t j = 1; j + 1 < n; ++j) {
                const double d1 = (W[j + 1] - W[j - 1]) / (2.0 * h);
                const double d2 = (W[j + 1] - 2.0 * W[j] + W[j - 1]) / (h * h);
                const double scale = std::max({std::abs(W[j - 1]), std::abs(W[j]), std::abs(W[j + 1])});
                if (d2 - d1 < -1e-6 * scale)
                    throw Error(ErrorCode::NonConvexSlice,
                                "slice at t = " + std::to_string(grid.t(k)) + " not convex near y = " +
                                    std::to_string(sol.y[j]));
            }
        }
    }
    compute_derivatives(sol);

    const double q = bundle.p / (1.0 - bundle.p);
    auto& d = sol.diagnostics;
    for (std::size_t s = 0; s <= nt; ++s) {
        const double lam = market.lambda(grid.t(s));
        for (std::size_t j = 0; j < n; ++j) {
            d.growth_constant = std::max(d.growth_constant, sol.W[s][j] / (1.0 + std::pow(sol.y[j], -q)));
            if (s == nt || j == 0 || j + 1 == n) continue;
            const double yj = sol.y[j];
            const double src = bundle.U1_star(grid.t(s), yj, std::max(-sol.W_y[s][j], 0.0));
            const double r = -sol.W_t[s][j] - lam * yj * yj * sol.W_yy[s][j] - src;
            d.max_residual = std::max(d.max_residual, std::abs(r));
            d.max_rel_residual =
                std::max(d.max_rel_residual, std::abs(r) / (1.0 + std::abs(sol.W_t[s][j]) + std::abs(src)));
        }
    }

    if (opt.check_truncation) {
        d.truncation_change = truncation_sensitivity(market, bundle, grid, opt);
        d.boundary_layer_warning = d.truncation_change > 0.01;
    }
    return sol;
}

double truncation_sensitivity(const MarketModel& market, const ConjugateBundle& bundle, const LogGrid& grid,
                              const SolveOptions& opt) {
    SolveOptions inner = opt;
    inner.check_truncation = false;
    const double h = grid.dxi();
    const auto extra = static_cast<std::size_t>(std::ceil(std::log(2.0) / h));
    // Keep dxi: the extended grid shares the original nodes.
    const double y_min2 = grid.y_min * std::exp(-static_cast<double>(extra) * h);
    LogGrid wide = grid;
    wide.y_min = y_min2;
    wide.n_y = grid.n_y + extra;
    const auto base = solve_dual(market, bundle, grid, inner);
    const auto ext = solve_dual(market, bundle, wide, inner);
    const double a = base.W[0][0];
    const double b = ext.W[0][extra];
    const double denom = std::max(std::abs(b), 1e-300);
    return std::abs(a - b) / denom;
}

}  // namespace dualhjb

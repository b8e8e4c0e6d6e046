#include "dualhjb/legendre.hpp"

#include <cmath>
#include <limits>

#include "dualhjb/error.hpp"

namespace dualhjb {

namespace {

struct Vertex {
    double at = 0.0;
    double value = 0.0;
    bool ok = false;
};

// Vertex of the parabola through three points with a < b < c; ok only when
// the parabola opens upward and the vertex lies in [a, c].
Vertex parabola_min(double a, double fa, double b, double fb, double c, double fc) {
    const double d1 = (fb - fa) / (b - a);
    const double d2 = (fc - fb) / (c - b);
    const double curv = (d2 - d1) / (c - a);
    if (!(curv > 0.0)) return {};
    // f(s) = fb + m (s - b) + curv (s - b)^2 with m the slope at b.
    const double m = d1 + curv * (b - a);
    const double s = b - m / (2.0 * curv);
    if (s < a || s > c) return {};
    return {s, fb - m * m / (4.0 * curv), true};
}

void check_inputs(std::span<const double> nodes, std::span<const double> vals) {
    if (nodes.size() != vals.size() || nodes.size() < 2)
        throw Error(ErrorCode::InvalidArgument, "discrete transform needs matching node/value arrays");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!(nodes[i] > 0.0)) throw Error(ErrorCode::InvalidArgument, "transform nodes must be positive");
        if (i > 0 && !(nodes[i] > nodes[i - 1]))
            throw Error(ErrorCode::InvalidArgument, "transform nodes must be increasing");
    }
}

}  // namespace

DiscreteTransform inf_transform(std::span<const double> y, std::span<const double> w,
                                std::span<const double> x, bool refine) {
    check_inputs(y, w);
    const std::size_t n = y.size();

    // Lower convex hull (monotone chain).
    std::vector<std::size_t> hull;
    hull.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
        while (hull.size() >= 2) {
            const std::size_t a = hull[hull.size() - 2];
            const std::size_t b = hull.back();
            const double cross = (y[b] - y[a]) * (w[j] - w[a]) - (w[b] - w[a]) * (y[j] - y[a]);
            if (cross <= 0.0)
                hull.pop_back();
            else
                break;
        }
        hull.push_back(j);
    }
    auto slope = [&](std::size_t k) {
        return (w[hull[k + 1]] - w[hull[k]]) / (y[hull[k + 1]] - y[hull[k]]);
    };

    DiscreteTransform out;
    const std::size_t m = x.size();
    out.value.resize(m);
    out.discrete.resize(m);
    out.argument.resize(m);
    out.index.resize(m);
    out.at_boundary.resize(m);

    std::size_t k = hull.size() - 1;
    for (std::size_t i = 0; i < m; ++i) {
        if (i > 0 && x[i] < x[i - 1])
            throw Error(ErrorCode::InvalidArgument, "transform queries must be ascending");
        const double xi = x[i];
        while (k > 0 && slope(k - 1) > -xi) --k;
        const std::size_t j = hull[k];
        const double best = w[j] + xi * y[j];
        out.discrete[i] = best;
        out.value[i] = best;
        out.argument[i] = y[j];
        out.index[i] = j;
        out.at_boundary[i] = (j == 0 || j + 1 == n);
        if (refine && j > 0 && j + 1 < n) {
            const auto v = parabola_min(std::log(y[j - 1]), w[j - 1] + xi * y[j - 1], std::log(y[j]), best,
                                        std::log(y[j + 1]), w[j + 1] + xi * y[j + 1]);
            if (v.ok && v.value < best) {
                out.value[i] = v.value;
                out.argument[i] = std::exp(v.at);
            }
        }
    }
    return out;
}

DiscreteTransform sup_transform(std::span<const double> x, std::span<const double> v,
                                std::span<const double> y, bool refine) {
    std::vector<double> neg(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) neg[i] = -v[i];
    auto out = inf_transform(x, neg, y, refine);
    for (auto& val : out.value) val = -val;
    for (auto& val : out.discrete) val = -val;
    return out;
}

DiscreteTransform inf_transform_naive(std::span<const double> y, std::span<const double> w,
                                      std::span<const double> x) {
    check_inputs(y, w);
    DiscreteTransform out;
    for (double xi : x) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t j = 0; j < y.size(); ++j) {
            const double f = w[j] + xi * y[j];
            if (f < best) {
                best = f;
                arg = j;
            }
        }
        out.value.push_back(best);
        out.discrete.push_back(best);
        out.argument.push_back(y[arg]);
        out.index.push_back(arg);
        out.at_boundary.push_back(arg == 0 || arg + 1 == y.size());
    }
    return out;
}

}  // namespace dualhjb

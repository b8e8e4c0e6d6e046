#pragma once

// Closed forms and brute-force references written independently of the library.

#include <cmath>
#include <functional>

namespace oracle {

// Merton problem with U1 = a_c c^p/p, U2 = a_T x^p/p, constant b, sigma.
struct Merton {
    double p = 0.5, b = 0.3, sigma = 0.5, T = 1.0, a_c = 1.0, a_T = 0.0;

    double q() const { return p / (1.0 - p); }
    double kappa() const { return q() * (q() + 1.0) * (b / sigma) * (b / sigma) / 2.0; }
    // a_c^{1/(1-p)} (e^{k tau} - 1)/k + a_T^{1/(1-p)} e^{k tau}
    double B(double t) const {
        const double tau = T - t, k = kappa(), e = 1.0 / (1.0 - p);
        return std::pow(a_c, e) * (std::exp(k * tau) - 1.0) / k + std::pow(a_T, e) * std::exp(k * tau);
    }
    double W(double t, double y) const { return (1.0 - p) / p * std::pow(y, -q()) * B(t); }
    // V = A x^p / p with A = B^{1-p}
    double V(double t, double x) const { return std::pow(B(t), 1.0 - p) * std::pow(x, p) / p; }
    double fraction() const { return b / (sigma * sigma * (1.0 - p)); }
};

// U1 = c^p/p + x^p/p, U2 = x^p/p with p = 1/2: W = C(t)/y, -C' = kappa C + 1 + 2 sqrt(C), C(T) = 1.
inline double wealth_C0(double b, double sigma, double T, int steps = 20000) {
    const double lam = 0.5 * (b / sigma) * (b / sigma);
    const double kap = 2.0 * lam;  // q(q+1) theta^2/2 with q = 1
    auto f = [&](double C) { return kap * C + 1.0 + 2.0 * std::sqrt(C); };
    double C = 1.0;
    const double h = T / steps;
    for (int i = 0; i < steps; ++i) {
        const double k1 = f(C), k2 = f(C + 0.5 * h * k1), k3 = f(C + 0.5 * h * k2), k4 = f(C + h * k3);
        C += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    return C;
}

// sup_{x in [0, x_max]} f(x) - x y on n uniform points.
inline double brute_sup(const std::function<double(double)>& f, double y, double x_max, int n) {
    double best = f(0.0);
    for (int i = 1; i <= n; ++i) {
        const double x = x_max * i / n;
        best = std::max(best, f(x) - x * y);
    }
    return best;
}

inline double bisect(const std::function<double(double)>& g, double lo, double hi, int steps = 200) {
    for (int i = 0; i < steps; ++i) {
        const double mid = 0.5 * (lo + hi);
        if ((g(lo) < 0) == (g(mid) < 0)) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

inline double golden_min(const std::function<double(double)>& f, double a, double b, int steps = 200) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - r * (b - a), d = a + r * (b - a);
    for (int i = 0; i < steps; ++i) {
        if (f(c) < f(d)) b = d;
        else a = c;
        c = b - r * (b - a);
        d = a + r * (b - a);
    }
    return 0.5 * (a + b);
}

}  // namespace oracle

#include "dualhjb/reference.hpp"

#include <cmath>

namespace dualhjb {

double MertonCase::kappa() const {
    const double th = b / sigma;
    return q() * (q() + 1.0) * th * th / 2.0;
}

double MertonCase::B(double t) const {
    const double tau = T - t;
    const double k = kappa();
    const double e = 1.0 / (1.0 - p);
    const double run = k == 0.0 ? tau : std::expm1(k * tau) / k;
    return std::pow(a_c, e) * run + std::pow(a_T, e) * std::exp(k * tau);
}

double MertonCase::W(double t, double y) const { return (1.0 - p) / p * std::pow(y, -q()) * B(t); }

double MertonCase::W_y(double t, double y) const { return -(1.0 - p) / p * q() * std::pow(y, -q() - 1.0) * B(t); }

double MertonCase::V(double t, double x) const { return std::pow(B(t), 1.0 - p) * std::pow(x, p) / p; }

double MertonCase::V_x(double t, double x) const { return std::pow(B(t), 1.0 - p) * std::pow(x, p - 1.0); }

double MertonCase::consumption(double t, double x) const {
    return std::pow(a_c, 1.0 / (1.0 - p)) * x / B(t);
}

double MertonCase::fraction() const { return b / (sigma * sigma * (1.0 - p)); }

}  // namespace dualhjb

#pragma once

namespace dualhjb {

/// Closed forms for U1 = a_c c^p/p, U2 = a_T x^p/p with constant b, sigma.
struct MertonCase {
    double p = 0.5;
    double b = 0.3;
    double sigma = 0.5;
    double T = 1.0;
    double a_c = 1.0;
    double a_T = 0.0;

    double q() const { return p / (1.0 - p); }
    /// q(q+1) theta^2 / 2.
    double kappa() const;
    /// a_c^{1/(1-p)} (e^{kappa tau} - 1)/kappa + a_T^{1/(1-p)} e^{kappa tau}, tau = T - t.
    double B(double t) const;
    double W(double t, double y) const;
    double W_y(double t, double y) const;
    double V(double t, double x) const;
    double V_x(double t, double x) const;
    double consumption(double t, double x) const;
    /// b / (sigma^2 (1 - p)).
    double fraction() const;
};

}  // namespace dualhjb

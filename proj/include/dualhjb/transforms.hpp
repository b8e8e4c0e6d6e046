#pragma once

#include <functional>

#include "dualhjb/model.hpp"

namespace dualhjb {

/// Auto uses the closed forms of the power families when present;
/// Numeric forces the bracketing/bisection route on the raw callables.
enum class Route { Auto, Numeric };

struct ConjugateOptions {
    double cap = 1e12;            // saturation sentinel
    int max_expansions = 2100;    // bracket doublings/halvings
    int bisection_steps = 48;
    Route route = Route::Auto;
};

struct ExtendedReal {
    double value = 0.0;
    bool saturated = false;  // true value exceeds the cap; value holds the cap
};

/// sup_{x >= 0} { f(x) - x y } for concave nondecreasing f with f(0) finite.
/// f_prime may be empty (finite differences). Throws UnboundedConjugate when
/// f' stays above y over the whole expansion budget.
ExtendedReal scalar_conjugate(const Curve& f, const Curve& f_prime, double y,
                              const ConjugateOptions& opt = {});

/// Argmax of the same problem.
double scalar_conjugate_argmax(const Curve& f_prime, double y, const ConjugateOptions& opt = {});

/// Conjugate of the terminal utility: sup_{x >= 0} { U2(x) - x y }.
ExtendedReal conjugate_U2(const UtilityModel& u, double y, const ConjugateOptions& opt = {});

/// The c* with U1_c(t, c*, x) = y (Inada); 0 in the no-consumption regime.
double optimal_c(const UtilityModel& u, double t, double y, double x, const ConjugateOptions& opt = {});

/// U1*(t,y,x) = U1(t,c*,x) - c* y; d/dy U1* = -c*.
double conjugate_c_U1(const UtilityModel& u, double t, double y, double x,
                      const ConjugateOptions& opt = {});

/// sup_{x >= 0} { U1*(t,y,x) - x u }.
double double_conjugate_U1(const UtilityModel& u, double t, double y, double dual_u,
                           const ConjugateOptions& opt = {});

struct MarginalArgmin {
    double u = 0.0;
    bool boundary = false;  // no interior minimizer; u = 0
};

/// argmin_{u >= 0} { Ũ1*(t,y,u) - u q } for q < 0. The Auto route uses the
/// envelope identity u* = U1_x(t, c*(t,y,-q), -q); Numeric minimizes directly.
MarginalArgmin inverse_marginal_x(const UtilityModel& u, double t, double y, double q,
                                  const ConjugateOptions& opt = {});

struct ConjugateBundle {
    Field3 U1_star;        // (t, y, x)
    Field3 U1_star_tilde;  // (t, y, u)
    Curve U2_tilde;        // y
    Field3 c_star;         // (t, y, x)
    double K_tilde = 0.0;
    double p = 0.5;
    double cap = 1e12;
    bool zero_source = false;    // U1* identically zero
    bool zero_terminal = false;  // Ũ2 identically zero
};

/// Packages the conjugates of a utility model. K_tilde is fitted on a
/// sample grid over [0, T] x [1e-3, 1e3]^2.
ConjugateBundle make_bundle(const UtilityModel& u, double T, const ConjugateOptions& opt = {});

}  // namespace dualhjb

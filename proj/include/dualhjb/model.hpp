#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dualhjb/error.hpp"

namespace dualhjb {

using Curve = std::function<double(double)>;
using Field2 = std::function<double(double, double)>;
using Field3 = std::function<double(double, double, double)>;

/// Deterministic drift and volatility of the single risky asset.
struct MarketModel {
    Curve b;
    Curve sigma;
    double T = 1.0;
    double holder_exponent = 1.0;

    double theta(double t) const { return b(t) / sigma(t); }
    double lambda(double t) const {
        const double th = theta(t);
        return 0.5 * th * th;
    }

    static MarketModel constant(double b, double sigma, double T);
    /// Knots are (t, value) pairs sorted by t; values are held flat outside.
    static MarketModel piecewise_linear(std::vector<std::pair<double, double>> b_knots,
                                        std::vector<std::pair<double, double>> sigma_knots,
                                        double T);
};

Curve piecewise_linear_curve(std::vector<std::pair<double, double>> knots);

enum class ConsumptionRegime { Inada, NoConsumption };

/// Which of the two unboundedness alternatives the model declares:
/// U1(t,c,0) -> inf as c -> inf, or U2(x) -> inf as x -> inf.
enum class Unbounded { Consumption, Wealth, Both };

/// U1(t,c,x) = consumption(t,c) + wealth(t,x).
struct SeparableParts {
    Field2 consumption;
    Field2 consumption_c;  // may be empty
    Field2 wealth;
    Field2 wealth_x;  // may be empty
};

/// Closed-form hooks for the power families. When set, the consumption part
/// of U1 is a_c(t) c^p / p; a wealth part a_x(t) x^p / p and a terminal
/// utility a_T x^p / p are optional.
struct PowerForm {
    Curve a_c;
    std::optional<Curve> a_x;
    std::optional<double> a_T;
};

struct UtilityModel {
    Field3 u1;
    Field3 u1_c;  // empty: finite-difference fallback
    Field3 u1_x;  // empty: finite-difference fallback
    Curve u2;
    Curve u2_x;  // empty: finite-difference fallback
    double p = 0.5;
    double K = 1.0;
    ConsumptionRegime regime = ConsumptionRegime::Inada;
    Unbounded unbounded = Unbounded::Consumption;
    std::optional<SeparableParts> separable;
    std::optional<PowerForm> power;
    bool identically_zero = false;
    std::string family = "custom";

    /// p / (1 - p), the exponent of the dual growth y^{-q}.
    double q() const { return p / (1.0 - p); }
};

/// U1 = a_c c^p/p + a_x x^p/p, U2 = a_T x^p/p. K defaults to the tight
/// growth constant max(a_c, a_x + a_T) / p.
UtilityModel power_utility(double p, double a_c, double a_x, double a_T);

/// Time-dependent coefficients; used by the random-horizon rewriting.
UtilityModel power_utility(double p, Curve a_c, Curve a_x, double a_T);

/// U1 = U2 = 0.
UtilityModel zero_utility(double p = 0.5);

// Derivative accessors with the central finite-difference fallback
// (step 1e-6 relative) when the analytic derivative is absent.
double marginal_c(const UtilityModel& u, double t, double c, double x);
double marginal_x(const UtilityModel& u, double t, double c, double x);
double marginal_u2(const UtilityModel& u, double x);
bool uses_fd_fallback(const UtilityModel& u);

double central_difference(const Curve& f, double x);

/// Tensor-product probe set {t} x {c} x {x} inside [0,T) x (0,inf)^2.
struct ProbeGrid {
    std::vector<double> t;
    std::vector<double> c;
    std::vector<double> x;

    /// n uniform times in [0,T) and n geometric points in [1e-2, 1e2].
    static ProbeGrid regular(double T, std::size_t n = 10);
};

struct ProbePoint {
    double t = 0.0;
    double c = 0.0;
    double x = 0.0;
};

struct CheckOutcome {
    std::string name;
    bool passed = true;
    ErrorCode code = ErrorCode::ModelValidation;
    std::optional<ProbePoint> where;  // first violating probe point
    std::string detail;
};

struct ValidationReport {
    std::vector<CheckOutcome> checks;
    bool derivative_fallback = false;

    bool passed() const;
    const CheckOutcome* first_failure() const;
};

inline constexpr double kShapeTolerance = 1e-8;

ValidationReport validate_model(const MarketModel& market, const UtilityModel& utility,
                                const ProbeGrid& probes);

/// Throws Error(code of the first failed check) naming the probe point.
void require_valid(const ValidationReport& report);

}  // namespace dualhjb

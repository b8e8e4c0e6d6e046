#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dualhjb {

/// Error classes raised across the library. The CLI maps each class to a
/// stable process exit code (see exit_code()).
enum class ErrorCode {
    InvalidArgument,
    // model
    NonPositiveVolatility,
    NonPositiveDrift,
    ConcavityViolation,
    MonotonicityViolation,
    GrowthBoundViolation,
    NormalizationViolation,
    InadaViolation,
    ModelValidation,
    // transforms
    UnboundedConjugate,
    RootBracketFailure,
    // dual solver
    SaturatedConjugate,
    FixedPointDivergence,
    NonConvexSlice,
    // primal
    ArgminAtBoundary,
    OutOfRange,
    DegenerateCurvature,
    NegativeGapBeyondTolerance,
    // simulation
    BudgetExceeded,
    NaNPath,
    ExcessiveRejection,
    // applications
    NegativeWeight,
    DiscountTooSmall,
    QuadratureUnstable,
    NoConvergence,
    // cli / io
    ConfigParse,
    UpstreamArtifactMissing,
    Io,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Process exit code for an error class. 0 and 1 are reserved for
/// "all checks passed" and "some check failed".
int exit_code(ErrorCode code);

}  // namespace dualhjb

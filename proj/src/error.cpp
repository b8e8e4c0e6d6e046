#include "dualhjb/error.hpp"

namespace dualhjb {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::NonPositiveVolatility: return "NonPositiveVolatility";
        case ErrorCode::NonPositiveDrift: return "NonPositiveDrift";
        case ErrorCode::ConcavityViolation: return "ConcavityViolation";
        case ErrorCode::MonotonicityViolation: return "MonotonicityViolation";
        case ErrorCode::GrowthBoundViolation: return "GrowthBoundViolation";
        case ErrorCode::NormalizationViolation: return "NormalizationViolation";
        case ErrorCode::InadaViolation: return "InadaViolation";
        case ErrorCode::ModelValidation: return "ModelValidationError";
        case ErrorCode::UnboundedConjugate: return "UnboundedConjugate";
        case ErrorCode::RootBracketFailure: return "RootBracketFailure";
        case ErrorCode::SaturatedConjugate: return "SaturatedConjugate";
        case ErrorCode::FixedPointDivergence: return "FixedPointDivergence";
        case ErrorCode::NonConvexSlice: return "NonConvexSlice";
        case ErrorCode::ArgminAtBoundary: return "ArgminAtBoundary";
        case ErrorCode::OutOfRange: return "OutOfRange";
        case ErrorCode::DegenerateCurvature: return "DegenerateCurvature";
        case ErrorCode::NegativeGapBeyondTolerance: return "NegativeGapBeyondTolerance";
        case ErrorCode::BudgetExceeded: return "BudgetExceeded";
        case ErrorCode::NaNPath: return "NaNPath";
        case ErrorCode::ExcessiveRejection: return "ExcessiveRejection";
        case ErrorCode::NegativeWeight: return "NegativeWeight";
        case ErrorCode::DiscountTooSmall: return "DiscountTooSmall";
        case ErrorCode::QuadratureUnstable: return "QuadratureUnstable";
        case ErrorCode::NoConvergence: return "NoConvergence";
        case ErrorCode::ConfigParse: return "ConfigParseError";
        case ErrorCode::UpstreamArtifactMissing: return "UpstreamArtifactMissing";
        case ErrorCode::Io: return "IoError";
    }
    return "UnknownError";
}

int exit_code(ErrorCode code) {
    switch (code) {
        case ErrorCode::ConfigParse: return 2;
        case ErrorCode::InvalidArgument: return 2;
        case ErrorCode::NonPositiveVolatility:
        case ErrorCode::NonPositiveDrift:
        case ErrorCode::ConcavityViolation:
        case ErrorCode::MonotonicityViolation:
        case ErrorCode::GrowthBoundViolation:
        case ErrorCode::NormalizationViolation:
        case ErrorCode::InadaViolation:
        case ErrorCode::ModelValidation: return 3;
        case ErrorCode::UpstreamArtifactMissing: return 4;
        case ErrorCode::Io: return 5;
        case ErrorCode::BudgetExceeded:
        case ErrorCode::NaNPath:
        case ErrorCode::ExcessiveRejection: return 7;
        default: return 6;
    }
}

}  // namespace dualhjb

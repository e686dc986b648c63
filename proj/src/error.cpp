#include "scdesign/error.hpp"

namespace scdesign {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::MalformedFile: return "MalformedFile";
        case ErrorCode::DuplicateUnit: return "DuplicateUnit";
        case ErrorCode::NonpositiveWeight: return "NonpositiveWeight";
        case ErrorCode::MissingPrePeriodValue: return "MissingPrePeriodValue";
        case ErrorCode::EmptyFittingSet: return "EmptyFittingSet";
        case ErrorCode::InvalidFittingCount: return "InvalidFittingCount";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::EnumerationCapExceeded: return "EnumerationCapExceeded";
        case ErrorCode::InfeasibleBudget: return "InfeasibleBudget";
        case ErrorCode::EmptyDonorPool: return "EmptyDonorPool";
        case ErrorCode::InfeasibleDesign: return "InfeasibleDesign";
        case ErrorCode::EmptyClusterAfterConvergence: return "EmptyClusterAfterConvergence";
        case ErrorCode::MissingOutcome: return "MissingOutcome";
        case ErrorCode::MissingUnitLevelWeights: return "MissingUnitLevelWeights";
        case ErrorCode::FormMismatch: return "FormMismatch";
        case ErrorCode::SingularRegression: return "SingularRegression";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::NoBlankPeriods: return "NoBlankPeriods";
        case ErrorCode::CombinationCapExceeded: return "CombinationCapExceeded";
        case ErrorCode::SampleLargerThanPopulation: return "SampleLargerThanPopulation";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::MissingUpstreamArtifact: return "MissingUpstreamArtifact";
        case ErrorCode::Io: return "Io";
        case ErrorCode::Internal: return "Internal";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace scdesign

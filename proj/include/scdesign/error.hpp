#pragma once

#include <stdexcept>
#include <string>

namespace scdesign {

// Numeric values are shared with scd_status in scdesign.h.
enum class ErrorCode : int {
    MalformedFile = 1,
    DuplicateUnit = 2,
    NonpositiveWeight = 3,
    MissingPrePeriodValue = 4,
    EmptyFittingSet = 5,
    InvalidFittingCount = 6,
    InvalidArgument = 7,
    DimensionMismatch = 8,
    EnumerationCapExceeded = 9,
    InfeasibleBudget = 10,
    EmptyDonorPool = 11,
    InfeasibleDesign = 12,
    EmptyClusterAfterConvergence = 13,
    MissingOutcome = 14,
    MissingUnitLevelWeights = 15,
    FormMismatch = 16,
    SingularRegression = 17,
    LengthMismatch = 18,
    NoBlankPeriods = 19,
    CombinationCapExceeded = 20,
    SampleLargerThanPopulation = 21,
    ConfigError = 22,
    MissingUpstreamArtifact = 23,
    Io = 24,
    Internal = 25,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace scdesign

#include "odadjust/errors.hpp"

namespace odadjust {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedInput: return "MalformedInput";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::DanglingReference: return "DanglingReference";
    case ErrorCode::NegativeCoefficient: return "NegativeCoefficient";
    case ErrorCode::UnreachableDestination: return "UnreachableDestination";
    case ErrorCode::SelfLoop: return "SelfLoop";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NegativeCost: return "NegativeCost";
    case ErrorCode::Unreachable: return "Unreachable";
    case ErrorCode::MaxIterations: return "MaxIterations";
    case ErrorCode::ResidualTooLarge: return "ResidualTooLarge";
    case ErrorCode::SolverStalled: return "SolverStalled";
    case ErrorCode::NoCandidate: return "NoCandidate";
    case ErrorCode::InfeasibleTheta: return "InfeasibleTheta";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace odadjust

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace odadjust {

/// Failure categories raised by the library. Each maps to a distinct caller
/// reaction (bad input, numerical breakdown, or a signal to shrink a step).
enum class ErrorCode {
  MalformedInput,
  DuplicateId,
  DanglingReference,
  NegativeCoefficient,
  UnreachableDestination,
  SelfLoop,
  DimensionMismatch,
  NegativeCost,
  Unreachable,
  MaxIterations,
  ResidualTooLarge,
  SolverStalled,
  NoCandidate,
  InfeasibleTheta,
  TooLarge,
  InvalidConfig,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace odadjust

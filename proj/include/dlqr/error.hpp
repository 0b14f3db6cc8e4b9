#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dlqr {

enum class ErrorCode {
  NonSquare,
  DimensionMismatch,
  InvalidInput,
  Unstable,
  SolverDiverged,
  AssumptionViolated,
  SingularInnovation,
  NotStabilizing,
  NotObservable,
  SingularTransform,
  OptimalTransformNotFound,
  SingularX12,
  InitFailed,
  SchemaError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonSquare: return "NonSquare";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::Unstable: return "Unstable";
    case ErrorCode::SolverDiverged: return "SolverDiverged";
    case ErrorCode::AssumptionViolated: return "AssumptionViolated";
    case ErrorCode::SingularInnovation: return "SingularInnovation";
    case ErrorCode::NotStabilizing: return "NotStabilizing";
    case ErrorCode::NotObservable: return "NotObservable";
    case ErrorCode::SingularTransform: return "SingularTransform";
    case ErrorCode::OptimalTransformNotFound: return "OptimalTransformNotFound";
    case ErrorCode::SingularX12: return "SingularX12";
    case ErrorCode::InitFailed: return "InitFailed";
    case ErrorCode::SchemaError: return "SchemaError";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable ErrorCode alongside the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace dlqr

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace regimelq {

enum class ErrorKind {
  AsymmetryExceeded,
  DimensionMismatch,
  NearSingular,
  StructuralError,
  OutOfRange,
  NegativeOffDiagonal,
  RowSumNonzero,
  TooFewRegimes,
  NoConvergence,
  PsdViolation,
  StepFailure,
  SingularState,
  BlowUp,
  ParseError,
  UnknownKey,
  RangeError,
  IoError,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::AsymmetryExceeded: return "AsymmetryExceeded";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NearSingular: return "NearSingular";
    case ErrorKind::StructuralError: return "StructuralError";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::NegativeOffDiagonal: return "NegativeOffDiagonal";
    case ErrorKind::RowSumNonzero: return "RowSumNonzero";
    case ErrorKind::TooFewRegimes: return "TooFewRegimes";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::PsdViolation: return "PsdViolation";
    case ErrorKind::StepFailure: return "StepFailure";
    case ErrorKind::SingularState: return "SingularState";
    case ErrorKind::BlowUp: return "BlowUp";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::UnknownKey: return "UnknownKey";
    case ErrorKind::RangeError: return "RangeError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace regimelq

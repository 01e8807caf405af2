#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eightloop {

enum class ErrorCode {
  NonPositiveEnergy,
  OutOfRange,
  ToleranceNotMet,
  OutOfTrustRegion,
  IllConditionedFit,
  StepFailure,
  TimeCap,
  EscapedRegion,
  ConfigError,
  NumericalFailure,
  MissingInput,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonPositiveEnergy: return "NonPositiveEnergy";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::ToleranceNotMet: return "ToleranceNotMet";
    case ErrorCode::OutOfTrustRegion: return "OutOfTrustRegion";
    case ErrorCode::IllConditionedFit: return "IllConditionedFit";
    case ErrorCode::StepFailure: return "StepFailure";
    case ErrorCode::TimeCap: return "TimeCap";
    case ErrorCode::EscapedRegion: return "EscapedRegion";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::MissingInput: return "MissingInput";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace eightloop

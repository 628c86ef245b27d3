#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace axp {

enum class ErrorCode {
  DegenerateAxes,
  NonPositiveUnit,
  InvalidCamera,
  BehindCamera,
  InvalidStyle,
  FrameNotVisible,
  KeypointBehindCamera,
  ObjectBehindCamera,
  IoFailure,
  SchemaError,
  UnknownLabel,
  EmptyKnownSet,
  ViewIndexOutOfRange,
  InvalidTask,
  UnboundPlaceholder,
  TemplateSyntax,
  Timeout,
  AuthFailure,
  RateLimited,
  BackendFailure,
  MissingFixture,
  EmptyInput,
  InvalidConfig,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. Callers branch on code(); what() carries detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace axp

#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace spatial {

enum class ErrorCode {
  ParseError,
  ValidationError,
  IndexError,
  ArityError,
  NaRelation,
  SchemaError,
  UnknownCategory,
  EmptySupport,
  InvalidInput,
  TransportError,
  AuthError,
  RateLimited,
  EmptyResponse,
  ShapeMismatch,
  StepOutOfRange,
  MaskOverlap,
  RangeError,
  NonfiniteGradient,
  NonfiniteValue,
  IdMismatch,
  MissingLabel,
  MissingRecord,
  IoError,
};

/// Upper-snake name used in messages and CLI output, e.g. "PARSE_ERROR".
std::string_view to_string(ErrorCode code);

/// Every failure raised by the library. `violations` is filled for
/// ValidationError, `retry_after_seconds` for RateLimited.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  Error(ErrorCode code, const std::string& message, std::vector<std::string> violations);

  ErrorCode code() const noexcept { return code_; }
  const std::vector<std::string>& violations() const noexcept { return violations_; }

  std::optional<double> retry_after_seconds;

 private:
  ErrorCode code_;
  std::vector<std::string> violations_;
};

}  // namespace spatial

#include "spatial/error.hpp"

namespace spatial {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "PARSE_ERROR";
    case ErrorCode::ValidationError: return "VALIDATION_ERROR";
    case ErrorCode::IndexError: return "INDEX_ERROR";
    case ErrorCode::ArityError: return "ARITY_ERROR";
    case ErrorCode::NaRelation: return "NA_RELATION";
    case ErrorCode::SchemaError: return "SCHEMA_ERROR";
    case ErrorCode::UnknownCategory: return "UNKNOWN_CATEGORY";
    case ErrorCode::EmptySupport: return "EMPTY_SUPPORT";
    case ErrorCode::InvalidInput: return "INVALID_INPUT";
    case ErrorCode::TransportError: return "TRANSPORT_ERROR";
    case ErrorCode::AuthError: return "AUTH_ERROR";
    case ErrorCode::RateLimited: return "RATE_LIMITED";
    case ErrorCode::EmptyResponse: return "EMPTY_RESPONSE";
    case ErrorCode::ShapeMismatch: return "SHAPE_MISMATCH";
    case ErrorCode::StepOutOfRange: return "STEP_OUT_OF_RANGE";
    case ErrorCode::MaskOverlap: return "MASK_OVERLAP";
    case ErrorCode::RangeError: return "RANGE_ERROR";
    case ErrorCode::NonfiniteGradient: return "NONFINITE_GRADIENT";
    case ErrorCode::NonfiniteValue: return "NONFINITE_VALUE";
    case ErrorCode::IdMismatch: return "ID_MISMATCH";
    case ErrorCode::MissingLabel: return "MISSING_LABEL";
    case ErrorCode::MissingRecord: return "MISSING_RECORD";
    case ErrorCode::IoError: return "IO_ERROR";
  }
  return "UNKNOWN";
}

namespace {
std::string format_message(ErrorCode code, const std::string& message) {
  return std::string(to_string(code)) + ": " + message;
}
}  // namespace

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(format_message(code, message)), code_(code) {}

Error::Error(ErrorCode code, const std::string& message, std::vector<std::string> violations)
    : std::runtime_error(format_message(code, message)),
      code_(code),
      violations_(std::move(violations)) {}

}  // namespace spatial

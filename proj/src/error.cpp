#include "shaker/error.hpp"

namespace shaker {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kIo: return "io-error";
    case ErrorCode::kNotFound: return "not-found";
    case ErrorCode::kDuplicateId: return "duplicate-id";
    case ErrorCode::kUnknownId: return "unknown-id";
    case ErrorCode::kMalformedJson: return "malformed-json";
    case ErrorCode::kSchemaViolation: return "schema-violation";
    case ErrorCode::kRayParallelToPlane: return "ray-parallel-to-plane";
    case ErrorCode::kIntersectionBehindCamera: return "intersection-behind-camera";
    case ErrorCode::kUnknownAnomalyId: return "unknown-anomaly-id";
    case ErrorCode::kIllegalOption: return "illegal-option";
    case ErrorCode::kUnresolvable: return "unresolvable";
    case ErrorCode::kUnresolvedRecipe: return "unresolved-recipe";
    case ErrorCode::kMalformedDocument: return "malformed-document";
    case ErrorCode::kValidationFailure: return "validation-failure";
    case ErrorCode::kNoBottleHeld: return "no-bottle-held";
    case ErrorCode::kBottleExhausted: return "bottle-exhausted";
    case ErrorCode::kTimeout: return "timeout";
    case ErrorCode::kBindingMismatch: return "binding-mismatch";
    case ErrorCode::kIllegalStimulus: return "illegal-stimulus";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message, std::string detail)
    : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

}  // namespace shaker

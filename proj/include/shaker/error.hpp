#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace shaker {

enum class ErrorCode {
  kInvalidArgument,
  kIo,
  kNotFound,
  kDuplicateId,
  kUnknownId,
  kMalformedJson,
  kSchemaViolation,
  kRayParallelToPlane,
  kIntersectionBehindCamera,
  kUnknownAnomalyId,
  kIllegalOption,
  kUnresolvable,
  kUnresolvedRecipe,
  kMalformedDocument,
  kValidationFailure,
  kNoBottleHeld,
  kBottleExhausted,
  kTimeout,
  kBindingMismatch,
  kIllegalStimulus,
};

// Stable kebab-case name, used on the wire and on stderr.
std::string_view to_string(ErrorCode code);

// Every operation in the library reports failure through this type (or a
// subclass carrying extra payload). `detail` holds the machine-readable part,
// e.g. the offending JSON field path for a schema violation.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string detail = {});

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace shaker

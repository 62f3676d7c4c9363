#pragma once

#include <string>
#include <string_view>

#include "json.hpp"
#include "shaker/error.hpp"

namespace shaker::detail {

using nlohmann::json;

[[noreturn]] inline void schema_violation(const std::string& path, const std::string& why,
                                          ErrorCode code = ErrorCode::kSchemaViolation) {
  throw Error(code, path + ": " + why, path);
}

inline std::string join_path(std::string_view parent, std::string_view key) {
  if (parent.empty()) return std::string(key);
  return std::string(parent) + "." + std::string(key);
}

inline std::string index_path(std::string_view parent, std::size_t i) {
  return std::string(parent) + "[" + std::to_string(i) + "]";
}

inline json parse_json(std::string_view text, ErrorCode code = ErrorCode::kMalformedJson) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(code, std::string("malformed JSON: ") + e.what());
  }
}

inline const json& require(const json& obj, std::string_view key, const std::string& parent,
                           ErrorCode code = ErrorCode::kSchemaViolation) {
  const auto path = join_path(parent, key);
  if (!obj.is_object()) schema_violation(parent.empty() ? "$" : parent, "expected an object", code);
  const auto it = obj.find(key);
  if (it == obj.end()) schema_violation(path, "missing field", code);
  return *it;
}

inline std::string require_string(const json& obj, std::string_view key, const std::string& parent,
                                  ErrorCode code = ErrorCode::kSchemaViolation) {
  const auto& v = require(obj, key, parent, code);
  if (!v.is_string()) schema_violation(join_path(parent, key), "expected a string", code);
  return v.get<std::string>();
}

inline double as_number(const json& v, const std::string& path,
                        ErrorCode code = ErrorCode::kSchemaViolation) {
  if (!v.is_number()) schema_violation(path, "expected a number", code);
  return v.get<double>();
}

inline double require_number(const json& obj, std::string_view key, const std::string& parent,
                             ErrorCode code = ErrorCode::kSchemaViolation) {
  return as_number(require(obj, key, parent, code), join_path(parent, key), code);
}

}  // namespace shaker::detail

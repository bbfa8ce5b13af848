#pragma once

#include <cmath>
#include <string>

#include "json.hpp"

#include "spatial/error.hpp"
#include "spatial/geometry.hpp"

namespace spatial::detail {

template <typename Json>
const Json& require_field(const Json& object, const char* key, const std::string& context) {
  if (!object.is_object() || !object.contains(key)) {
    throw Error(ErrorCode::SchemaError, context + ": missing field '" + key + "'");
  }
  return object.at(key);
}

template <typename Json>
std::string require_string(const Json& object, const char* key, const std::string& context) {
  const auto& value = require_field(object, key, context);
  if (!value.is_string()) {
    throw Error(ErrorCode::SchemaError, context + ": field '" + key + "' must be a string");
  }
  return value.template get<std::string>();
}

template <typename Json>
double require_integral(const Json& value, const std::string& context) {
  if (value.is_number_integer()) return static_cast<double>(value.template get<long long>());
  if (value.is_number_float()) {
    const double d = value.template get<double>();
    if (d == static_cast<double>(static_cast<long long>(d))) return d;
  }
  throw Error(ErrorCode::SchemaError, context + ": expected an integer");
}

template <typename Json>
BBox bbox_from_json(const Json& value, const std::string& context) {
  if (!value.is_array() || value.size() != 4) {
    throw Error(ErrorCode::SchemaError, context + ": bbox must be [x, y, w, h]");
  }
  return {require_integral(value[0], context), require_integral(value[1], context),
          require_integral(value[2], context), require_integral(value[3], context)};
}

inline nlohmann::ordered_json bbox_to_json(const BBox& box) {
  return nlohmann::ordered_json::array(
      {std::llround(box.x), std::llround(box.y), std::llround(box.w), std::llround(box.h)});
}

}  // namespace spatial::detail

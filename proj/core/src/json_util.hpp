#ifndef STP_SRC_JSON_UTIL_HPP
#define STP_SRC_JSON_UTIL_HPP

#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "stp/geom.hpp"

namespace stp::jsonutil {

using nlohmann::json;

inline json vec_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

inline json quat_to_json(const UnitQuat& q) { return json::array({q.w(), q.x(), q.y(), q.z()}); }

inline const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw std::invalid_argument(where + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw std::invalid_argument(where + ": missing field '" + key + "'");
  return *it;
}

inline double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw std::invalid_argument(where + ": expected a number");
  return j.get<double>();
}

inline bool boolean(const json& j, const std::string& where) {
  if (!j.is_boolean()) throw std::invalid_argument(where + ": expected a boolean");
  return j.get<bool>();
}

inline Vec3 vec_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument(where + ": expected [x,y,z]");
  Vec3 v{number(j[0], where), number(j[1], where), number(j[2], where)};
  if (!is_finite(v)) throw std::invalid_argument(where + ": non-finite component");
  return v;
}

inline UnitQuat quat_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4) throw std::invalid_argument(where + ": expected [w,x,y,z]");
  try {
    return UnitQuat::from_components(number(j[0], where), number(j[1], where), number(j[2], where),
                                     number(j[3], where));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(where + ": " + e.what());
  }
}

/// Rejects keys outside `allowed`.
template <std::size_t N>
void check_keys(const json& obj, const char* const (&allowed)[N], const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw std::invalid_argument(where + ": unknown field '" + key + "'");
  }
}

}  // namespace stp::jsonutil

#endif  // STP_SRC_JSON_UTIL_HPP

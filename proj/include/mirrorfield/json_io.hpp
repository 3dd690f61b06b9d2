#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "mirrorfield/camera.hpp"
#include "mirrorfield/error.hpp"
#include "mirrorfield/vec.hpp"

namespace mirrorfield {

using Json = nlohmann::json;

Json to_json(const Vec3& v);
Vec3 vec3_from_json(const Json& j, const std::string& what, ErrorKind kind = ErrorKind::Data);

Json to_json(const Camera& c);
Camera camera_from_json(const Json& j);

// Typed lookup; a missing key or a wrong type throws Error(kind) naming
// `where.key`.
template <typename T>
T get_field(const Json& j, const std::string& key, const std::string& where,
            ErrorKind kind = ErrorKind::Data) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(kind, "missing field " + where + "." + key);
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(kind, "wrong type for " + where + "." + key);
  }
}

template <typename T>
T get_field_or(const Json& j, const std::string& key, const T& fallback, const std::string& where,
               ErrorKind kind = ErrorKind::Data) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return get_field<T>(j, key, where, kind);
}

// Throws Io if the file cannot be opened and `parse_error` if it is not JSON.
Json read_json(const std::filesystem::path& path, ErrorKind parse_error = ErrorKind::Data);
// Pretty-printed with a trailing newline.
void write_json(const std::filesystem::path& path, const Json& j);

}  // namespace mirrorfield

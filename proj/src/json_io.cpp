#include "mirrorfield/json_io.hpp"

#include <fstream>

namespace mirrorfield {

Json to_json(const Vec3& v) { return Json::array({v.x, v.y, v.z}); }

Vec3 vec3_from_json(const Json& j, const std::string& what, ErrorKind kind) {
  if (!j.is_array() || j.size() != 3) throw Error(kind, what + " must be a 3-element array");
  for (const Json& e : j) {
    if (!e.is_number()) throw Error(kind, what + " must contain numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Json to_json(const Camera& c) {
  Json m = Json::array();
  for (const double x : c.camera_to_world.m) m.push_back(x);
  return {{"width", c.width}, {"height", c.height}, {"fx", c.fx},  {"fy", c.fy},
          {"cx", c.cx},       {"cy", c.cy},         {"camera_to_world", m}};
}

Camera camera_from_json(const Json& j) {
  Camera c;
  c.width = get_field<int>(j, "width", "camera");
  c.height = get_field<int>(j, "height", "camera");
  c.fx = get_field<double>(j, "fx", "camera");
  c.fy = get_field<double>(j, "fy", "camera");
  c.cx = get_field<double>(j, "cx", "camera");
  c.cy = get_field<double>(j, "cy", "camera");
  const auto m = get_field<std::vector<double>>(j, "camera_to_world", "camera");
  if (m.size() != 16) throw Error(ErrorKind::Data, "camera_to_world needs 16 numbers");
  std::copy(m.begin(), m.end(), c.camera_to_world.m.begin());
  if (c.width <= 0 || c.height <= 0 || !(c.fx > 0) || !(c.fy > 0)) {
    throw Error(ErrorKind::Data, "camera needs positive size and focal lengths");
  }
  if (rotation_error(c) > 1e-6) {
    throw Error(ErrorKind::Data, "camera rotation is not orthonormal");
  }
  return c;
}

Json read_json(const std::filesystem::path& path, ErrorKind parse_error) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(parse_error, "invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

}  // namespace mirrorfield

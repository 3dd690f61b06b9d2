#include "mirrorfield/scene.hpp"

#include <set>

#include "mirrorfield/error.hpp"
#include "mirrorfield/json_io.hpp"

namespace mirrorfield {

void SceneFile::validate() const {
  if (images.size() != cameras.size()) {
    throw Error(ErrorKind::Data, "scene has " + std::to_string(cameras.size()) + " cameras but " +
                                     std::to_string(images.size()) + " images");
  }
  auto check = [&](const std::vector<int>& ids, const char* name) {
    for (const int i : ids) {
      if (i < 0 || static_cast<std::size_t>(i) >= cameras.size()) {
        throw Error(ErrorKind::Data, std::string("split.") + name + " index out of range: " +
                                         std::to_string(i));
      }
    }
  };
  check(train, "train");
  check(test, "test");
  if (!(t_near >= 0 && t_near < t_far)) {
    throw Error(ErrorKind::Data, "bounds need 0 <= t_near < t_far");
  }
  for (const SceneMirror& m : mirrors) {
    if (m.vertices.empty() == m.vertex_ids.empty()) {
      throw Error(ErrorKind::Data, "each mirror needs either vertices or vertex_ids");
    }
    if (!m.vertex_ids.empty() && annotations.empty()) {
      throw Error(ErrorKind::Data, "annotated mirror but no annotation file");
    }
  }
}

SceneFile load_scene(const std::filesystem::path& path) {
  const Json j = read_json(path);
  SceneFile s;
  if (!j.contains("cameras") || !j["cameras"].is_array()) {
    throw Error(ErrorKind::Data, "scene: missing cameras array");
  }
  for (const Json& c : j["cameras"]) s.cameras.push_back(camera_from_json(c));
  s.images = get_field<std::vector<std::string>>(j, "images", "scene");
  if (j.contains("split")) {
    s.train = get_field_or<std::vector<int>>(j["split"], "train", {}, "split");
    s.test = get_field_or<std::vector<int>>(j["split"], "test", {}, "split");
  } else {
    for (int i = 0; i < static_cast<int>(s.cameras.size()); ++i) s.train.push_back(i);
  }
  for (const Json& m : j.value("mirrors", Json::array())) {
    SceneMirror sm;
    if (m.contains("vertices")) {
      for (const Json& v : m["vertices"]) sm.vertices.push_back(vec3_from_json(v, "mirror vertex"));
    }
    sm.vertex_ids = get_field_or<std::vector<int>>(m, "vertex_ids", {}, "mirror");
    sm.material.roughness_alpha = get_field_or<double>(m, "roughness_alpha", 0.0, "mirror");
    sm.material.fresnel_f0 = get_field_or<double>(m, "fresnel_f0", 1.0, "mirror");
    s.mirrors.push_back(std::move(sm));
  }
  s.annotations = get_field_or<std::string>(j, "annotations", "", "scene");
  if (j.contains("bounds")) {
    s.t_near = get_field<double>(j["bounds"], "t_near", "bounds");
    s.t_far = get_field<double>(j["bounds"], "t_far", "bounds");
  }
  if (j.contains("background")) s.background = vec3_from_json(j["background"], "background");
  s.validate();
  return s;
}

void save_scene(const std::filesystem::path& path, const SceneFile& s) {
  s.validate();
  Json j;
  j["cameras"] = Json::array();
  for (const Camera& c : s.cameras) j["cameras"].push_back(to_json(c));
  j["images"] = s.images;
  j["split"] = {{"train", s.train}, {"test", s.test}};
  j["mirrors"] = Json::array();
  for (const SceneMirror& m : s.mirrors) {
    Json jm;
    if (!m.vertices.empty()) {
      jm["vertices"] = Json::array();
      for (const Vec3& v : m.vertices) jm["vertices"].push_back(to_json(v));
    } else {
      jm["vertex_ids"] = m.vertex_ids;
    }
    jm["roughness_alpha"] = m.material.roughness_alpha;
    jm["fresnel_f0"] = m.material.fresnel_f0;
    j["mirrors"].push_back(jm);
  }
  if (!s.annotations.empty()) j["annotations"] = s.annotations;
  j["bounds"] = {{"t_near", s.t_near}, {"t_far", s.t_far}};
  j["background"] = to_json(s.background);
  write_json(path, j);
}

std::vector<VertexAnnotation> load_annotations(const std::filesystem::path& path) {
  const Json j = read_json(path);
  if (!j.contains("annotations") || !j["annotations"].is_array()) {
    throw Error(ErrorKind::Data, "annotation file needs an annotations array: " + path.string());
  }
  std::vector<VertexAnnotation> out;
  for (const Json& a : j["annotations"]) {
    VertexAnnotation va;
    va.vertex_id = get_field<int>(a, "vertex_id", "annotation");
    va.image_id = get_field<int>(a, "image_id", "annotation");
    const auto p = get_field<std::vector<double>>(a, "pixel", "annotation");
    if (p.size() != 2) throw Error(ErrorKind::Data, "annotation pixel needs two numbers");
    va.pixel = {p[0], p[1]};
    out.push_back(va);
  }
  return out;
}

void save_annotations(const std::filesystem::path& path,
                      const std::vector<VertexAnnotation>& annotations) {
  Json list = Json::array();
  for (const VertexAnnotation& a : annotations) {
    list.push_back({{"vertex_id", a.vertex_id},
                    {"image_id", a.image_id},
                    {"pixel", {a.pixel.x, a.pixel.y}}});
  }
  write_json(path, {{"annotations", list}});
}

std::vector<MirrorSurface> resolve_mirrors(const SceneFile& scene,
                                           const std::filesystem::path& scene_dir) {
  std::vector<VertexAnnotation> annotations;
  if (!scene.annotations.empty()) annotations = load_annotations(scene_dir / scene.annotations);
  for (const VertexAnnotation& a : annotations) {
    if (a.image_id < 0 || static_cast<std::size_t>(a.image_id) >= scene.cameras.size()) {
      throw Error(ErrorKind::Data, "annotation image_id out of range: " +
                                       std::to_string(a.image_id));
    }
    const Camera& c = scene.cameras[static_cast<std::size_t>(a.image_id)];
    if (!(a.pixel.x >= -0.5 && a.pixel.x < c.width - 0.5 && a.pixel.y >= -0.5 &&
          a.pixel.y < c.height - 0.5)) {
      throw Error(ErrorKind::Data, "annotation pixel outside image " +
                                       std::to_string(a.image_id));
    }
  }
  std::vector<MirrorSurface> out;
  for (const SceneMirror& m : scene.mirrors) {
    if (!m.vertices.empty()) {
      out.push_back(make_mirror(m.vertices, m.material));
    } else {
      const MirrorSpec spec{m.vertex_ids, m.material};
      auto built = build_mirrors(annotations, scene.cameras, std::span<const MirrorSpec>(&spec, 1));
      out.push_back(std::move(built.front()));
    }
  }
  return out;
}

std::vector<Image> load_images(const SceneFile& scene, const std::filesystem::path& scene_dir,
                               const std::vector<int>& indices) {
  std::vector<Image> out;
  out.reserve(indices.size());
  for (const int i : indices) {
    const auto ui = static_cast<std::size_t>(i);
    Image img = read_image(scene_dir / scene.images.at(ui));
    const Camera& c = scene.cameras[ui];
    if (img.width != c.width || img.height != c.height) {
      throw Error(ErrorKind::Data, "image " + scene.images[ui] + " does not match its camera size");
    }
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace mirrorfield

#include "mirrorfield/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <limits>

#include "mirrorfield/brdf.hpp"
#include "mirrorfield/error.hpp"
#include "mirrorfield/scene.hpp"

namespace mirrorfield {

std::optional<std::pair<double, double>> intersect_box(const Ray& ray, const Box& box, double t0,
                                                       double t1) {
  for (std::size_t a = 0; a < 3; ++a) {
    const double o = ray.origin[a], d = ray.direction[a];
    if (d == 0) {
      if (o < box.min[a] || o > box.max[a]) return std::nullopt;
      continue;
    }
    double lo = (box.min[a] - o) / d, hi = (box.max[a] - o) / d;
    if (lo > hi) std::swap(lo, hi);
    t0 = std::max(t0, lo);
    t1 = std::min(t1, hi);
    if (t0 > t1) return std::nullopt;
  }
  return std::make_pair(t0, t1);
}

std::vector<MirrorSurface> AnalyticScene::surfaces() const {
  std::vector<MirrorSurface> out;
  for (const AnalyticMirror& m : mirrors) out.push_back(make_mirror(m.corners, m.material));
  return out;
}

Json to_json(const AnalyticScene& s) {
  Json env = {{"center", to_json(s.environment.center)},
              {"radius", s.environment.radius},
              {"checker", s.environment.checker},
              {"tiles_phi", s.environment.tiles_phi},
              {"tiles_theta", s.environment.tiles_theta},
              {"color_a", to_json(s.environment.color_a)},
              {"color_b", to_json(s.environment.color_b)}};
  Json media = Json::array();
  for (const AnalyticField::Medium& m : s.medium.media()) {
    Json jm = {{"density", m.density}, {"color", to_json(m.color)}};
    if (m.bounded) {
      jm["min"] = to_json(m.box_min);
      jm["max"] = to_json(m.box_max);
    }
    media.push_back(jm);
  }
  Json mirrors = Json::array();
  for (const AnalyticMirror& m : s.mirrors) {
    Json corners = Json::array();
    for (const Vec3& c : m.corners) corners.push_back(to_json(c));
    mirrors.push_back({{"corners", corners},
                       {"roughness_alpha", m.material.roughness_alpha},
                       {"fresnel_f0", m.material.fresnel_f0}});
  }
  Json hidden = Json::array();
  for (const Box& b : s.hidden) hidden.push_back({{"min", to_json(b.min)}, {"max", to_json(b.max)}});
  return {{"environment", env},   {"media", media},       {"mirrors", mirrors},
          {"hidden", hidden},     {"t_near", s.t_near},   {"t_far", s.t_far},
          {"max_depth", s.max_depth}, {"bounce_offset", s.bounce_offset}};
}

AnalyticScene analytic_scene_from_json(const Json& j) {
  AnalyticScene s;
  const Json& env = j.at("environment");
  s.environment.center = vec3_from_json(env.at("center"), "environment.center");
  s.environment.radius = get_field<double>(env, "radius", "environment");
  s.environment.checker = get_field<bool>(env, "checker", "environment");
  s.environment.tiles_phi = get_field<int>(env, "tiles_phi", "environment");
  s.environment.tiles_theta = get_field<int>(env, "tiles_theta", "environment");
  s.environment.color_a = vec3_from_json(env.at("color_a"), "environment.color_a");
  s.environment.color_b = vec3_from_json(env.at("color_b"), "environment.color_b");
  if (s.environment.checker && (s.environment.tiles_phi <= 0 || s.environment.tiles_theta <= 0)) {
    throw Error(ErrorKind::Data, "checkerboard frequency must be positive");
  }
  for (const Json& m : j.at("media")) {
    const double density = get_field<double>(m, "density", "medium");
    const Vec3 color = vec3_from_json(m.at("color"), "medium.color");
    if (m.contains("min")) {
      s.medium.add_box(vec3_from_json(m["min"], "medium.min"), vec3_from_json(m["max"], "medium.max"),
                       density, color);
    } else {
      s.medium.add_everywhere(density, color);
    }
  }
  for (const Json& m : j.at("mirrors")) {
    AnalyticMirror am;
    for (const Json& c : m.at("corners")) am.corners.push_back(vec3_from_json(c, "mirror corner"));
    am.material.roughness_alpha = get_field<double>(m, "roughness_alpha", "mirror");
    am.material.fresnel_f0 = get_field<double>(m, "fresnel_f0", "mirror");
    s.mirrors.push_back(std::move(am));
  }
  for (const Json& b : j.value("hidden", Json::array())) {
    s.hidden.push_back({vec3_from_json(b.at("min"), "hidden.min"),
                        vec3_from_json(b.at("max"), "hidden.max")});
  }
  s.t_near = get_field<double>(j, "t_near", "scene");
  s.t_far = get_field<double>(j, "t_far", "scene");
  s.max_depth = get_field_or<int>(j, "max_depth", 8, "scene");
  s.bounce_offset = get_field_or<double>(j, "bounce_offset", 1e-6, "scene");
  return s;
}

MediumIntegral integrate_medium(const AnalyticField& medium, const Ray& ray, double t0, double t1) {
  MediumIntegral out;
  if (!(t1 > t0)) return out;
  struct Span {
    double lo, hi;
    const AnalyticField::Medium* m;
  };
  std::vector<Span> spans;
  std::vector<double> cuts{t0, t1};
  for (const AnalyticField::Medium& m : medium.media()) {
    if (m.density <= 0) continue;
    if (!m.bounded) {
      spans.push_back({t0, t1, &m});
      continue;
    }
    if (auto r = intersect_box(ray, {m.box_min, m.box_max}, t0, t1)) {
      if (r->second <= r->first) continue;
      spans.push_back({r->first, r->second, &m});
      cuts.push_back(r->first);
      cuts.push_back(r->second);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  double optical = 0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double lo = cuts[i], hi = cuts[i + 1];
    if (!(hi > lo)) continue;
    double sigma = 0;
    Vec3 weighted;
    for (const Span& s : spans) {
      if (s.lo <= lo && hi <= s.hi) {
        sigma += s.m->density;
        weighted += s.m->density * s.m->color;
      }
    }
    if (sigma <= 0) continue;
    const double od = sigma * (hi - lo);
    out.color += (std::exp(-optical) * -std::expm1(-od) / sigma) * weighted;
    optical += od;
  }
  out.transmittance = std::exp(-optical);
  return out;
}

Vec3 oracle_radiance(const AnalyticScene& scene, const std::vector<MirrorSurface>& surfaces,
                     const Ray& ray, int spp, Rng& rng, int depth) {
  Ray r = ray;
  if (auto exit = scene.environment.exit_distance(r.origin, r.direction)) {
    r.t_far = std::min(r.t_far, *exit);
  }
  std::optional<SurfaceHit> hit;
  if (!surfaces.empty() && r.t_far > r.t_near) hit = first_mirror_hit(r, surfaces);
  const MediumIntegral m = integrate_medium(scene.medium, r, r.t_near, hit ? hit->t : r.t_far);
  if (!hit) return m.color + m.transmittance * scene.environment.radiance(r.origin, r.direction);

  const Vec3 ideal = reflect(r.direction, hit->normal);
  if (depth >= scene.max_depth) {
    return m.color + m.transmittance * scene.environment.radiance(hit->point, ideal);
  }
  const MirrorSurface& surface = surfaces[static_cast<std::size_t>(hit->surface_index)];
  const BrdfParams p{surface.roughness_alpha, surface.fresnel_f0};
  const ShadingFrame frame = ShadingFrame::from_normal(hit->normal);
  Vec3 wo = frame.to_local(-r.direction);
  wo.z = std::max(wo.z, 1e-9);
  wo = normalize(wo);

  Vec3 reflected;
  if (is_delta(p)) {
    const double w = estimator_weight(wo, {-wo.x, -wo.y, wo.z}, {0, 0, 1}, p);
    Rng child = rng.child(0);
    reflected = w * oracle_radiance(scene, surfaces,
                                    {hit->point, ideal, scene.bounce_offset, scene.t_far}, spp,
                                    child, depth + 1);
  } else {
    const int n = std::max(1, spp);
    for (int i = 0; i < n; ++i) {
      // Draws below the surface contribute nothing; redrawing them would bias the mean.
      const VndfSample s = vndf_sample_raw(wo, p.roughness_alpha, rng.uniform2());
      if (s.omega_i.z <= 0) continue;
      const double w = estimator_weight(wo, s.omega_i, s.half, p);
      Rng child = rng.child(static_cast<std::uint64_t>(i));
      reflected += w * oracle_radiance(scene, surfaces,
                                       {hit->point, normalize(frame.to_world(s.omega_i)),
                                        scene.bounce_offset, scene.t_far},
                                       1, child, depth + 1);
    }
    reflected = reflected / n;
  }
  return m.color + m.transmittance * reflected;
}

Image oracle_render(const AnalyticScene& scene, const Camera& camera, int spp, std::uint64_t seed) {
  if (spp < 1) throw Error(ErrorKind::InvalidArgument, "oracle_render: spp must be >= 1");
  const std::vector<MirrorSurface> surfaces = scene.surfaces();
  Image out(camera.width, camera.height);
  const long count = static_cast<long>(out.pixels.size());
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 16)
  for (long i = 0; i < count; ++i) {
    try {
      const int u = static_cast<int>(i % camera.width), v = static_cast<int>(i / camera.width);
      Rng rng(seed, static_cast<std::uint64_t>(i));
      out.pixels[static_cast<std::size_t>(i)] = oracle_radiance(
          scene, surfaces, camera_ray(camera, u, v, scene.t_near, scene.t_far), spp, rng);
    } catch (...) {
#pragma omp critical(mirrorfield_oracle_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

std::vector<std::uint8_t> hidden_region_mask(const AnalyticScene& scene, const Camera& camera) {
  const std::vector<MirrorSurface> surfaces = scene.surfaces();
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(camera.width) * camera.height, 0);
  for (int v = 0; v < camera.height; ++v) {
    for (int u = 0; u < camera.width; ++u) {
      Ray r = camera_ray(camera, u, v, scene.t_near, scene.t_far);
      if (auto exit = scene.environment.exit_distance(r.origin, r.direction)) {
        r.t_far = std::min(r.t_far, *exit);
      }
      if (!(r.t_far > r.t_near)) continue;
      if (auto hit = first_mirror_hit(r, surfaces)) r.t_far = hit->t;
      for (const Box& b : scene.hidden) {
        if (intersect_box(r, b, r.t_near, r.t_far)) {
          mask[static_cast<std::size_t>(v) * camera.width + u] = 1;
          break;
        }
      }
    }
  }
  return mask;
}

// --- Presets ----------------------------------------------------------------

namespace {

constexpr double kOpaque = 40.0;

// Slab split into an nx x ny checkerboard in x/y (or y/z when along_x).
void add_checker(AnalyticField& f, const Box& box, int na, int nb, bool along_x,
                 const Vec3& color_a, const Vec3& color_b, double density) {
  const std::size_t ia = along_x ? 1 : 0, ib = along_x ? 2 : 1;
  const double da = (box.max[ia] - box.min[ia]) / na, db = (box.max[ib] - box.min[ib]) / nb;
  for (int a = 0; a < na; ++a) {
    for (int b = 0; b < nb; ++b) {
      Vec3 lo = box.min, hi = box.max;
      lo[ia] = box.min[ia] + a * da;
      hi[ia] = box.min[ia] + (a + 1) * da;
      lo[ib] = box.min[ib] + b * db;
      hi[ib] = box.min[ib] + (b + 1) * db;
      f.add_box(lo, hi, density, (a + b) % 2 == 0 ? color_a : color_b);
    }
  }
}

void add_tabletop(AnalyticField& f) {
  add_checker(f, {{-1.2, -1.2, -0.12}, {1.2, 1.2, 0.0}}, 4, 4, false, {0.82, 0.8, 0.74},
              {0.22, 0.26, 0.32}, kOpaque);
  f.add_box({-0.75, -0.55, 0}, {-0.35, -0.15, 0.4}, kOpaque, {0.8, 0.18, 0.12});
  f.add_box({0.25, -0.75, 0}, {0.65, -0.35, 0.3}, kOpaque, {0.18, 0.68, 0.25});
  f.add_box({-0.15, 0.0, 0}, {0.15, 0.3, 0.65}, kOpaque, {0.15, 0.3, 0.8});
  f.add_box({0.45, 0.2, 0}, {0.7, 0.45, 0.2}, kOpaque, {0.9, 0.8, 0.2});
}

// Vertical mirror at y = 0.85 facing -y.
AnalyticMirror back_mirror(double alpha) {
  return {{{-0.8, 0.85, 0.05}, {0.8, 0.85, 0.05}, {0.8, 0.85, 0.95}, {-0.8, 0.85, 0.95}},
          {alpha, 1.0}};
}

Preset tabletop_preset(const std::string& name, const std::string& description) {
  Preset p;
  p.name = name;
  p.description = description;
  p.background = {0.55, 0.6, 0.68};
  p.center = {0, 0, 0.3};
  p.radius = 4.0;
  p.vfov_degrees = 40.0;
  AnalyticScene& s = p.scene;
  s.environment.center = p.center;
  s.environment.radius = 2.6;
  s.environment.color_a = s.environment.color_b = p.background;
  add_tabletop(s.medium);
  s.t_near = 1.0;
  s.t_far = 7.0;
  return p;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"mirror-box", "two-mirror", "near-specular", "occluded-region"};
}

Preset make_preset(const std::string& name) {
  if (name == "mirror-box") {
    Preset p = tabletop_preset(name, "checkered table with four boxes and one perfect mirror");
    p.scene.mirrors.push_back(back_mirror(0.0));
    return p;
  }
  if (name == "two-mirror") {
    Preset p = tabletop_preset(name, "two facing perfect mirrors producing nested reflections");
    p.scene.mirrors.push_back(back_mirror(0.0));
    p.scene.mirrors.push_back(
        {{{0.7, -0.9, 0.05}, {-0.7, -0.9, 0.05}, {-0.7, -0.9, 0.85}, {0.7, -0.9, 0.85}},
         {0.0, 1.0}});
    return p;
  }
  if (name == "near-specular") {
    Preset p = tabletop_preset(name, "rough mirror (alpha 0.1) under a checkered environment");
    p.background = {0.5, 0.5, 0.5};
    Environment& env = p.scene.environment;
    env.checker = true;
    env.tiles_phi = 8;
    env.tiles_theta = 4;
    env.color_a = {0.85, 0.85, 0.8};
    env.color_b = {0.15, 0.18, 0.25};
    p.scene.mirrors.push_back(back_mirror(0.1));
    return p;
  }
  if (name == "occluded-region") {
    Preset p;
    p.name = name;
    p.description = "mirror showing a pattern behind the training cameras";
    p.background = {0.55, 0.6, 0.68};
    p.rig = CameraRig::FacingMirror;
    p.center = {-1.0, 0.0, 0.6};
    p.vfov_degrees = 45.0;
    p.train_positions = {{-1.8, -0.5, 0.4}, {-1.8, 0.5, 1.0}};
    p.train_targets = {{1.0, -0.2, 0.55}, {1.0, 0.2, 0.85}};
    p.test_positions = {{-0.4, -0.3, 0.5}, {-0.4, 0.3, 0.9}};
    p.test_targets = {{-2.5, -0.2, 0.55}, {-2.5, 0.2, 0.95}};
    AnalyticScene& s = p.scene;
    s.environment.center = p.center;
    s.environment.radius = 3.6;
    s.environment.color_a = s.environment.color_b = p.background;
    s.medium.add_box({-3.2, -1.2, -0.1}, {1.0, 1.2, 0.0}, kOpaque, {0.6, 0.58, 0.55});
    s.medium.add_box({0.3, -0.7, 0}, {0.6, -0.4, 0.5}, kOpaque, {0.8, 0.18, 0.12});
    s.medium.add_box({0.2, 0.35, 0}, {0.5, 0.65, 0.35}, kOpaque, {0.15, 0.3, 0.8});
    const Box pattern{{-2.6, -0.75, 0.15}, {-2.4, 0.75, 1.35}};
    add_checker(s.medium, pattern, 4, 4, true, {0.95, 0.85, 0.2}, {0.1, 0.2, 0.6}, 50.0);
    s.hidden.push_back(pattern);
    s.mirrors.push_back(
        {{{1.0, 0.9, 0.0}, {1.0, -0.9, 0.0}, {1.0, -0.9, 1.4}, {1.0, 0.9, 1.4}}, {0.0, 1.0}});
    s.t_near = 0.05;
    s.t_far = 8.0;
    return p;
  }
  throw Error(ErrorKind::Config, "unknown preset '" + name + "'");
}

// --- Dataset generation -----------------------------------------------------

namespace {

Vec3 uniform_in(const Box& b, Rng& rng) {
  const double x = rng.uniform(), y = rng.uniform(), z = rng.uniform();
  return {b.min.x + x * (b.max.x - b.min.x), b.min.y + y * (b.max.y - b.min.y),
          b.min.z + z * (b.max.z - b.min.z)};
}

}  // namespace

std::vector<Camera> make_cameras(const Preset& preset, const DatasetOptions& o) {
  if (o.n_train < 1 || o.n_test < 1) {
    throw Error(ErrorKind::Config, "dataset needs at least one train and one test view");
  }
  if (o.width < 1 || o.height < 1) throw Error(ErrorKind::Config, "image size must be positive");
  std::vector<Camera> cams;
  const int total = o.n_train + o.n_test;
  Rng rng(o.seed, 0x63616d6572617300ULL);
  const Vec3 up{0, 0, 1};
  if (preset.rig == CameraRig::Hemisphere) {
    const double radius = o.radius > 0 ? o.radius : preset.radius;
    const double z_min = std::sin(10.0 * kPi / 180.0);
    for (int i = 0; i < total; ++i) {
      const double z = z_min + (1.0 - z_min) * rng.uniform();
      const double phi = 2.0 * kPi * rng.uniform();
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const Vec3 eye = preset.center + radius * Vec3{r * std::cos(phi), r * std::sin(phi), z};
      cams.push_back(look_at(eye, preset.center, up, o.width, o.height, preset.vfov_degrees));
    }
  } else {
    for (int i = 0; i < total; ++i) {
      const bool train = i < o.n_train;
      const Vec3 eye = uniform_in(train ? preset.train_positions : preset.test_positions, rng);
      const Vec3 target = uniform_in(train ? preset.train_targets : preset.test_targets, rng);
      cams.push_back(look_at(eye, target, up, o.width, o.height, preset.vfov_degrees));
    }
  }
  return cams;
}

void generate_dataset(const Preset& preset, const DatasetOptions& o,
                      const std::filesystem::path& out_dir) {
  const std::vector<Camera> cams = make_cameras(preset, o);
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + (out_dir / "images").string());

  SceneFile sf;
  sf.cameras = cams;
  sf.t_near = preset.scene.t_near;
  sf.t_far = preset.scene.t_far;
  sf.background = preset.background;
  sf.annotations = "annotations.json";
  for (int i = 0; i < static_cast<int>(cams.size()); ++i) {
    const bool train = i < o.n_train;
    const int local = train ? i : i - o.n_train;
    char name[64];
    std::snprintf(name, sizeof name, "images/%s_%03d.png", train ? "train" : "test", local);
    sf.images.emplace_back(name);
    (train ? sf.train : sf.test).push_back(i);
  }

  // Corners get global ids in mirror order.
  std::vector<Vec3> corners;
  for (const AnalyticMirror& m : preset.scene.mirrors) {
    SceneMirror sm;
    sm.material = m.material;
    for (const Vec3& c : m.corners) {
      sm.vertex_ids.push_back(static_cast<int>(corners.size()));
      corners.push_back(c);
    }
    sf.mirrors.push_back(std::move(sm));
  }

  // Two training views that see every corner well inside the image.
  std::vector<VertexAnnotation> annotations;
  if (!corners.empty()) {
    int found = 0;
    for (int i = 0; i < o.n_train && found < 2; ++i) {
      const Camera& c = cams[static_cast<std::size_t>(i)];
      std::vector<Vec2> px;
      for (const Vec3& p : corners) {
        const auto q = project(c, p);
        if (!q || q->x < 0.5 || q->y < 0.5 || q->x > c.width - 1.5 || q->y > c.height - 1.5) break;
        px.push_back(*q);
      }
      if (px.size() != corners.size()) continue;
      for (std::size_t k = 0; k < corners.size(); ++k) {
        annotations.push_back({static_cast<int>(k), i, px[k]});
      }
      ++found;
    }
    if (found < 2) {
      throw Error(ErrorKind::Data, "fewer than two training views see every mirror corner");
    }
  }

  for (std::size_t i = 0; i < cams.size(); ++i) {
    const Image img = oracle_render(preset.scene, cams[i], o.spp, Rng::mix(o.seed + 1 + i));
    write_image(out_dir / sf.images[i], img);
  }
  save_annotations(out_dir / sf.annotations, annotations);
  save_scene(out_dir / "scene.json", sf);

  Json truth = {{"preset", preset.name}, {"scene", to_json(preset.scene)}};
  truth["mirror_vertices"] = Json::array();
  for (const Vec3& c : corners) truth["mirror_vertices"].push_back(to_json(c));
  write_json(out_dir / "ground_truth.json", truth);
}

}  // namespace mirrorfield

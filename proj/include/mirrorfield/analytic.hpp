#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mirrorfield/camera.hpp"
#include "mirrorfield/environment.hpp"
#include "mirrorfield/field.hpp"
#include "mirrorfield/geom.hpp"
#include "mirrorfield/image.hpp"
#include "mirrorfield/json_io.hpp"
#include "mirrorfield/rng.hpp"

namespace mirrorfield {

struct Box {
  Vec3 min, max;
};

// Entry/exit distances of the ray with the box, clipped to [t0, t1].
std::optional<std::pair<double, double>> intersect_box(const Ray& ray, const Box& box, double t0,
                                                       double t1);

struct AnalyticMirror {
  std::vector<Vec3> corners;
  MirrorMaterial material;
};

// Ground truth for synthetic datasets: box media inside an emitting sphere,
// with planar mirrors. Everything is evaluated in closed form except the
// reflection lobes of rough mirrors.
struct AnalyticScene {
  Environment environment;
  AnalyticField medium;
  std::vector<AnalyticMirror> mirrors;
  // Regions of interest for masked metrics (e.g. a region hidden from the
  // training views).
  std::vector<Box> hidden;
  double t_near = 0.0;
  double t_far = 10.0;
  int max_depth = 8;
  // Start offset of reflected rays.
  double bounce_offset = 1e-6;

  std::vector<MirrorSurface> surfaces() const;
};

Json to_json(const AnalyticScene& scene);
AnalyticScene analytic_scene_from_json(const Json& j);

// Emitted radiance and transmittance of the box media over [t0, t1], exact
// for piecewise-constant density.
struct MediumIntegral {
  Vec3 color;
  double transmittance = 1.0;
};
MediumIntegral integrate_medium(const AnalyticField& medium, const Ray& ray, double t0, double t1);

// Radiance along a ray. Perfect mirrors reflect deterministically; rough
// mirrors average `spp` visible-normal samples at the first rough bounce
// (one sample at deeper ones).
Vec3 oracle_radiance(const AnalyticScene& scene, const std::vector<MirrorSurface>& surfaces,
                     const Ray& ray, int spp, Rng& rng, int depth = 0);

// Pixel (u, v) uses Rng(seed, v * width + u).
Image oracle_render(const AnalyticScene& scene, const Camera& camera, int spp, std::uint64_t seed);

// Pixels whose camera ray passes through one of the hidden boxes before any
// mirror.
std::vector<std::uint8_t> hidden_region_mask(const AnalyticScene& scene, const Camera& camera);

// --- Presets and dataset generation ---------------------------------------

enum class CameraRig {
  // Uniform in solid angle over the upper hemisphere (elevation >= 10 deg),
  // looking at the center.
  Hemisphere,
  // Training cameras on a plane facing a mirror; test cameras turned around
  // toward the region behind them.
  FacingMirror,
};

struct Preset {
  std::string name;
  std::string description;
  AnalyticScene scene;
  Vec3 background;
  CameraRig rig = CameraRig::Hemisphere;
  Vec3 center;
  double radius = 4.0;
  double vfov_degrees = 40.0;
  // FacingMirror rig: camera positions and look-at targets drawn uniformly
  // from these boxes.
  Box train_positions, train_targets;
  Box test_positions, test_targets;
};

std::vector<std::string> preset_names();
Preset make_preset(const std::string& name);

struct DatasetOptions {
  int n_train = 40;
  int n_test = 8;
  int width = 64;
  int height = 64;
  // Hemisphere radius; <= 0 keeps the preset's.
  double radius = 0;
  // Samples per pixel for rough mirrors.
  int spp = 64;
  std::uint64_t seed = 0;
};

// Camera poses for the preset's rig (train first, then test).
std::vector<Camera> make_cameras(const Preset& preset, const DatasetOptions& options);

// Writes scene.json, annotations.json (mirror corners projected into two
// training views), ground_truth.json and images/{train,test}_NNN.png.
void generate_dataset(const Preset& preset, const DatasetOptions& options,
                      const std::filesystem::path& out_dir);

}  // namespace mirrorfield

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mirrorfield/brdf.hpp"
#include "mirrorfield/camera.hpp"
#include "mirrorfield/environment.hpp"
#include "mirrorfield/field.hpp"
#include "mirrorfield/geom.hpp"
#include "mirrorfield/rng.hpp"
#include "mirrorfield/tape.hpp"

namespace mirrorfield {

// Sorted quadrature points t_1 < ... < t_K on [t_near, t_far]. Point k owns
// the midpoint interval [(t_{k-1}+t_k)/2, (t_k+t_{k+1})/2], with the outer
// boundaries clamped to t_near and t_far, and the step delta_k = t_k - t_{k-1}
// (delta_1 = t_1 - t_near).
struct SegmentSet {
  double t_near = 0;
  double t_far = 1;
  std::vector<double> t;

  std::size_t size() const { return t.size(); }
  double delta(std::size_t k) const { return t[k] - (k == 0 ? t_near : t[k - 1]); }
  double interval_lo(std::size_t k) const { return k == 0 ? t_near : 0.5 * (t[k - 1] + t[k]); }
  double interval_hi(std::size_t k) const {
    return k + 1 == t.size() ? t_far : 0.5 * (t[k] + t[k + 1]);
  }
};

enum class EstimatorMode { Dense, Sparse, Delta };

struct IntegratorConfig {
  int k_coarse = 64;
  int k_fine = 64;
  int n_dirs = 4;
  int max_bounce_depth = 2;
  double t_near_offset = 1e-3;
  Vec3 background_color;
  EstimatorMode estimator_mode = EstimatorMode::Dense;
  // Reflection tracing off: camera rays ignore mirrors (plain volume rendering).
  bool trace_reflections = true;
  // Run the fine pass on secondary rays too.
  bool fine_on_bounces = true;
  // Dense estimator: draw one set of directions for all segments instead of
  // fresh directions per segment.
  bool shared_directions = false;
  // Dense estimator: no gradient through the BRDF-weighted transmittance.
  bool detach_brdf_transmittance = false;
  // Directions closer than this to grazing w.r.t. the ideal reflection are
  // replaced by it.
  double grazing_cosine = 0.05;
  // Replaces the roughness of every mirror at render time.
  std::optional<double> alpha_override;

  void validate() const;
};

struct RadianceResult {
  Vec3 color;
  // Transmittance from t_near to the end of the emitted segment (the mirror
  // hit, or t_far).
  double transmittance = 1.0;
  // Composite weights of the final sample set of the emitted segment.
  std::vector<double> weights;
  SegmentSet segments;
  // Result of the coarse pass alone (same reflected tail).
  Vec3 coarse_color;
  std::int32_t node = -1;
  std::int32_t coarse_node = -1;
  bool hit_mirror = false;
};

struct RenderScene {
  const RadianceField* field = nullptr;
  // Separate network for the coarse pass; null means the fine field is shared.
  const RadianceField* coarse_field = nullptr;
  std::span<const MirrorSurface> mirrors;
  // When set, rays that escape pick up its radiance instead of the background
  // color and are clipped at the sphere.
  std::optional<Environment> environment;
  double t_near = 0.0;
  double t_far = 10.0;
};

// One sample per equal-width bin of [t_near, t_far].
SegmentSet stratified_samples(double t_near, double t_far, int k, Rng& rng);

// Inverts the piecewise-constant density proportional to `weights` over the
// bins [edges[i], edges[i+1]] at each u in [0, 1). edges has one more entry
// than weights; the weights must not all be zero.
std::vector<double> sample_piecewise_constant(std::span<const double> edges,
                                              std::span<const double> weights,
                                              std::span<const double> u);

// Draws k_fine points from the coarse weights (stratified in u) over the
// coarse midpoint intervals and merges them with the coarse points. Falls
// back to stratified sampling when all weights are zero.
SegmentSet hierarchical_resample(const SegmentSet& coarse, std::span<const double> weights,
                                 int k_fine, Rng& rng);

RadianceResult composite(const SegmentSet& segments, std::span<const FieldSample> samples);

// T_k = exp(-sum_{j<k} e_j delta_j) for k = 0..K (the last entry is the
// transmittance past the final segment).
std::vector<double> segment_transmittance(std::span<const double> extinction,
                                          std::span<const double> deltas);

class Integrator {
 public:
  Integrator(const RenderScene& scene, const IntegratorConfig& config);

  const IntegratorConfig& config() const { return config_; }
  const RenderScene& scene() const { return scene_; }

  // Full radiance along a camera ray, recorded on `tape`.
  RadianceResult render_ray(const Ray& ray, Rng& rng, Tape& tape) const;
  RadianceResult render_ray(const Ray& ray, Rng& rng) const;

  // Coarse + fine volume rendering over [ray.t_near, stop_t] with nothing
  // behind it.
  RadianceResult emitted_radiance(const Ray& ray, double stop_t, Rng& rng) const;

  // Reflected radiance leaving the hit point toward -incident.
  Vec3 reflected_radiance_sparse(const SurfaceHit& hit, const Vec3& incident, int depth,
                                 Rng& rng) const;
  Vec3 reflected_radiance_dense(const SurfaceHit& hit, const Vec3& incident, int depth,
                                Rng& rng) const;
  Vec3 reflected_radiance_delta(const SurfaceHit& hit, const Vec3& incident, int depth,
                                Rng& rng) const;

  // Material of a mirror after applying the roughness override.
  BrdfParams material(int surface_index) const;

 private:
  struct Emitted {
    Tape::Builder coarse;
    Tape::Builder fine;
    SegmentSet segments;
    std::vector<double> weights;
  };
  struct Tail {
    Vec3 constant;
    std::int32_t child = -1;
    double child_weight = 0;
  };

  RadianceResult trace(const Ray& ray, int depth, Rng& rng, Tape& tape, bool want_coarse) const;
  Emitted emit(const Ray& ray, double stop_t, int depth, Rng& rng, Tape& tape) const;
  std::int32_t reflect_node(const SurfaceHit& hit, const Vec3& incident, int depth, Rng& rng,
                            Tape& tape) const;
  std::int32_t sparse_node(const SurfaceHit& hit, const Vec3& incident, const BrdfParams& p,
                           int depth, Rng& rng, Tape& tape) const;
  std::int32_t dense_node(const SurfaceHit& hit, const Vec3& incident, const BrdfParams& p,
                          int depth, Rng& rng, Tape& tape) const;
  std::int32_t delta_node(const SurfaceHit& hit, const Vec3& incident, const BrdfParams& p,
                          int depth, Rng& rng, Tape& tape) const;

  // Appends queries to the tape and evaluates them with the chosen network.
  std::uint32_t evaluate(std::span<const FieldQuery> qs, bool coarse, Tape& tape) const;
  // Far end of a ray: scene bound, clipped by the environment sphere.
  double far_limit(const Vec3& origin, const Vec3& direction, double t_far) const;
  Vec3 escape_radiance(const Vec3& origin, const Vec3& direction) const;

  RenderScene scene_;
  IntegratorConfig config_;
};

// Image of linear RGB values, row-major from the top-left pixel.
struct RenderOutput {
  int width = 0, height = 0;
  std::vector<Vec3> pixels;
  // True where the camera ray hits a mirror.
  std::vector<std::uint8_t> mirror_mask;
};

// Pixel (u, v) uses the stream Rng(seed, v * width + u). The parallel and
// serial versions return identical results.
RenderOutput render_image(const Camera& camera, const RenderScene& scene,
                          const IntegratorConfig& config, std::uint64_t seed);
RenderOutput render_image_serial(const Camera& camera, const RenderScene& scene,
                                 const IntegratorConfig& config, std::uint64_t seed);

// Pixels whose camera ray hits a mirror within the scene bounds.
std::vector<std::uint8_t> mirror_path_mask(const Camera& camera, const RenderScene& scene);

}  // namespace mirrorfield

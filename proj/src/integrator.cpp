#include "mirrorfield/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <string>

#include "mirrorfield/error.hpp"

namespace mirrorfield {

void IntegratorConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::Config, m); };
  if (k_coarse < 1) fail("k_coarse must be >= 1");
  if (k_fine < 0) fail("k_fine must be >= 0");
  if (n_dirs < 1) fail("n_dirs must be >= 1");
  if (max_bounce_depth < 0) fail("max_bounce_depth must be >= 0");
  if (!(t_near_offset >= 0)) fail("t_near_offset must be >= 0");
  if (!(grazing_cosine >= 0 && grazing_cosine < 1)) fail("grazing_cosine must be in [0, 1)");
  if (alpha_override && !(*alpha_override >= 0 && *alpha_override <= 1)) {
    fail("alpha_override must be in [0, 1]");
  }
}

SegmentSet stratified_samples(double t_near, double t_far, int k, Rng& rng) {
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "stratified_samples: K must be >= 1");
  if (!(t_near < t_far)) {
    throw Error(ErrorKind::InvalidArgument, "stratified_samples: need t_near < t_far");
  }
  SegmentSet s{t_near, t_far, {}};
  s.t.reserve(static_cast<std::size_t>(k));
  const double width = (t_far - t_near) / k;
  for (int i = 0; i < k; ++i) s.t.push_back(t_near + (i + rng.uniform()) * width);
  return s;
}

std::vector<double> sample_piecewise_constant(std::span<const double> edges,
                                              std::span<const double> weights,
                                              std::span<const double> u) {
  if (edges.size() != weights.size() + 1) {
    throw Error(ErrorKind::ShapeMismatch, "sample_piecewise_constant: edges/weights size");
  }
  std::vector<double> cdf(weights.size() + 1, 0.0);
  std::size_t last = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] < 0) throw Error(ErrorKind::InvalidArgument, "negative resampling weight");
    cdf[i + 1] = cdf[i] + weights[i];
    if (weights[i] > 0) last = i;
  }
  const double total = cdf.back();
  if (!(total > 0)) throw Error(ErrorKind::InvalidArgument, "resampling weights are all zero");

  std::vector<double> out;
  out.reserve(u.size());
  for (const double ui : u) {
    const double target = ui * total;
    // First bin whose upper cdf value exceeds the target.
    auto it = std::upper_bound(cdf.begin() + 1, cdf.end(), target);
    std::size_t bin = it == cdf.end() ? last : static_cast<std::size_t>(it - cdf.begin() - 1);
    if (weights[bin] <= 0) bin = last;
    const double frac = std::clamp((target - cdf[bin]) / weights[bin], 0.0, 1.0);
    out.push_back(edges[bin] + frac * (edges[bin + 1] - edges[bin]));
  }
  return out;
}

namespace {

// New fine points only, ascending.
std::vector<double> draw_fine(const SegmentSet& coarse, std::span<const double> weights,
                              int k_fine, Rng& rng) {
  std::vector<double> u(static_cast<std::size_t>(k_fine));
  for (int j = 0; j < k_fine; ++j) u[static_cast<std::size_t>(j)] = (j + rng.uniform()) / k_fine;
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0)) {
    for (double& x : u) x = coarse.t_near + x * (coarse.t_far - coarse.t_near);
    return u;
  }
  std::vector<double> edges(coarse.size() + 1);
  edges[0] = coarse.t_near;
  for (std::size_t k = 0; k < coarse.size(); ++k) edges[k + 1] = coarse.interval_hi(k);
  return sample_piecewise_constant(edges, weights, u);
}

struct MergedPoint {
  double t;
  int coarse_index;  // -1 for a fine point
};

std::vector<MergedPoint> merge_points(const std::vector<double>& coarse,
                                      const std::vector<double>& fine) {
  std::vector<MergedPoint> all;
  all.reserve(coarse.size() + fine.size());
  std::size_t i = 0, j = 0;
  while (i < coarse.size() || j < fine.size()) {
    const bool take_coarse = j == fine.size() || (i < coarse.size() && coarse[i] <= fine[j]);
    const MergedPoint p =
        take_coarse ? MergedPoint{coarse[i], static_cast<int>(i)} : MergedPoint{fine[j], -1};
    take_coarse ? ++i : ++j;
    if (!all.empty() && !(p.t > all.back().t)) continue;
    all.push_back(p);
  }
  return all;
}

SegmentSet to_segments(const SegmentSet& base, const std::vector<MergedPoint>& pts) {
  SegmentSet s{base.t_near, base.t_far, {}};
  s.t.reserve(pts.size());
  for (const MergedPoint& p : pts) s.t.push_back(p.t);
  return s;
}

}  // namespace

SegmentSet hierarchical_resample(const SegmentSet& coarse, std::span<const double> weights,
                                 int k_fine, Rng& rng) {
  if (weights.size() != coarse.size()) {
    throw Error(ErrorKind::ShapeMismatch, "hierarchical_resample: one weight per coarse point");
  }
  if (k_fine < 0) throw Error(ErrorKind::InvalidArgument, "hierarchical_resample: k_fine < 0");
  return to_segments(coarse, merge_points(coarse.t, draw_fine(coarse, weights, k_fine, rng)));
}

RadianceResult composite(const SegmentSet& segments, std::span<const FieldSample> samples) {
  if (samples.size() != segments.size()) {
    throw Error(ErrorKind::ShapeMismatch, "composite: one sample per segment point");
  }
  RadianceResult r;
  r.segments = segments;
  r.weights.reserve(samples.size());
  double optical = 0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const double od = samples[k].density * segments.delta(k);
    const double w = std::exp(-optical) * -std::expm1(-od);
    r.weights.push_back(w);
    r.color += w * samples[k].color;
    optical += od;
  }
  r.transmittance = std::exp(-optical);
  r.coarse_color = r.color;
  return r;
}

std::vector<double> segment_transmittance(std::span<const double> extinction,
                                          std::span<const double> deltas) {
  if (extinction.size() != deltas.size()) {
    throw Error(ErrorKind::ShapeMismatch, "segment_transmittance: size mismatch");
  }
  std::vector<double> t(extinction.size() + 1);
  double optical = 0;
  for (std::size_t k = 0; k < extinction.size(); ++k) {
    t[k] = std::exp(-optical);
    optical += extinction[k] * deltas[k];
  }
  t.back() = std::exp(-optical);
  return t;
}

Integrator::Integrator(const RenderScene& scene, const IntegratorConfig& config)
    : scene_(scene), config_(config) {
  config_.validate();
  if (scene_.field == nullptr) throw Error(ErrorKind::InvalidArgument, "scene has no field");
  if (!(scene_.t_near < scene_.t_far)) {
    throw Error(ErrorKind::Config, "scene bounds need t_near < t_far");
  }
}

BrdfParams Integrator::material(int surface_index) const {
  const MirrorSurface& m = scene_.mirrors[static_cast<std::size_t>(surface_index)];
  BrdfParams p{m.roughness_alpha, m.fresnel_f0};
  if (config_.alpha_override) p.roughness_alpha = *config_.alpha_override;
  return p;
}

std::uint32_t Integrator::evaluate(std::span<const FieldQuery> qs, bool coarse, Tape& tape) const {
  const bool twin = coarse && scene_.coarse_field != nullptr;
  const std::uint32_t base = tape.add_queries(qs, twin ? 1 : 0);
  const RadianceField& f = twin ? *scene_.coarse_field : *scene_.field;
  f.query_batch(qs, std::span<FieldSample>(tape.samples()).subspan(base, qs.size()));
  return base;
}

double Integrator::far_limit(const Vec3& origin, const Vec3& direction, double t_far) const {
  if (scene_.environment) {
    if (auto exit = scene_.environment->exit_distance(origin, direction)) {
      t_far = std::min(t_far, *exit);
    }
  }
  return t_far;
}

Vec3 Integrator::escape_radiance(const Vec3& origin, const Vec3& direction) const {
  return scene_.environment ? scene_.environment->radiance(origin, direction)
                            : config_.background_color;
}

Integrator::Emitted Integrator::emit(const Ray& ray, double stop_t, int depth, Rng& rng,
                                     Tape& tape) const {
  Emitted e;
  e.segments = {ray.t_near, std::max(ray.t_near, stop_t), {}};
  if (!(stop_t > ray.t_near)) return e;

  const bool fine_pass = config_.k_fine > 0 && (depth == 0 || config_.fine_on_bounces);
  const SegmentSet coarse = stratified_samples(ray.t_near, stop_t, config_.k_coarse, rng);
  std::vector<FieldQuery> qs;
  qs.reserve(coarse.size());
  for (const double t : coarse.t) qs.push_back({ray.at(t), ray.direction});
  const std::uint32_t base_c = evaluate(qs, fine_pass, tape);
  for (std::size_t k = 0; k < coarse.size(); ++k) {
    e.coarse.begin_segment(coarse.delta(k));
    e.coarse.add_extinction(base_c + static_cast<std::uint32_t>(k), 1.0);
    e.coarse.add_emission(base_c + static_cast<std::uint32_t>(k), 1.0);
  }
  if (!fine_pass) {
    e.fine = e.coarse;
    e.segments = coarse;
    e.weights = tape.segment_weights(e.fine);
    return e;
  }

  const std::vector<double> cw = tape.segment_weights(e.coarse);
  const std::vector<MergedPoint> merged =
      merge_points(coarse.t, draw_fine(coarse, cw, config_.k_fine, rng));
  e.segments = to_segments(coarse, merged);

  const bool shared = scene_.coarse_field == nullptr;
  qs.clear();
  for (const MergedPoint& p : merged) {
    if (!shared || p.coarse_index < 0) qs.push_back({ray.at(p.t), ray.direction});
  }
  std::uint32_t next = evaluate(qs, false, tape);
  for (std::size_t k = 0; k < merged.size(); ++k) {
    const std::uint32_t q = shared && merged[k].coarse_index >= 0
                                ? base_c + static_cast<std::uint32_t>(merged[k].coarse_index)
                                : next++;
    e.fine.begin_segment(e.segments.delta(k));
    e.fine.add_extinction(q, 1.0);
    e.fine.add_emission(q, 1.0);
  }
  e.weights = tape.segment_weights(e.fine);
  return e;
}

RadianceResult Integrator::trace(const Ray& ray, int depth, Rng& rng, Tape& tape,
                                 bool want_coarse) const {
  Ray clipped = ray;
  clipped.t_far = far_limit(ray.origin, ray.direction, std::min(ray.t_far, scene_.t_far));

  std::optional<SurfaceHit> hit;
  if (config_.trace_reflections && !scene_.mirrors.empty() && clipped.t_far > clipped.t_near) {
    hit = first_mirror_hit(clipped, scene_.mirrors);
  }
  const double stop = hit ? hit->t : clipped.t_far;

  Tail tail;
  if (hit) {
    if (depth < config_.max_bounce_depth) {
      Rng reflect_rng = rng.child(0);
      tail.child = reflect_node(*hit, ray.direction, depth, reflect_rng, tape);
      tail.child_weight = 1.0;
    } else {
      tail.constant = config_.background_color;
    }
  } else {
    tail.constant = escape_radiance(ray.origin, ray.direction);
  }

  Emitted e = emit(clipped, stop, depth, rng, tape);
  for (Tape::Builder* b : {&e.coarse, &e.fine}) {
    b->add_tail_constant(tail.constant);
    if (tail.child >= 0) b->add_child(tail.child, tail.child_weight);
  }

  RadianceResult r;
  r.hit_mirror = hit.has_value();
  if (want_coarse) {
    r.coarse_node = tape.add_node(e.coarse);
    r.coarse_color = tape.node(r.coarse_node).value;
  }
  r.node = tape.add_node(e.fine);
  const Tape::Node& n = tape.node(r.node);
  r.color = n.value;
  r.transmittance = n.transmittance;
  r.weights = std::move(e.weights);
  r.segments = std::move(e.segments);
  if (!want_coarse) r.coarse_color = r.color;
  return r;
}

std::int32_t Integrator::reflect_node(const SurfaceHit& hit, const Vec3& incident, int depth,
                                      Rng& rng, Tape& tape) const {
  const BrdfParams p = material(hit.surface_index);
  if (config_.estimator_mode == EstimatorMode::Delta || is_delta(p)) {
    return delta_node(hit, incident, p, depth, rng, tape);
  }
  if (config_.estimator_mode == EstimatorMode::Sparse) {
    return sparse_node(hit, incident, p, depth, rng, tape);
  }
  return dense_node(hit, incident, p, depth, rng, tape);
}

namespace {

Vec3 local_outgoing(const ShadingFrame& frame, const Vec3& incident) {
  Vec3 wo = frame.to_local(-incident);
  wo.z = std::max(wo.z, 1e-9);
  return normalize(wo);
}

}  // namespace

std::int32_t Integrator::delta_node(const SurfaceHit& hit, const Vec3& incident,
                                    const BrdfParams& p, int depth, Rng& rng, Tape& tape) const {
  const ShadingFrame frame = ShadingFrame::from_normal(hit.normal);
  const Vec3 wo = local_outgoing(frame, incident);
  const Vec3 wi{-wo.x, -wo.y, wo.z};
  const double weight = estimator_weight(wo, wi, {0, 0, 1}, p);
  Rng child_rng = rng.child(1);
  const RadianceResult child =
      trace({hit.point, reflect(incident, hit.normal), config_.t_near_offset, scene_.t_far},
            depth + 1, child_rng, tape, false);
  Tape::Builder b;
  b.add_child(child.node, weight);
  return tape.add_node(b);
}

std::int32_t Integrator::sparse_node(const SurfaceHit& hit, const Vec3& incident,
                                     const BrdfParams& p, int depth, Rng& rng, Tape& tape) const {
  const ShadingFrame frame = ShadingFrame::from_normal(hit.normal);
  const Vec3 wo = local_outgoing(frame, incident);
  const int n = config_.n_dirs;
  std::vector<std::pair<std::int32_t, double>> children;
  children.reserve(static_cast<std::size_t>(n));
  const Vec3 star_local{-wo.x, -wo.y, wo.z};
  for (int i = 0; i < n; ++i) {
    // Raw draws: a direction below the surface has zero BRDF weight. It is
    // still traced (along the ideal reflection) so every run costs the same.
    const VndfSample s = vndf_sample_raw(wo, p.roughness_alpha, rng.uniform2());
    const bool above = s.omega_i.z > 0;
    const double weight = above ? estimator_weight(wo, s.omega_i, s.half, p) : 0.0;
    Rng child_rng = rng.child(static_cast<std::uint64_t>(i) + 1);
    const RadianceResult child =
        trace({hit.point, normalize(frame.to_world(above ? s.omega_i : star_local)),
               config_.t_near_offset, scene_.t_far},
              depth + 1, child_rng, tape, false);
    children.emplace_back(child.node, weight / n);
  }
  Tape::Builder b;
  for (const auto& [node, w] : children) b.add_child(node, w);
  return tape.add_node(b);
}

std::int32_t Integrator::dense_node(const SurfaceHit& hit, const Vec3& incident,
                                    const BrdfParams& p, int depth, Rng& rng, Tape& tape) const {
  const ShadingFrame frame = ShadingFrame::from_normal(hit.normal);
  const Vec3 wo = local_outgoing(frame, incident);
  const Vec3 star_local{-wo.x, -wo.y, wo.z};
  const Vec3 star = reflect(incident, hit.normal);
  const Vec3& x = hit.point;
  const int n = config_.n_dirs;

  Ray star_ray{x, star, config_.t_near_offset, far_limit(x, star, scene_.t_far)};
  std::optional<SurfaceHit> next_hit;
  if (!scene_.mirrors.empty() && star_ray.t_far > star_ray.t_near) {
    next_hit = first_mirror_hit(star_ray, scene_.mirrors);
  }
  const double stop = next_hit ? next_hit->t : star_ray.t_far;

  std::int32_t child = -1;
  if (next_hit && depth + 1 < config_.max_bounce_depth) {
    Rng child_rng = rng.child(1);
    child = reflect_node(*next_hit, star, depth + 1, child_rng, tape);
  }

  struct Direction {
    Vec3 world;
    double cosine;  // against the ideal reflection
    double weight;
  };
  // Draws below the surface keep their zero weight. Draws too far from the
  // ideal reflection keep their weight but are evaluated along it.
  auto draw_direction = [&]() {
    const VndfSample s = vndf_sample_raw(wo, p.roughness_alpha, rng.uniform2());
    const double weight = s.omega_i.z > 0 ? estimator_weight(wo, s.omega_i, s.half, p) : 0.0;
    const double c = dot(s.omega_i, star_local);
    if (s.omega_i.z <= 0 || c <= config_.grazing_cosine) {
      return Direction{normalize(frame.to_world(star_local)), 1.0, weight};
    }
    return Direction{normalize(frame.to_world(s.omega_i)), c, weight};
  };

  double weight_sum = 0;
  Vec3 escape_sum;
  std::size_t direction_count = 0;
  // Builds the BRDF-weighted segments for `set`. Only the final stage feeds
  // the tail estimate.
  auto stage = [&](const SegmentSet& set, bool coarse_net, bool final_stage, Tape::Builder& b) {
    std::vector<FieldQuery> qs;
    std::vector<double> weights;
    qs.reserve(set.size() * static_cast<std::size_t>(n));
    weights.reserve(qs.capacity());
    std::vector<Direction> dirs;
    auto record = [&](const Direction& d) {
      if (!final_stage) return;
      weight_sum += d.weight;
      if (!next_hit) escape_sum += d.weight * escape_radiance(x, d.world);
      ++direction_count;
    };
    if (config_.shared_directions) {
      for (int i = 0; i < n; ++i) {
        dirs.push_back(draw_direction());
        record(dirs.back());
      }
    }
    for (std::size_t k = 0; k < set.size(); ++k) {
      const double lo = set.interval_lo(k), hi = set.interval_hi(k);
      for (int i = 0; i < n; ++i) {
        Direction d;
        if (config_.shared_directions) {
          d = dirs[static_cast<std::size_t>(i)];
        } else {
          d = draw_direction();
          record(d);
        }
        const double t = lo + (hi - lo) * rng.uniform();
        qs.push_back({x + (t / d.cosine) * d.world, d.world});
        weights.push_back(d.weight / n);
      }
    }
    const std::uint32_t base = evaluate(qs, coarse_net, tape);
    for (std::size_t k = 0; k < set.size(); ++k) {
      b.begin_segment(set.delta(k));
      for (int i = 0; i < n; ++i) {
        const std::size_t j = k * static_cast<std::size_t>(n) + static_cast<std::size_t>(i);
        b.add_extinction(base + static_cast<std::uint32_t>(j), weights[j]);
        b.add_emission(base + static_cast<std::uint32_t>(j), weights[j]);
      }
    }
  };

  Tape::Builder b;
  b.set_detach_extinction(config_.detach_brdf_transmittance);
  if (stop > star_ray.t_near) {
    const bool fine_pass = config_.k_fine > 0 && config_.fine_on_bounces;
    const SegmentSet coarse = stratified_samples(star_ray.t_near, stop, config_.k_coarse, rng);
    if (fine_pass) {
      Tape::Builder coarse_builder;
      stage(coarse, true, false, coarse_builder);
      const std::vector<double> cw = tape.segment_weights(coarse_builder);
      stage(hierarchical_resample(coarse, cw, config_.k_fine, rng), false, true, b);
    } else {
      stage(coarse, false, true, b);
    }
  } else {
    for (int i = 0; i < n; ++i) {
      const Direction d = draw_direction();
      weight_sum += d.weight;
      if (!next_hit) escape_sum += d.weight * escape_radiance(x, d.world);
      ++direction_count;
    }
  }

  const double mean_weight = weight_sum / static_cast<double>(direction_count);
  if (!next_hit) {
    b.add_tail_constant(escape_sum / static_cast<double>(direction_count));
  } else if (child >= 0) {
    b.add_child(child, mean_weight);
  } else {
    b.add_tail_constant(mean_weight * config_.background_color);
  }
  return tape.add_node(b);
}

RadianceResult Integrator::render_ray(const Ray& ray, Rng& rng, Tape& tape) const {
  return trace(ray, 0, rng, tape, true);
}

RadianceResult Integrator::render_ray(const Ray& ray, Rng& rng) const {
  Tape tape;
  return render_ray(ray, rng, tape);
}

RadianceResult Integrator::emitted_radiance(const Ray& ray, double stop_t, Rng& rng) const {
  if (!(stop_t > ray.t_near && stop_t <= ray.t_far)) {
    throw Error(ErrorKind::InvalidArgument, "emitted_radiance: stop_t outside (t_near, t_far]");
  }
  Tape tape;
  Emitted e = emit(ray, stop_t, 0, rng, tape);
  RadianceResult r;
  r.coarse_node = tape.add_node(e.coarse);
  r.coarse_color = tape.node(r.coarse_node).value;
  r.node = tape.add_node(e.fine);
  r.color = tape.node(r.node).value;
  r.transmittance = tape.node(r.node).transmittance;
  r.weights = std::move(e.weights);
  r.segments = std::move(e.segments);
  return r;
}

namespace {

void require_depth(int depth, const IntegratorConfig& c) {
  if (depth < 0 || depth >= c.max_bounce_depth) {
    throw Error(ErrorKind::InvalidArgument, "reflected radiance needs depth < max_bounce_depth");
  }
}

}  // namespace

Vec3 Integrator::reflected_radiance_sparse(const SurfaceHit& hit, const Vec3& incident, int depth,
                                           Rng& rng) const {
  require_depth(depth, config_);
  Tape tape;
  return tape.node(sparse_node(hit, incident, material(hit.surface_index), depth, rng, tape))
      .value;
}

Vec3 Integrator::reflected_radiance_dense(const SurfaceHit& hit, const Vec3& incident, int depth,
                                          Rng& rng) const {
  require_depth(depth, config_);
  Tape tape;
  return tape.node(dense_node(hit, incident, material(hit.surface_index), depth, rng, tape))
      .value;
}

Vec3 Integrator::reflected_radiance_delta(const SurfaceHit& hit, const Vec3& incident, int depth,
                                          Rng& rng) const {
  require_depth(depth, config_);
  Tape tape;
  return tape.node(delta_node(hit, incident, material(hit.surface_index), depth, rng, tape))
      .value;
}

std::vector<std::uint8_t> mirror_path_mask(const Camera& camera, const RenderScene& scene) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(camera.width) * camera.height, 0);
  if (scene.mirrors.empty()) return mask;
  for (int v = 0; v < camera.height; ++v) {
    for (int u = 0; u < camera.width; ++u) {
      Ray ray = camera_ray(camera, u, v, scene.t_near, scene.t_far);
      if (scene.environment) {
        if (auto exit = scene.environment->exit_distance(ray.origin, ray.direction)) {
          ray.t_far = std::min(ray.t_far, *exit);
        }
      }
      if (ray.t_far > ray.t_near && first_mirror_hit(ray, scene.mirrors)) {
        mask[static_cast<std::size_t>(v) * camera.width + u] = 1;
      }
    }
  }
  return mask;
}

namespace {

void render_pixel(const Integrator& integrator, const Camera& camera, std::uint64_t seed, int u,
                  int v, Tape& tape, RenderOutput& out) {
  const std::size_t index = static_cast<std::size_t>(v) * camera.width + u;
  const Ray ray = camera_ray(camera, u, v, integrator.scene().t_near, integrator.scene().t_far);
  Rng rng(seed, index);
  tape.clear();
  const RadianceResult r = integrator.render_ray(ray, rng, tape);
  out.pixels[index] = r.color;
  out.mirror_mask[index] = r.hit_mirror ? 1 : 0;
}

RenderOutput make_output(const Camera& camera) {
  if (camera.width <= 0 || camera.height <= 0) {
    throw Error(ErrorKind::InvalidArgument, "camera has an empty image");
  }
  RenderOutput out;
  out.width = camera.width;
  out.height = camera.height;
  out.pixels.resize(static_cast<std::size_t>(camera.width) * camera.height);
  out.mirror_mask.resize(out.pixels.size(), 0);
  return out;
}

}  // namespace

RenderOutput render_image(const Camera& camera, const RenderScene& scene,
                          const IntegratorConfig& config, std::uint64_t seed) {
  const Integrator integrator(scene, config);
  RenderOutput out = make_output(camera);
  const long count = static_cast<long>(out.pixels.size());
  std::exception_ptr error;
#pragma omp parallel
  {
    Tape tape;
#pragma omp for schedule(dynamic, 8)
    for (long i = 0; i < count; ++i) {
      try {
        render_pixel(integrator, camera, seed, static_cast<int>(i % camera.width),
                     static_cast<int>(i / camera.width), tape, out);
      } catch (...) {
#pragma omp critical(mirrorfield_render_error)
        if (!error) error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

RenderOutput render_image_serial(const Camera& camera, const RenderScene& scene,
                                 const IntegratorConfig& config, std::uint64_t seed) {
  const Integrator integrator(scene, config);
  RenderOutput out = make_output(camera);
  Tape tape;
  for (int v = 0; v < camera.height; ++v) {
    for (int u = 0; u < camera.width; ++u) render_pixel(integrator, camera, seed, u, v, tape, out);
  }
  return out;
}

}  // namespace mirrorfield

#include "mirrorfield/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>

#include "mirrorfield/error.hpp"

namespace mirrorfield {

namespace {

// Stream branches for the different consumers of the training seed.
constexpr std::uint64_t kBatchBranch = 0x6261746368ULL;
constexpr std::uint64_t kRayBranch = 0x726179ULL;
constexpr std::uint64_t kProbeSeed = 0x70726f6265ULL;

// Rays rendered and differentiated together; bounds the memory of the tapes.
constexpr std::size_t kRayChunk = 256;
// Queries per gradient task; fixed so the reduction order does not depend on
// the thread count.
constexpr std::size_t kQueryChunk = 2048;

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::Config, m); };
  if (!(learning_rate > 0)) fail("learning_rate must be > 0");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) fail("betas must be in [0, 1)");
  if (!(epsilon > 0)) fail("epsilon must be > 0");
  if (batch_rays < 1) fail("batch_rays must be >= 1");
  if (iterations < 0) fail("iterations must be >= 0");
  if (!(coarse_loss_weight >= 0)) fail("coarse_loss_weight must be >= 0");
  if (log_every < 1) fail("log_every must be >= 1");
  if (checkpoint_every < 0) fail("checkpoint_every must be >= 0");
}

TrainState TrainState::fresh(std::vector<double> params) {
  TrainState s;
  s.m.assign(params.size(), 0.0);
  s.v.assign(params.size(), 0.0);
  s.params = std::move(params);
  return s;
}

void TrainState::validate() const {
  if (m.size() != params.size() || v.size() != params.size()) {
    throw Error(ErrorKind::ShapeMismatch, "Adam moments must match the parameter count");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!std::isfinite(m[i]) || !std::isfinite(v[i]) || !std::isfinite(params[i])) {
      throw Error(ErrorKind::Data, "training state has non-finite entries");
    }
  }
}

void save_train_state(const std::filesystem::path& path, const TrainState& s) {
  s.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  auto put = [&](std::uint64_t v, int bytes) {
    unsigned char b[8];
    for (int i = 0; i < bytes; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), bytes);
  };
  out.write("MFTS", 4);
  put(1, 4);
  put(s.iteration, 8);
  put(s.skipped_batches, 8);
  put(s.params.size(), 8);
  for (const auto* vec : {&s.params, &s.m, &s.v}) {
    for (const double x : *vec) put(std::bit_cast<std::uint64_t>(x), 8);
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

TrainState load_train_state(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  auto get = [&](int bytes) {
    unsigned char b[8] = {};
    if (!in.read(reinterpret_cast<char*>(b), bytes)) {
      throw Error(ErrorKind::Data, "truncated training state " + path.string());
    }
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  };
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "MFTS") {
    throw Error(ErrorKind::Data, "not a training state file: " + path.string());
  }
  if (get(4) != 1) throw Error(ErrorKind::Data, "unsupported training state version");
  TrainState s;
  s.iteration = get(8);
  s.skipped_batches = get(8);
  const std::uint64_t n = get(8);
  if (n > (std::uint64_t{1} << 32)) throw Error(ErrorKind::Data, "implausible parameter count");
  for (auto* vec : {&s.params, &s.m, &s.v}) {
    vec->resize(n);
    for (double& x : *vec) x = std::bit_cast<double>(get(8));
  }
  s.validate();
  return s;
}

void Dataset::validate() const {
  if (cameras.empty()) throw Error(ErrorKind::Data, "dataset has no images");
  if (cameras.size() != images.size()) {
    throw Error(ErrorKind::ShapeMismatch, "dataset needs one image per camera");
  }
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    if (cameras[i].width != images[i].width || cameras[i].height != images[i].height) {
      throw Error(ErrorKind::ShapeMismatch, "image size differs from its camera");
    }
  }
}

double photometric_loss(std::span<const Vec3> predicted, std::span<const Vec3> target) {
  if (predicted.size() != target.size()) {
    throw Error(ErrorKind::ShapeMismatch, "photometric_loss: size mismatch");
  }
  if (predicted.empty()) throw Error(ErrorKind::InvalidArgument, "photometric_loss: empty batch");
  double sum = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const Vec3 d = target[i] - predicted[i];
    sum += dot(d, d);
  }
  return sum / static_cast<double>(predicted.size());
}

void adam_step(TrainState& s, std::span<const double> g, const TrainConfig& c) {
  if (g.size() != s.params.size()) {
    throw Error(ErrorKind::ShapeMismatch, "gradient length differs from the parameter count");
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i])) {
      throw Error(ErrorKind::NonFiniteGradient,
                  "entry " + std::to_string(i) + " at iteration " + std::to_string(s.iteration));
    }
  }
  const double t = static_cast<double>(s.iteration + 1);
  const double c1 = 1.0 - std::pow(c.beta1, t);
  const double c2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < g.size(); ++i) {
    s.m[i] = c.beta1 * s.m[i] + (1.0 - c.beta1) * g[i];
    s.v[i] = c.beta2 * s.v[i] + (1.0 - c.beta2) * g[i] * g[i];
    const double m_hat = s.m[i] / c1;
    const double v_hat = s.v[i] / c2;
    s.params[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
  ++s.iteration;
}

RayBatch sample_ray_batch(const Dataset& dataset, int batch_rays, Rng& rng, double t_near,
                          double t_far) {
  dataset.validate();
  if (batch_rays < 1) throw Error(ErrorKind::InvalidArgument, "batch_rays must be >= 1");
  std::vector<std::uint64_t> offsets{0};
  for (const Camera& c : dataset.cameras) {
    offsets.push_back(offsets.back() + static_cast<std::uint64_t>(c.width) * c.height);
  }
  RayBatch b;
  b.rays.reserve(static_cast<std::size_t>(batch_rays));
  b.colors.reserve(static_cast<std::size_t>(batch_rays));
  for (int i = 0; i < batch_rays; ++i) {
    const std::uint64_t k = rng.uniform_int(offsets.back());
    const auto it = std::upper_bound(offsets.begin(), offsets.end(), k);
    const auto img = static_cast<std::size_t>(it - offsets.begin() - 1);
    const Camera& c = dataset.cameras[img];
    const std::uint64_t local = k - offsets[img];
    const int u = static_cast<int>(local % static_cast<std::uint64_t>(c.width));
    const int v = static_cast<int>(local / static_cast<std::uint64_t>(c.width));
    b.rays.push_back(camera_ray(c, u, v, t_near, t_far));
    b.colors.push_back(dataset.images[img].at(u, v));
  }
  return b;
}

namespace {

struct RayGrad {
  // Queries with a nonzero adjoint, per network (0 fine, 1 coarse).
  std::vector<FieldQuery> queries[2];
  std::vector<SampleAdjoint> adjoints[2];
  double coarse_sq = 0, fine_sq = 0;
};

bool nonzero(const SampleAdjoint& a) {
  return a.density != 0 || a.color.x != 0 || a.color.y != 0 || a.color.z != 0;
}

void accumulate_network(const MlpField& field, const std::vector<FieldQuery>& qs,
                        const std::vector<SampleAdjoint>& adj, std::span<double> gradient) {
  if (qs.empty()) return;
  const std::size_t chunks = (qs.size() + kQueryChunk - 1) / kQueryChunk;
  std::vector<std::vector<double>> partial(chunks);
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 1)
  for (long c = 0; c < static_cast<long>(chunks); ++c) {
    try {
      const std::size_t begin = static_cast<std::size_t>(c) * kQueryChunk;
      const std::size_t count = std::min(kQueryChunk, qs.size() - begin);
      partial[static_cast<std::size_t>(c)].assign(gradient.size(), 0.0);
      field.accumulate_gradient(std::span(qs).subspan(begin, count),
                                std::span(adj).subspan(begin, count),
                                partial[static_cast<std::size_t>(c)]);
    } catch (...) {
#pragma omp critical(mirrorfield_grad_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  for (const std::vector<double>& p : partial) {
    for (std::size_t i = 0; i < gradient.size(); ++i) gradient[i] += p[i];
  }
}

}  // namespace

std::pair<double, double> loss_and_gradient(const TrainSetup& setup, const IntegratorConfig& ic,
                                            const TrainConfig& tc, const RayBatch& batch,
                                            std::uint64_t iteration, std::span<double> gradient) {
  if (setup.field == nullptr) throw Error(ErrorKind::InvalidArgument, "no field to train");
  const bool twin = tc.twin_networks;
  if (twin && setup.coarse_field == nullptr) {
    throw Error(ErrorKind::InvalidArgument, "twin networks need a coarse field");
  }
  const std::size_t n_fine = setup.field->parameters().size();
  const std::size_t n_total = n_fine + (twin ? setup.coarse_field->parameters().size() : 0);
  if (gradient.size() != n_total) {
    throw Error(ErrorKind::ShapeMismatch, "gradient buffer does not match the networks");
  }
  if (batch.rays.size() != batch.colors.size() || batch.rays.empty()) {
    throw Error(ErrorKind::ShapeMismatch, "ray batch needs one color per ray");
  }

  RenderScene scene;
  scene.field = setup.field;
  scene.coarse_field = twin ? setup.coarse_field : nullptr;
  scene.mirrors = setup.mirrors;
  scene.t_near = setup.t_near;
  scene.t_far = setup.t_far;
  const Integrator integrator(scene, ic);

  const std::size_t n = batch.rays.size();
  const double scale = 2.0 / static_cast<double>(n);
  double coarse_sum = 0, fine_sum = 0;
  std::vector<RayGrad> grads;
  for (std::size_t start = 0; start < n; start += kRayChunk) {
    const std::size_t count = std::min(kRayChunk, n - start);
    grads.assign(count, RayGrad{});
    std::exception_ptr error;
#pragma omp parallel
    {
      Tape tape;
#pragma omp for schedule(dynamic, 1)
      for (long j = 0; j < static_cast<long>(count); ++j) {
        try {
          const std::size_t i = start + static_cast<std::size_t>(j);
          Rng rng(tc.seed, (iteration << 24) | i, 0, kRayBranch);
          tape.clear();
          const RadianceResult r = integrator.render_ray(batch.rays[i], rng, tape);
          const Vec3 df = r.color - batch.colors[i];
          const Vec3 dc = r.coarse_color - batch.colors[i];
          RayGrad& g = grads[static_cast<std::size_t>(j)];
          g.fine_sq = dot(df, df);
          g.coarse_sq = dot(dc, dc);
          const std::pair<std::int32_t, Vec3> roots[2] = {
              {r.node, scale * df}, {r.coarse_node, (tc.coarse_loss_weight * scale) * dc}};
          const std::vector<SampleAdjoint> adj = tape.backward(roots);
          for (std::size_t q = 0; q < adj.size(); ++q) {
            if (!nonzero(adj[q])) continue;
            const int net = tape.networks()[q];
            g.queries[net].push_back(tape.queries()[q]);
            g.adjoints[net].push_back(adj[q]);
          }
        } catch (...) {
#pragma omp critical(mirrorfield_train_error)
          if (!error) error = std::current_exception();
        }
      }
    }
    if (error) std::rethrow_exception(error);

    for (int net = 0; net < (twin ? 2 : 1); ++net) {
      std::vector<FieldQuery> qs;
      std::vector<SampleAdjoint> adj;
      for (const RayGrad& g : grads) {
        qs.insert(qs.end(), g.queries[net].begin(), g.queries[net].end());
        adj.insert(adj.end(), g.adjoints[net].begin(), g.adjoints[net].end());
      }
      const MlpField& field = net == 0 ? *setup.field : *setup.coarse_field;
      accumulate_network(field, qs, adj,
                         net == 0 ? gradient.subspan(0, n_fine) : gradient.subspan(n_fine));
    }
    for (const RayGrad& g : grads) {
      coarse_sum += g.coarse_sq;
      fine_sum += g.fine_sq;
    }
  }
  return {coarse_sum / static_cast<double>(n), fine_sum / static_cast<double>(n)};
}

namespace {

void load_into_fields(const TrainSetup& setup, const TrainConfig& tc, const TrainState& s) {
  const std::size_t n_fine = setup.field->parameters().size();
  setup.field->set_parameters({s.params.begin(), s.params.begin() + static_cast<long>(n_fine)});
  if (tc.twin_networks) {
    setup.coarse_field->set_parameters(
        {s.params.begin() + static_cast<long>(n_fine), s.params.end()});
  }
}

}  // namespace

double render_psnr(const Camera& camera, const Image& reference, const RenderScene& scene,
                   const IntegratorConfig& ic, std::uint64_t seed) {
  const RenderOutput out = render_image(camera, scene, ic, seed);
  Image img(out.width, out.height);
  img.pixels = out.pixels;
  return psnr(srgb8_view(img), srgb8_view(reference));
}

std::vector<LossRecord> train(const Dataset& dataset, const TrainSetup& setup,
                              const IntegratorConfig& ic, const TrainConfig& tc, TrainState& state,
                              const TrainHooks& hooks) {
  tc.validate();
  ic.validate();
  dataset.validate();
  state.validate();
  if (setup.field == nullptr || (tc.twin_networks && setup.coarse_field == nullptr)) {
    throw Error(ErrorKind::InvalidArgument, "train: missing network");
  }
  const std::size_t n_total =
      setup.field->parameters().size() +
      (tc.twin_networks ? setup.coarse_field->parameters().size() : 0);
  if (state.params.size() != n_total) {
    throw Error(ErrorKind::ShapeMismatch, "training state does not match the networks");
  }
  setup.field->set_precision(tc.precision);
  if (tc.twin_networks) setup.coarse_field->set_precision(tc.precision);
  load_into_fields(setup, tc, state);

  RenderScene probe_scene;
  probe_scene.field = setup.field;
  probe_scene.coarse_field = tc.twin_networks ? setup.coarse_field : nullptr;
  probe_scene.mirrors = setup.mirrors;
  probe_scene.t_near = setup.t_near;
  probe_scene.t_far = setup.t_far;

  std::vector<LossRecord> history;
  std::vector<double> gradient(n_total);
  for (auto it = state.iteration; it < static_cast<std::uint64_t>(tc.iterations); ++it) {
    Rng batch_rng(tc.seed, it, 0, kBatchBranch);
    const RayBatch batch =
        sample_ray_batch(dataset, tc.batch_rays, batch_rng, setup.t_near, setup.t_far);
    std::fill(gradient.begin(), gradient.end(), 0.0);
    const auto [coarse_loss, fine_loss] = loss_and_gradient(setup, ic, tc, batch, it, gradient);
    try {
      adam_step(state, gradient, tc);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NonFiniteGradient) throw;
      ++state.skipped_batches;
      ++state.iteration;
    }
    load_into_fields(setup, tc, state);

    const std::uint64_t done = it + 1;
    if (done % static_cast<std::uint64_t>(tc.log_every) == 0 ||
        done == static_cast<std::uint64_t>(tc.iterations)) {
      LossRecord rec{done, coarse_loss, fine_loss, std::numeric_limits<double>::quiet_NaN()};
      if (setup.probe_camera && setup.probe_image) {
        rec.psnr_probe =
            render_psnr(*setup.probe_camera, *setup.probe_image, probe_scene, ic, kProbeSeed);
      }
      history.push_back(rec);
      if (hooks.on_log) hooks.on_log(rec);
    }
    if (tc.checkpoint_every > 0 && done % static_cast<std::uint64_t>(tc.checkpoint_every) == 0 &&
        hooks.on_checkpoint) {
      hooks.on_checkpoint(state);
    }
  }
  return history;
}

}  // namespace mirrorfield

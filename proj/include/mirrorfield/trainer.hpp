#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "mirrorfield/camera.hpp"
#include "mirrorfield/image.hpp"
#include "mirrorfield/integrator.hpp"
#include "mirrorfield/mlp.hpp"

namespace mirrorfield {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  int batch_rays = 1 << 14;
  int iterations = 0;
  std::uint64_t seed = 0;
  double coarse_loss_weight = 1.0;
  // Separate coarse network instead of one network for both passes.
  bool twin_networks = false;
  // Network arithmetic (parameters and the optimizer stay in double).
  Precision precision = Precision::Float32;
  // Loss history interval; the probe view is rendered at the same interval.
  int log_every = 100;
  // 0 disables periodic checkpoints.
  int checkpoint_every = 0;

  void validate() const;
};

// Parameters of all networks (fine first, then coarse when twin) and the
// Adam moments.
struct TrainState {
  std::vector<double> params;
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t iteration = 0;
  std::uint64_t skipped_batches = 0;

  static TrainState fresh(std::vector<double> params);
  void validate() const;
};

// Binary, little-endian doubles: "MFTS", u32 version, u64 iteration,
// u64 skipped, u64 n, then params, m, v.
void save_train_state(const std::filesystem::path& path, const TrainState& state);
TrainState load_train_state(const std::filesystem::path& path);

struct Dataset {
  std::vector<Camera> cameras;
  std::vector<Image> images;

  void validate() const;
};

struct RayBatch {
  std::vector<Ray> rays;
  std::vector<Vec3> colors;
};

// (1/|R|) sum ||target - predicted||^2.
double photometric_loss(std::span<const Vec3> predicted, std::span<const Vec3> target);

// One Adam step with bias correction. Throws NonFiniteGradient (and leaves
// the state untouched) if the gradient has a NaN/inf entry.
void adam_step(TrainState& state, std::span<const double> gradient, const TrainConfig& config);

// Uniformly random pixels over all images; rays span [t_near, t_far].
RayBatch sample_ray_batch(const Dataset& dataset, int batch_rays, Rng& rng, double t_near,
                          double t_far);

struct LossRecord {
  std::uint64_t iteration = 0;
  double coarse_loss = 0;
  double fine_loss = 0;
  // NaN when no probe view is configured.
  double psnr_probe = 0;
};

// Networks being trained plus the fixed parts of the scene. Escaping rays
// pick up IntegratorConfig::background_color.
struct TrainSetup {
  MlpField* field = nullptr;
  MlpField* coarse_field = nullptr;  // required when twin_networks
  std::span<const MirrorSurface> mirrors;
  double t_near = 0.0;
  double t_far = 10.0;
  // Probe view for the loss history (optional).
  std::optional<Camera> probe_camera;
  std::optional<Image> probe_image;
};

struct TrainHooks {
  std::function<void(const LossRecord&)> on_log;
  // Called with the state after every checkpoint_every-th iteration.
  std::function<void(const TrainState&)> on_checkpoint;
};

// Gradient of the batch loss with respect to all parameters for the current
// network parameters. Returns (coarse loss, fine loss).
std::pair<double, double> loss_and_gradient(const TrainSetup& setup, const IntegratorConfig& ic,
                                            const TrainConfig& tc, const RayBatch& batch,
                                            std::uint64_t iteration, std::span<double> gradient);

// Runs iterations state.iteration .. config.iterations - 1. Network
// parameters are taken from `state` and written back to the fields.
std::vector<LossRecord> train(const Dataset& dataset, const TrainSetup& setup,
                              const IntegratorConfig& ic, const TrainConfig& tc, TrainState& state,
                              const TrainHooks& hooks = {});

// PSNR of a render against the reference on 8-bit sRGB values.
double render_psnr(const Camera& camera, const Image& reference, const RenderScene& scene,
                   const IntegratorConfig& ic, std::uint64_t seed);

}  // namespace mirrorfield

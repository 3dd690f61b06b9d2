#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mirrorfield/field.hpp"

namespace mirrorfield {

struct EncodingConfig {
  int levels_position = 10;
  int levels_direction = 4;
  // Also feed the raw (un-encoded) coordinates.
  bool include_raw = true;

  int position_dim() const { return 6 * levels_position + (include_raw ? 3 : 0); }
  int direction_dim() const { return 6 * levels_direction + (include_raw ? 3 : 0); }
};

enum class Activation : std::uint32_t { Relu = 0, Softplus = 1 };

enum class Precision : std::uint32_t { Float64 = 0, Float32 = 1 };

// Trunk of `hidden_layers` x `width` on the encoded position, with the
// encoded position concatenated again into the input of layer `skip_layer`
// (no skip if skip_layer <= 0 or >= hidden_layers). Density is
// softplus(linear(trunk)); color goes through a feature layer, is joined
// with the encoded direction, one hidden layer of `color_width`, then a
// sigmoid.
struct MlpArchitecture {
  int hidden_layers = 4;
  int width = 128;
  int skip_layer = 2;
  int color_width = 64;
  Activation hidden_activation = Activation::Relu;
  EncodingConfig encoding;

  std::size_t parameter_count() const;
  void validate() const;
  friend bool operator==(const MlpArchitecture& a, const MlpArchitecture& b);
};

// Upstream adjoint dLoss/d(output) for one field query.
struct SampleAdjoint {
  double density = 0;
  Vec3 color;
};

class MlpField final : public RadianceField {
 public:
  MlpField(const MlpArchitecture& architecture, std::vector<double> parameters);

  // Glorot-uniform weights, zero biases; the draws are float32-representable
  // so a fresh network round-trips through a checkpoint exactly.
  static MlpField init(const MlpArchitecture& architecture, std::uint64_t seed);

  const MlpArchitecture& architecture() const { return arch_; }
  std::span<const double> parameters() const { return params_; }
  void set_parameters(std::vector<double> parameters);

  // Arithmetic used by query_batch and backward. Float32 halves the cost of
  // the matrix products; gradient checks need Float64.
  void set_precision(Precision p);
  Precision precision() const { return precision_; }

  FieldSample query(const FieldQuery& q) const override;
  void query_batch(std::span<const FieldQuery> qs, std::span<FieldSample> out) const override;

  // Adds dLoss/dTheta for the given queries and upstream adjoints into
  // `gradient`. The forward pass is recomputed. Queries are processed in
  // fixed blocks in order, so the summation order depends only on the batch.
  void accumulate_gradient(std::span<const FieldQuery> qs, std::span<const SampleAdjoint> upstream,
                           std::span<double> gradient) const;

  std::vector<double> query_batch_with_gradients(std::span<const FieldQuery> qs,
                                                 std::span<const SampleAdjoint> upstream) const;

  static constexpr std::size_t kBlock = 256;

 private:
  MlpArchitecture arch_;
  std::vector<double> params_;
  std::vector<float> params_f32_;
  Precision precision_ = Precision::Float64;
};

// Checkpoint layout (all little-endian):
//   char[4] "MFCK", u32 version (=1),
//   u32 hidden_layers, width, skip_layer, color_width, hidden_activation,
//   u32 levels_position, levels_direction, include_raw,
//   u64 parameter_count, float32[parameter_count].
void save_checkpoint(const std::filesystem::path& path, const MlpField& field);
MlpField load_checkpoint(const std::filesystem::path& path);

}  // namespace mirrorfield

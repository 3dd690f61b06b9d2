#include "config.hpp"

#include <set>

#include "mirrorfield/error.hpp"

namespace mirrorfield::cli {

namespace {

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::Config, where + " must be an object");
  for (const auto& item : j.items()) {
    if (!allowed.contains(item.key())) {
      throw Error(ErrorKind::Config, "unknown key " + where + "." + item.key());
    }
  }
}

template <typename T>
void read(const Json& j, const char* key, T& out, const std::string& where) {
  out = get_field_or<T>(j, key, out, where, ErrorKind::Config);
}

}  // namespace

std::string to_string(EstimatorMode m) {
  switch (m) {
    case EstimatorMode::Dense: return "dense";
    case EstimatorMode::Sparse: return "sparse";
    case EstimatorMode::Delta: return "delta";
  }
  return "dense";
}

EstimatorMode estimator_mode_from_string(const std::string& s) {
  if (s == "dense") return EstimatorMode::Dense;
  if (s == "sparse") return EstimatorMode::Sparse;
  if (s == "delta") return EstimatorMode::Delta;
  throw Error(ErrorKind::Config, "unknown estimator mode '" + s + "' (dense, sparse, delta)");
}

std::string to_string(Precision p) { return p == Precision::Float32 ? "float32" : "float64"; }

Precision precision_from_string(const std::string& s) {
  if (s == "float32") return Precision::Float32;
  if (s == "float64") return Precision::Float64;
  throw Error(ErrorKind::Config, "unknown precision '" + s + "' (float32, float64)");
}

Json to_json(const IntegratorConfig& c) {
  Json j = {{"k_coarse", c.k_coarse},
            {"k_fine", c.k_fine},
            {"n_dirs", c.n_dirs},
            {"max_bounce_depth", c.max_bounce_depth},
            {"t_near_offset", c.t_near_offset},
            {"estimator", to_string(c.estimator_mode)},
            {"trace_reflections", c.trace_reflections},
            {"fine_on_bounces", c.fine_on_bounces},
            {"shared_directions", c.shared_directions},
            {"detach_brdf_transmittance", c.detach_brdf_transmittance},
            {"grazing_cosine", c.grazing_cosine}};
  j["alpha_override"] = c.alpha_override ? Json(*c.alpha_override) : Json(nullptr);
  return j;
}

IntegratorConfig integrator_config_from_json(const Json& j, IntegratorConfig c) {
  const std::string w = "integrator";
  check_keys(j,
             {"k_coarse", "k_fine", "n_dirs", "max_bounce_depth", "t_near_offset", "estimator",
              "trace_reflections", "fine_on_bounces", "shared_directions",
              "detach_brdf_transmittance", "grazing_cosine", "alpha_override"},
             w);
  read(j, "k_coarse", c.k_coarse, w);
  read(j, "k_fine", c.k_fine, w);
  read(j, "n_dirs", c.n_dirs, w);
  read(j, "max_bounce_depth", c.max_bounce_depth, w);
  read(j, "t_near_offset", c.t_near_offset, w);
  if (j.contains("estimator")) {
    c.estimator_mode = estimator_mode_from_string(get_field<std::string>(j, "estimator", w, ErrorKind::Config));
  }
  read(j, "trace_reflections", c.trace_reflections, w);
  read(j, "fine_on_bounces", c.fine_on_bounces, w);
  read(j, "shared_directions", c.shared_directions, w);
  read(j, "detach_brdf_transmittance", c.detach_brdf_transmittance, w);
  read(j, "grazing_cosine", c.grazing_cosine, w);
  if (j.contains("alpha_override")) {
    if (j["alpha_override"].is_null()) {
      c.alpha_override.reset();
    } else {
      c.alpha_override = get_field<double>(j, "alpha_override", w, ErrorKind::Config);
    }
  }
  c.validate();
  return c;
}

Json to_json(const MlpArchitecture& a) {
  return {{"hidden_layers", a.hidden_layers},
          {"width", a.width},
          {"skip_layer", a.skip_layer},
          {"color_width", a.color_width},
          {"activation", a.hidden_activation == Activation::Relu ? "relu" : "softplus"},
          {"levels_position", a.encoding.levels_position},
          {"levels_direction", a.encoding.levels_direction},
          {"include_raw", a.encoding.include_raw}};
}

MlpArchitecture architecture_from_json(const Json& j, MlpArchitecture a) {
  const std::string w = "network";
  check_keys(j,
             {"hidden_layers", "width", "skip_layer", "color_width", "activation",
              "levels_position", "levels_direction", "include_raw"},
             w);
  read(j, "hidden_layers", a.hidden_layers, w);
  read(j, "width", a.width, w);
  read(j, "skip_layer", a.skip_layer, w);
  read(j, "color_width", a.color_width, w);
  if (j.contains("activation")) {
    const auto s = get_field<std::string>(j, "activation", w, ErrorKind::Config);
    if (s == "relu") {
      a.hidden_activation = Activation::Relu;
    } else if (s == "softplus") {
      a.hidden_activation = Activation::Softplus;
    } else {
      throw Error(ErrorKind::Config, "unknown activation '" + s + "'");
    }
  }
  read(j, "levels_position", a.encoding.levels_position, w);
  read(j, "levels_direction", a.encoding.levels_direction, w);
  read(j, "include_raw", a.encoding.include_raw, w);
  try {
    a.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, e.what());
  }
  return a;
}

Json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"batch_rays", c.batch_rays},
          {"iterations", c.iterations},
          {"coarse_loss_weight", c.coarse_loss_weight},
          {"twin_networks", c.twin_networks},
          {"precision", to_string(c.precision)},
          {"log_every", c.log_every},
          {"checkpoint_every", c.checkpoint_every}};
}

TrainConfig train_config_from_json(const Json& j, TrainConfig c) {
  const std::string w = "train";
  check_keys(j,
             {"learning_rate", "beta1", "beta2", "epsilon", "batch_rays", "iterations",
              "coarse_loss_weight", "twin_networks", "precision", "log_every",
              "checkpoint_every"},
             w);
  read(j, "learning_rate", c.learning_rate, w);
  read(j, "beta1", c.beta1, w);
  read(j, "beta2", c.beta2, w);
  read(j, "epsilon", c.epsilon, w);
  read(j, "batch_rays", c.batch_rays, w);
  read(j, "iterations", c.iterations, w);
  read(j, "coarse_loss_weight", c.coarse_loss_weight, w);
  read(j, "twin_networks", c.twin_networks, w);
  if (j.contains("precision")) {
    c.precision = precision_from_string(get_field<std::string>(j, "precision", w, ErrorKind::Config));
  }
  read(j, "log_every", c.log_every, w);
  read(j, "checkpoint_every", c.checkpoint_every, w);
  c.validate();
  return c;
}

void merge_json(Json& target, const Json& patch) {
  if (!patch.is_object() || !target.is_object()) {
    target = patch;
    return;
  }
  for (const auto& item : patch.items()) {
    if (target.contains(item.key())) {
      merge_json(target[item.key()], item.value());
    } else {
      target[item.key()] = item.value();
    }
  }
}

}  // namespace mirrorfield::cli

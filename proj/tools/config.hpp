#pragma once

#include <string>

#include "mirrorfield/integrator.hpp"
#include "mirrorfield/json_io.hpp"
#include "mirrorfield/mlp.hpp"
#include "mirrorfield/trainer.hpp"

namespace mirrorfield::cli {

// JSON views of the configuration structs. The readers start from `base`
// and only replace keys present in `j`; unknown keys are a Config error.
Json to_json(const IntegratorConfig& c);
IntegratorConfig integrator_config_from_json(const Json& j, IntegratorConfig base = {});

Json to_json(const MlpArchitecture& a);
MlpArchitecture architecture_from_json(const Json& j, MlpArchitecture base = {});

// Training hyperparameters (everything in TrainConfig).
Json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const Json& j, TrainConfig base = {});

std::string to_string(EstimatorMode m);
EstimatorMode estimator_mode_from_string(const std::string& s);
std::string to_string(Precision p);
Precision precision_from_string(const std::string& s);

// Deep merge: objects merge key by key, anything else in `patch` replaces.
void merge_json(Json& target, const Json& patch);

}  // namespace mirrorfield::cli

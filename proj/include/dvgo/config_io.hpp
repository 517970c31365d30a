#pragma once

#include <string>

#include "dvgo/trainer.hpp"

namespace dvgo {

/// Structured-text (JSON) round trip of the full training configuration.
std::string config_to_json(const TrainConfig& cfg);
void apply_config_json(TrainConfig& cfg, const std::string& json_text);

void save_config(const TrainConfig& cfg, const std::string& path);
void load_config_file(TrainConfig& cfg, const std::string& path);

}  // namespace dvgo

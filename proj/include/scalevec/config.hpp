#pragma once

#include <filesystem>

#include "json.hpp"
#include "scalevec/cbow.hpp"

namespace scalevec {

nlohmann::json to_json(const TrainConfig& config);

// Overlays the keys present in `json` onto `base`. Unknown keys, wrong types
// and invalid values raise ConfigError naming the key.
TrainConfig apply_config(TrainConfig base, const nlohmann::json& json);

// Reads a JSON object of TrainConfig keys. Does not validate: beta may still
// be supplied on the command line.
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {});

}  // namespace scalevec

#include "scalevec/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>

namespace scalevec {

using nlohmann::json;

namespace {

// JSON has no infinity; subsampling off is written as the string "inf".
json encode_threshold(double t) { return std::isinf(t) ? json("inf") : json(t); }

double decode_threshold(const json& value) {
    if (value.is_string()) {
        if (value.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
        throw ConfigError("subsample_t: expected a number or \"inf\"");
    }
    if (!value.is_number()) throw ConfigError("subsample_t: expected a number or \"inf\"");
    return value.get<double>();
}

template <typename T>
T unsigned_field(const json& value, const std::string& key) {
    if (!value.is_number_integer() || value.get<long long>() < 0) {
        throw ConfigError(key + ": expected a non-negative integer");
    }
    const auto v = value.get<unsigned long long>();
    if (v > std::numeric_limits<T>::max()) throw ConfigError(key + ": value out of range");
    return static_cast<T>(v);
}

double real_field(const json& value, const std::string& key) {
    if (!value.is_number()) throw ConfigError(key + ": expected a number");
    return value.get<double>();
}

}  // namespace

json to_json(const TrainConfig& c) {
    return json{{"dim", c.dim},
                {"beta", c.beta},
                {"negative", c.negative},
                {"subsample_t", encode_threshold(c.subsample_t)},
                {"iterations", c.iterations},
                {"workers", c.workers},
                {"alpha0", c.alpha0},
                {"min_alpha_fraction", c.min_alpha_fraction},
                {"seed", c.seed},
                {"context_mode", to_string(c.context_mode)}};
}

TrainConfig apply_config(TrainConfig c, const json& j) {
    if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key == "dim") c.dim = unsigned_field<std::uint32_t>(value, key);
        else if (key == "beta") c.beta = unsigned_field<std::uint32_t>(value, key);
        else if (key == "negative") c.negative = unsigned_field<std::uint32_t>(value, key);
        else if (key == "subsample_t") c.subsample_t = decode_threshold(value);
        else if (key == "iterations") c.iterations = unsigned_field<std::uint32_t>(value, key);
        else if (key == "workers") c.workers = unsigned_field<std::uint32_t>(value, key);
        else if (key == "alpha0") c.alpha0 = real_field(value, key);
        else if (key == "min_alpha_fraction") c.min_alpha_fraction = real_field(value, key);
        else if (key == "seed") c.seed = unsigned_field<std::uint64_t>(value, key);
        else if (key == "context_mode") {
            if (!value.is_string()) throw ConfigError("context_mode: expected a string");
            c.context_mode = parse_context_mode(value.get<std::string>());
        } else {
            throw ConfigError("unknown configuration key '" + key + "'");
        }
    }
    return c;
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return apply_config(base, j);
}

}  // namespace scalevec

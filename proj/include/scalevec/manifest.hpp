#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace scalevec {

inline constexpr const char* kToolVersion = "0.1.0";

// Append-only JSON log of the commands run against one output directory. Each
// entry records the effective configuration, the corpus fingerprint, the
// produced files and a UTC timestamp.
class RunManifest {
public:
    static constexpr const char* kFileName = "run_manifest.json";

    static RunManifest open(const std::filesystem::path& dir);

    void record(const std::string& command, const nlohmann::json& config, std::uint64_t corpus_fingerprint,
                const std::vector<std::filesystem::path>& outputs, const std::vector<std::string>& arguments);
    void save() const;

    const nlohmann::json& document() const { return doc_; }
    std::filesystem::path path() const { return dir_ / kFileName; }

private:
    std::filesystem::path dir_;
    nlohmann::json doc_;
};

std::string utc_timestamp();

}  // namespace scalevec

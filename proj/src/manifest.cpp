#include "scalevec/manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "scalevec/common.hpp"

namespace scalevec {

namespace fs = std::filesystem;

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

RunManifest RunManifest::open(const fs::path& dir) {
    RunManifest m;
    m.dir_ = dir;
    const fs::path file = dir / kFileName;
    if (fs::exists(file)) {
        std::ifstream in(file);
        try {
            in >> m.doc_;
        } catch (const nlohmann::json::exception& e) {
            throw IntegrityError("malformed run manifest " + file.string() + ": " + e.what());
        }
    } else {
        m.doc_ = {{"tool", "scalevec"}, {"tool_version", kToolVersion}, {"entries", nlohmann::json::array()}};
    }
    return m;
}

void RunManifest::record(const std::string& command, const nlohmann::json& config, std::uint64_t corpus_fingerprint,
                         const std::vector<fs::path>& outputs, const std::vector<std::string>& arguments) {
    nlohmann::json files = nlohmann::json::array();
    for (const auto& p : outputs) files.push_back(fs::absolute(p).lexically_normal().string());
    doc_["entries"].push_back({{"command", command},
                               {"timestamp", utc_timestamp()},
                               {"tool_version", kToolVersion},
                               {"config", config},
                               {"corpus_fingerprint", corpus_fingerprint},
                               {"outputs", files},
                               {"arguments", arguments}});
}

void RunManifest::save() const {
    fs::create_directories(dir_);
    const fs::path file = path();
    const fs::path tmp = file.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw IoError("cannot write run manifest: " + tmp.string());
        out << doc_.dump(2) << '\n';
    }
    fs::rename(tmp, file);
}

}  // namespace scalevec

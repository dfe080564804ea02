#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

namespace treenav {

inline constexpr const char* kToolkitVersion = "0.1.0";

/// Provenance record written to every output directory before long runs:
/// config echo, content hash of the input data, seed, version, timestamps.
struct RunManifest {
    nlohmann::json config;
    std::string data_hash;
    std::uint64_t seed = 0;
    std::string version = kToolkitVersion;
    std::string created_utc;

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);

    /// Writes dir/manifest.json (creates the directory if needed).
    void write(const std::string& dir) const;
    static RunManifest read(const std::string& dir);
};

/// FNV-1a 64 over the dataset files in fixed order (docs.jsonl, qa.jsonl),
/// hex-encoded. Missing files hash as absent markers, not errors.
std::string hash_dataset_dir(const std::string& dir);

std::string utc_timestamp();

}  // namespace treenav

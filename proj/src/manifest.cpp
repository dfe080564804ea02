#include "treenav/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace treenav {

nlohmann::json RunManifest::to_json() const {
    return {{"config", config},
            {"data_hash", data_hash},
            {"seed", seed},
            {"version", version},
            {"created_utc", created_utc}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
    RunManifest m;
    m.config = j.value("config", nlohmann::json::object());
    m.data_hash = j.value("data_hash", std::string());
    m.seed = j.value("seed", std::uint64_t{0});
    m.version = j.value("version", std::string(kToolkitVersion));
    m.created_utc = j.value("created_utc", std::string());
    return m;
}

void RunManifest::write(const std::string& dir) const {
    std::filesystem::create_directories(dir);
    std::ofstream out(std::filesystem::path(dir) / "manifest.json");
    if (!out) throw std::runtime_error("manifest: cannot write to " + dir);
    out << to_json().dump(2) << "\n";
}

RunManifest RunManifest::read(const std::string& dir) {
    std::ifstream in(std::filesystem::path(dir) / "manifest.json");
    if (!in) throw std::runtime_error("manifest: not found in " + dir);
    nlohmann::json j;
    in >> j;
    return from_json(j);
}

std::string hash_dataset_dir(const std::string& dir) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](const char* data, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(data[i]);
            h *= 0x100000001b3ULL;
        }
    };
    for (const char* name : {"docs.jsonl", "qa.jsonl"}) {
        std::filesystem::path p = std::filesystem::path(dir) / name;
        if (!std::filesystem::exists(p)) {
            mix("absent;", 7);
            continue;
        }
        std::ifstream in(p, std::ios::binary);
        char buf[1 << 16];
        while (in.read(buf, sizeof buf) || in.gcount() > 0)
            mix(buf, static_cast<std::size_t>(in.gcount()));
        mix(";", 1);
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

std::string utc_timestamp() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace treenav

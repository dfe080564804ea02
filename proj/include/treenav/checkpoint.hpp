#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "treenav/nn.hpp"

namespace treenav {

/// Versioned binary container: JSON header (metadata plus tensor manifest)
/// followed by raw little-endian doubles, row-major per tensor. Doubles are
/// written bit-exactly, so save/load round-trips are lossless.
struct Checkpoint {
    nlohmann::json meta;
    std::vector<std::pair<std::string, nn::Mat>> tensors;

    void add(const std::string& name, const nn::Mat& m) { tensors.emplace_back(name, m); }
    const nn::Mat& tensor(const std::string& name) const;
    bool has(const std::string& name) const;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

}  // namespace treenav

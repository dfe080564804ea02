#include "treenav/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace treenav {

namespace {

constexpr char kMagic[8] = {'T', 'N', 'C', 'K', '0', '0', '0', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw std::runtime_error("checkpoint: truncated header");
    return v;
}

}  // namespace

const nn::Mat& Checkpoint::tensor(const std::string& name) const {
    for (const auto& [n, m] : tensors)
        if (n == name) return m;
    throw std::out_of_range("checkpoint: missing tensor " + name);
}

bool Checkpoint::has(const std::string& name) const {
    for (const auto& [n, m] : tensors)
        if (n == name) return true;
    return false;
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);

    nlohmann::json header;
    header["meta"] = meta;
    nlohmann::json manifest = nlohmann::json::array();
    for (const auto& [name, m] : tensors)
        manifest.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
    header["tensors"] = std::move(manifest);
    std::string hs = header.dump();

    out.write(kMagic, sizeof kMagic);
    write_u64(out, hs.size());
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& [name, m] : tensors) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                double v = m(r, c);
                out.write(reinterpret_cast<const char*>(&v), sizeof v);
            }
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);

    char magic[sizeof kMagic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);

    std::uint64_t hlen = read_u64(in);
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw std::runtime_error("checkpoint: truncated header in " + path);
    nlohmann::json header = nlohmann::json::parse(hs);

    Checkpoint ck;
    ck.meta = header.value("meta", nlohmann::json::object());
    for (const auto& entry : header.at("tensors")) {
        std::string name = entry.at("name").get<std::string>();
        Eigen::Index rows = entry.at("rows").get<Eigen::Index>();
        Eigen::Index cols = entry.at("cols").get<Eigen::Index>();
        nn::Mat m(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) {
                double v = 0.0;
                in.read(reinterpret_cast<char*>(&v), sizeof v);
                m(r, c) = v;
            }
        if (!in) throw std::runtime_error("checkpoint: truncated tensor data in " + path);
        ck.tensors.emplace_back(std::move(name), std::move(m));
    }
    return ck;
}

}  // namespace treenav

#include "gsmap/io/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gsmap {

namespace {

constexpr const char* kMagic = "gsmap-checkpoint";
constexpr int kVersion = 1;

} // namespace

void save_checkpoint(const std::string& path, const GaussianMap& map) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    out << kMagic << ' ' << kVersion << '\n'
        << "count " << map.size() << '\n'
        << "sh_degree " << map.max_active_degree() << '\n'
        << "end_header\n";
    for (const Gaussian3D& g : map.gaussians()) {
        out.write(reinterpret_cast<const char*>(g.position.data()), 3 * sizeof(double));
        out.write(reinterpret_cast<const char*>(g.rotation.data()), 4 * sizeof(double));
        out.write(reinterpret_cast<const char*>(g.log_scale.data()), 3 * sizeof(double));
        out.write(reinterpret_cast<const char*>(&g.opacity_logit), sizeof(double));
        for (const auto& c : g.sh_coeffs)
            out.write(reinterpret_cast<const char*>(c.data()), 3 * sizeof(double));
        const int32_t deg = g.active_degree;
        out.write(reinterpret_cast<const char*>(&deg), sizeof(deg));
    }
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

GaussianMap load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    std::string line;
    std::getline(in, line);
    std::istringstream head(line);
    std::string magic;
    int version = 0;
    head >> magic >> version;
    if (magic != kMagic)
        throw std::runtime_error("load_checkpoint: not a checkpoint file: " + path);
    if (version != kVersion)
        throw std::runtime_error("load_checkpoint: unsupported version in " + path);
    size_t count = 0;
    while (std::getline(in, line) && line != "end_header") {
        std::istringstream is(line);
        std::string key;
        is >> key;
        if (key == "count") is >> count;
    }
    std::vector<Gaussian3D> gs(count);
    for (Gaussian3D& g : gs) {
        in.read(reinterpret_cast<char*>(g.position.data()), 3 * sizeof(double));
        in.read(reinterpret_cast<char*>(g.rotation.data()), 4 * sizeof(double));
        in.read(reinterpret_cast<char*>(g.log_scale.data()), 3 * sizeof(double));
        in.read(reinterpret_cast<char*>(&g.opacity_logit), sizeof(double));
        for (auto& c : g.sh_coeffs)
            in.read(reinterpret_cast<char*>(c.data()), 3 * sizeof(double));
        int32_t deg = 0;
        in.read(reinterpret_cast<char*>(&deg), sizeof(deg));
        g.active_degree = deg;
    }
    if (!in) throw std::runtime_error("load_checkpoint: truncated file " + path);
    GaussianMap map;
    map.append(gs);
    return map;
}

} // namespace gsmap

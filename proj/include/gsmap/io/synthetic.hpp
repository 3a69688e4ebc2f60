#pragma once

#include <string>
#include <vector>

#include "gsmap/io/sequence.hpp"
#include "gsmap/map/gaussian_map.hpp"

namespace gsmap {

struct SyntheticSpec {
    int n_gaussians = 500;
    double extent = 18.0; // scene span along the dominant axis, meters
    std::string trajectory = "line"; // "line" or "orbit"
    int n_frames = 20;
    uint32_t seed = 1;
    int width = 160;
    int height = 120;
    double focal = 130.0;
    double lidar_noise = 0.06; // range noise along the beam, meters (1 sigma)
};

struct SyntheticScene {
    GaussianMap map; // ground-truth Gaussians
    CameraModel camera;
    std::vector<Frame> frames;     // poses, rendered color, sampled clouds
    std::vector<ImageD> gt_depths; // rendered depth per frame
};

/// Random Gaussians inside the extent, a smooth trajectory, ground-truth
/// color/depth rendered with the forward rasterizer, and per-frame point
/// clouds sampled at the visible Gaussian centers with their colors.
/// Deterministic for a fixed seed.
SyntheticScene generate_synthetic_scene(const SyntheticSpec& spec);

/// Generates and writes the scene (sequence files, ground-truth depth, and
/// a gt_map.gsmap checkpoint) to a sequence directory.
SyntheticScene write_synthetic_scene(const std::string& out_dir, const SyntheticSpec& spec);

} // namespace gsmap

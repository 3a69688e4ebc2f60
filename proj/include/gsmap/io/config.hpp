#pragma once

#include <string>

#include "gsmap/map/keyframe.hpp"
#include "gsmap/map/mapper.hpp"

namespace gsmap {

/// Full pipeline configuration. Dotted keys in a `key = value` text file;
/// environment variables with the GSMAP_ prefix (dots become underscores,
/// upper case) override file values.
struct PipelineConfig {
    // voxel.*
    double voxel_size = 0.1;
    int voxel_cap = 20;
    double voxel_active_window = 1.0; // seconds

    KeyframeConfig kf;  // kf.*
    TrainConfig train;  // train.*

    // run.*
    int points_per_frame = 2048; // N_l
    int threads = 0;             // rasterizer threads; 0 = hardware
    bool single_thread = false;  // serialize ingestion + optimization
    int checkpoint_interval = 0; // global steps; 0 = final only
    int prune_interval = 50;     // global steps between prune sweeps
    std::string out_dir = "out";
    uint32_t seed = 1;

    std::string serialize() const;
    static PipelineConfig parse(const std::string& text);
    static PipelineConfig load_file(const std::string& path, bool apply_env = true);
    void apply_environment();
    void validate() const;
};

} // namespace gsmap

#pragma once

#include <string>

#include "gsmap/io/config.hpp"
#include "gsmap/io/sequence.hpp"
#include "gsmap/map/gaussian_map.hpp"
#include "gsmap/metrics/metrics.hpp"

namespace gsmap {

struct PipelineResult {
    EvalReport report;
    std::string checkpoint_path;
    size_t keyframes_admitted = 0;
    size_t gaussian_count = 0;
    int64_t total_steps = 0;
    double final_loss = 0.0;
};

/// Replays the sequence through the two-role pipeline: an ingestion role
/// feeding the voxel store and keyframe queue, and an optimization role
/// training the Gaussian map. cfg.single_thread serializes the two roles;
/// otherwise they run on separate threads. Writes the final checkpoint and
/// per-keyframe evaluation report into cfg.out_dir.
PipelineResult run_pipeline(const std::string& sequence_path, const PipelineConfig& cfg,
                            GaussianMap* out_map = nullptr, bool verbose = true);

/// Renders every sequence view from the map and scores it against the stored
/// images (and ground-truth depth when the sequence carries it). Rendered
/// images are quantized to 8 bits to match the on-disk ground truth.
EvalReport evaluate_sequence(const GaussianMap& map, const SequenceReader& reader,
                             int threads = 0);

/// round(v * 255) / 255 on every sample, clamped to [0, 1].
ImageD quantize_8bit(const ImageD& image);

} // namespace gsmap

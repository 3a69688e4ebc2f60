#pragma once

#include <optional>
#include <span>

#include "gsmap/map/gaussian_map.hpp"
#include "gsmap/map/keyframe.hpp"
#include "gsmap/render/rasterizer.hpp"

namespace gsmap {

/// Depth supervision applies only to pixels the map already explains this
/// strongly; the composite depth of a barely-covered pixel is mostly the
/// missing transmittance, not geometry.
inline constexpr double kDepthLossMinVisibility = 0.98;

struct TrainConfig {
    double lambda = 0.2;    // SSIM mixing weight inside the color loss
    double lambda_d = 0.5;  // depth-loss weight
    int pyramid_levels = 2; // n; pyramid has n+1 images
    int iters_per_level = 0; // 0 = budget / (n + 1), residue on the finest level
    LearningRates lr;
    double prune_threshold = 0.005;
    int sh_interval = 300; // global steps between SH degree increments

    int effective_iters_per_level(int budget) const {
        if (iters_per_level > 0) return iters_per_level;
        return std::max(1, budget / (pyramid_levels + 1));
    }
};

/// One Gaussian per point: position at the point, identity rotation,
/// isotropic scale from the mean distance to the 3 nearest batch neighbors
/// (floored at 1e-4 m), opacity 0.1, degree-0 SH matching the point color.
size_t init_gaussians_from_points(GaussianMap& map, std::span<const ColoredPoint> points);

/// Level 0 is the input; level k halves level k-1 with a 2x2 box average
/// (partial blocks at odd borders average what exists). Returns n+1 images.
std::vector<ImageD> build_pyramid(const ImageD& image, int levels);

/// Sparse-depth variant: a block's value is the mean of its valid (nonzero)
/// entries, zero if none.
std::vector<ImageD> build_depth_pyramid(const ImageD& depth, int levels);

/// Fills kf.pyramid from its color image and sparse depth.
void build_keyframe_pyramid(Keyframe& kf, int levels);

struct LossResult {
    double total = 0.0;
    double color_loss = 0.0; // (1-lambda) L1 + lambda (1 - SSIM)
    double depth_loss = 0.0; // masked mean absolute depth error
    double l1 = 0.0;
    double ssim = 0.0;
    ImageD dl_dcolor;
    ImageD dl_ddepth;
};

/// Loss of Lc + lambda_d * Ld at the given pyramid level, with analytic
/// per-pixel gradients. Depth pixels count when the LiDAR value is present
/// and something rendered there.
LossResult compute_loss(const RenderOutput& rendered, const Keyframe& kf, int level,
                        const TrainConfig& cfg);

struct StepReport {
    int level = 0; // pyramid level rendered (0 = native)
    double loss = 0.0;
    double psnr = 0.0;
};

/// One optimization step on the keyframe: pick the pyramid level from the
/// keyframe's consumed-iteration count (coarsest first), render, compute the
/// loss, backpropagate, and apply one Adam update. Returns nullopt when the
/// keyframe's budget is exhausted.
std::optional<StepReport> train_keyframe_step(GaussianMap& map, Keyframe& kf,
                                              const TrainConfig& cfg, const CameraModel& cam,
                                              ThreadPool* pool = nullptr);

/// Raises every Gaussian's SH degree to min(3, global_step / sh_interval).
/// Returns the resulting degree.
int maybe_upgrade_sh(GaussianMap& map, const TrainConfig& cfg);

} // namespace gsmap

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "gsmap/core/gaussian.hpp"
#include "gsmap/core/types.hpp"
#include "gsmap/io/image.hpp"
#include "gsmap/util/thread_pool.hpp"

namespace gsmap {

class GaussianMap;

inline constexpr int kTileSize = 16;
inline constexpr double kAlphaMax = 0.99;
inline constexpr double kTransmittanceMin = 1e-4;

/// One compositing contribution recorded by the forward pass.
struct Contribution {
    int32_t gaussian = 0; // index into the map
    double alpha = 0.0;
};

/// Per-Gaussian forward state cached for the backward pass.
struct ProjectedGaussian {
    int32_t index = 0;          // index into the map
    Eigen::Vector2d mean;       // pixels
    Eigen::Matrix2d cov2d;      // regularized
    Eigen::Matrix2d cov_inv;
    double depth = 0.0;
    int radius = 1;
    double opacity = 0.0;            // sigmoid(opacity_logit)
    Eigen::Vector3d color;           // clamped to [0,1]
    Eigen::Vector3d color_raw;       // SH sum + 0.5, before the clamp
    Eigen::Vector3d view_dir;        // unit, camera center -> gaussian
    double view_dist = 0.0;          // |position - camera center|
};

/// Forward rendering products plus everything the backward pass replays.
struct RenderOutput {
    ImageD color;      // H x W x 3 in [0, 1]
    ImageD depth;      // H x W, meters; 0 where nothing rendered
    ImageD visibility; // H x W in [0, 1]

    // CSR layout over pixels in row-major order.
    std::vector<uint32_t> contrib_offsets; // H*W + 1 entries
    std::vector<Contribution> contribs;

    std::vector<ProjectedGaussian> projected;

    std::span<const Contribution> contributors(int y, int x) const {
        const size_t p = static_cast<size_t>(y) * color.width() + x;
        return {contribs.data() + contrib_offsets[p],
                contribs.data() + contrib_offsets[p + 1]};
    }
};

/// Per-parameter gradients for every Gaussian in the map.
struct RenderGradients {
    std::vector<grad::GaussianGrad> per_gaussian;
};

/// Tile-based forward pass: project, bin into 16x16 tiles, sort front to
/// back by mean depth, alpha-composite color / depth / visibility with early
/// termination once transmittance falls below kTransmittanceMin.
RenderOutput render(const GaussianMap& map, const Pose& pose, const CameraModel& cam,
                    ThreadPool* pool = nullptr);

/// Adjoint of render for the scalar loss implied by the output cotangents.
/// dl_dcolor must be H x W x 3 and dl_ddepth H x W, matching `out`.
RenderGradients render_backward(const GaussianMap& map, const Pose& pose,
                                const CameraModel& cam, const RenderOutput& out,
                                const ImageD& dl_dcolor, const ImageD& dl_ddepth,
                                ThreadPool* pool = nullptr);

} // namespace gsmap

#pragma once

// Test-only reference renderer: per pixel, loops over every Gaussian sorted
// front to back, with no tiling and no early termination. Kept independent
// of the tile rasterizer's compositing path.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "gsmap/core/projection.hpp"
#include "gsmap/core/sh.hpp"
#include "gsmap/io/image.hpp"
#include "gsmap/map/gaussian_map.hpp"

namespace gsmap::testing {

struct BruteForceOutput {
    ImageD color;
    ImageD depth;
    ImageD visibility;
};

inline BruteForceOutput brute_force_render(const GaussianMap& map, const Pose& pose,
                                           const CameraModel& cam) {
    BruteForceOutput out;
    out.color = ImageD(cam.height, cam.width, 3, 0.0);
    out.depth = ImageD(cam.height, cam.width, 1, 0.0);
    out.visibility = ImageD(cam.height, cam.width, 1, 0.0);

    struct Splat {
        Eigen::Vector2d mean;
        Eigen::Matrix2d cov_inv;
        double depth;
        int radius;
        double opacity;
        Eigen::Vector3d color;
        size_t index;
    };
    std::vector<Splat> splats;
    const Eigen::Vector3d center = pose.camera_center();
    const auto& gaussians = map.gaussians();
    for (size_t i = 0; i < gaussians.size(); ++i) {
        const auto p2 = project_gaussian(gaussians[i], pose, cam);
        if (!p2) continue;
        Splat s;
        s.mean = p2->mean;
        s.cov_inv = p2->cov2d.inverse();
        s.depth = p2->depth;
        s.radius = p2->radius;
        s.opacity = gaussians[i].opacity();
        Eigen::Vector3d dir = gaussians[i].position - center;
        dir = dir.norm() > 0.0 ? Eigen::Vector3d(dir.normalized()) : Eigen::Vector3d(0, 0, 1);
        s.color = eval_sh(gaussians[i].sh_coeffs, gaussians[i].active_degree, dir)
                      .cwiseMax(0.0)
                      .cwiseMin(1.0);
        s.index = i;
        splats.push_back(s);
    }
    std::sort(splats.begin(), splats.end(), [](const Splat& a, const Splat& b) {
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.index < b.index;
    });

    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            double transmittance = 1.0;
            Eigen::Vector3d c = Eigen::Vector3d::Zero();
            double d = 0.0, v = 0.0;
            for (const Splat& s : splats) {
                if (std::abs(x - s.mean.x()) > s.radius || std::abs(y - s.mean.y()) > s.radius)
                    continue;
                const Eigen::Vector2d diff(x - s.mean.x(), y - s.mean.y());
                const double g = std::exp(-0.5 * diff.dot(s.cov_inv * diff));
                const double alpha = std::min(s.opacity * g, kAlphaMax);
                c += s.color * (alpha * transmittance);
                d += s.depth * alpha * transmittance;
                v += alpha * transmittance;
                transmittance *= 1.0 - alpha;
            }
            for (int ch = 0; ch < 3; ++ch) out.color.at(y, x, ch) = c[ch];
            out.depth.at(y, x) = d;
            out.visibility.at(y, x) = v;
        }
    }
    return out;
}

/// Random scene helper shared by the rasterizer tests and acceptance suite.
inline GaussianMap random_scene(std::mt19937& rng, int n, const CameraModel& cam,
                                const Pose& pose, double opacity_logit_lo = -2.5,
                                double opacity_logit_hi = 1.5) {
    auto uni = [&](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    };
    std::vector<Gaussian3D> gs(n);
    for (auto& g : gs) {
        const double z = uni(1.5, 8.0);
        const Eigen::Vector3d p_cam(uni(-0.45, 0.45) * z, uni(-0.45, 0.45) * z, z);
        g.position = pose.rotation.conjugate() * (p_cam - pose.translation);
        do {
            for (int i = 0; i < 4; ++i) g.rotation[i] = uni(-1.0, 1.0);
        } while (g.rotation.norm() < 0.3);
        for (int i = 0; i < 3; ++i) g.log_scale[i] = std::log(uni(0.03, 0.3));
        g.opacity_logit = uni(opacity_logit_lo, opacity_logit_hi);
        g.active_degree = static_cast<int>(uni(0.0, 3.999));
        g.sh_coeffs.fill(Eigen::Vector3d::Zero());
        for (int c = 0; c < 3; ++c) g.sh_coeffs[0][c] = uni(-1.2, 1.2);
        for (int k = 1; k < sh_basis_count(g.active_degree); ++k)
            for (int c = 0; c < 3; ++c) g.sh_coeffs[k][c] = uni(-0.1, 0.1);
    }
    GaussianMap map;
    map.append(gs);
    return map;
}

} // namespace gsmap::testing

#include "gsmap/io/synthetic.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "gsmap/core/projection.hpp"
#include "gsmap/core/sh.hpp"
#include "gsmap/io/checkpoint.hpp"
#include "gsmap/render/rasterizer.hpp"

namespace gsmap {

namespace {

constexpr double kShC0 = 0.28209479177387814;
constexpr double kWallNear = 4.95;
constexpr double kWallFar = 5.05;
// Share of Gaussians emitted as sub-pixel speckles. They come in tight
// clusters of four so that a point batch carries their true scale in its
// nearest-neighbor statistics.
constexpr double kTextureFraction = 0.65;
constexpr int kSpeckleClusterSize = 6;
constexpr double kSpeckleSpacing = 0.055; // meters within a cluster

Eigen::Vector4d random_unit_quaternion(std::mt19937& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Vector4d q(n(rng), n(rng), n(rng), n(rng));
    while (q.norm() < 1e-6) q = Eigen::Vector4d(n(rng), n(rng), n(rng), n(rng));
    return q / q.norm();
}

double log_uniform(std::mt19937& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
    return std::exp(u(rng));
}

/// Yaw-only pose looking along +z after rotating by `yaw` about the world y
/// axis, positioned at `center` (world coordinates).
Pose make_pose(const Eigen::Vector3d& camera_pos, double yaw) {
    const Eigen::Quaterniond q_wc(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitY()));
    const Eigen::Quaterniond q_cw = q_wc.conjugate();
    return Pose(q_cw, q_cw * (-camera_pos));
}

} // namespace

SyntheticScene generate_synthetic_scene(const SyntheticSpec& spec) {
    if (spec.n_gaussians <= 0 || spec.n_frames <= 0)
        throw std::invalid_argument("generate_synthetic_scene: counts must be positive");
    SyntheticScene scene;
    scene.camera.fx = spec.focal;
    scene.camera.fy = spec.focal;
    scene.camera.cx = (spec.width - 1) / 2.0;
    scene.camera.cy = (spec.height - 1) / 2.0;
    scene.camera.width = spec.width;
    scene.camera.height = spec.height;
    scene.camera.validate();

    std::mt19937 rng(spec.seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    // Scene slab: a textured wall facing the camera path.
    const double wall_mid = 0.5 * (kWallNear + kWallFar);
    const double half_h = wall_mid * (spec.height / 2.0) / spec.focal;
    const double half_x = spec.extent / 2.0 + 0.8; // wall outlasts the frustum sweep

    auto wall_point = [&](double margin_y) {
        return Eigen::Vector3d((2.0 * uni(rng) - 1.0) * half_x,
                               (2.0 * uni(rng) - 1.0) * half_h * margin_y,
                               kWallNear + uni(rng) * (kWallFar - kWallNear));
    };
    auto set_color = [&](Gaussian3D& g, const Eigen::Vector3d& color) {
        g.sh_coeffs.fill(Eigen::Vector3d::Zero());
        g.sh_coeffs[0] = (color - Eigen::Vector3d::Constant(0.5)) / kShC0;
        g.active_degree = 0;
    };

    std::vector<Gaussian3D> gaussians;
    gaussians.reserve(spec.n_gaussians);
    const int n_speckle = static_cast<int>(spec.n_gaussians * kTextureFraction);
    const int n_clusters = (n_speckle + kSpeckleClusterSize - 1) / kSpeckleClusterSize;
    int cluster_idx = 0;
    // Speckle clusters ahead of the wall, stratified along it so every view
    // carries texture.
    while (static_cast<int>(gaussians.size()) < n_speckle) {
        Eigen::Vector3d center = wall_point(0.85);
        center.x() = -half_x + (cluster_idx + uni(rng)) / n_clusters * 2.0 * half_x;
        ++cluster_idx;
        center.z() = kWallNear - 0.1 - 0.3 * uni(rng); // floats ahead of the wall
        const Eigen::Vector3d bright(0.9 + 0.1 * uni(rng), 0.85 + 0.1 * uni(rng), 0.8);
        const Eigen::Vector3d dark(0.05, 0.05 + 0.1 * uni(rng), 0.1);
        for (int k = 0; k < kSpeckleClusterSize &&
                        static_cast<int>(gaussians.size()) < spec.n_gaussians; ++k) {
            Gaussian3D g;
            Eigen::Vector3d off(uni(rng) - 0.5, uni(rng) - 0.5, uni(rng) - 0.5);
            g.position = center + off.normalized() * kSpeckleSpacing * (0.7 + 0.6 * uni(rng));
            g.rotation = random_unit_quaternion(rng);
            for (int a = 0; a < 3; ++a)
                g.log_scale[a] = std::log(log_uniform(rng, 0.02, 0.04));
            g.opacity_logit = logit(0.92 + 0.06 * uni(rng));
            set_color(g, k % 2 ? dark : bright); // alternate for micro-edges
            gaussians.push_back(g);
        }
    }
    // Structure blobs: the wall surface itself.
    while (static_cast<int>(gaussians.size()) < spec.n_gaussians) {
        Gaussian3D g;
        g.position = wall_point(1.2); // overcover: no unbacked image rows
        g.rotation = random_unit_quaternion(rng);
        const double base = log_uniform(rng, 0.18, 0.45);
        for (int a = 0; a < 3; ++a)
            g.log_scale[a] = std::log(base * (0.7 + 0.7 * uni(rng)));
        g.opacity_logit = logit(0.9 + 0.07 * uni(rng));
        set_color(g, Eigen::Vector3d(0.3 + 0.4 * uni(rng), 0.3 + 0.4 * uni(rng),
                                     0.3 + 0.4 * uni(rng)));
        gaussians.push_back(g);
    }
    scene.map.append(gaussians);

    // Trajectory.
    std::vector<Eigen::Vector3d> positions(spec.n_frames);
    std::vector<double> yaws(spec.n_frames, 0.0);
    if (spec.trajectory == "line") {
        // Traverse parallel to the wall with gentle sway and yaw so that
        // consecutive views overlap partially and parallax varies.
        const double margin = kWallFar * (spec.width / 2.0) / spec.focal;
        const double travel = std::max(spec.extent - 2.0 * margin, 0.5);
        for (int f = 0; f < spec.n_frames; ++f) {
            const double s = spec.n_frames > 1 ? f / double(spec.n_frames - 1) : 0.0;
            positions[f] = Eigen::Vector3d(-travel / 2.0 + s * travel,
                                           0.12 * std::sin(2.0 * M_PI * 1.7 * s), 0.0);
            yaws[f] = 0.035 * std::sin(2.0 * M_PI * 1.3 * s);
        }
    } else if (spec.trajectory == "orbit") {
        const double radius = wall_mid;
        const Eigen::Vector3d center(0.0, 0.0, wall_mid);
        for (int f = 0; f < spec.n_frames; ++f) {
            const double s = spec.n_frames > 1 ? f / double(spec.n_frames - 1) : 0.0;
            const double theta = (-0.5 + s) * (M_PI * 2.0 / 3.0); // 120 degree arc
            positions[f] =
                center + radius * Eigen::Vector3d(std::sin(theta), 0.0, -std::cos(theta));
            yaws[f] = theta;
        }
    } else {
        throw std::invalid_argument("generate_synthetic_scene: unknown trajectory '" +
                                    spec.trajectory + "'");
    }

    scene.frames.resize(spec.n_frames);
    scene.gt_depths.resize(spec.n_frames);
    for (int f = 0; f < spec.n_frames; ++f) {
        Frame& frame = scene.frames[f];
        frame.index = f;
        frame.timestamp = 0.1 * f;
        frame.pose = make_pose(positions[f], yaws[f]);

        const RenderOutput out = render(scene.map, frame.pose, scene.camera);
        frame.color = out.color;
        scene.gt_depths[f] = out.depth;

        // Cloud: Gaussian centers visible in this frame, carrying their
        // colors, re-measured each frame with range noise along the beam.
        std::normal_distribution<double> range_noise(0.0, spec.lidar_noise);
        const Eigen::Vector3d origin = frame.pose.camera_center();
        for (const Gaussian3D& g : scene.map.gaussians()) {
            const Eigen::Vector3d pc = frame.pose.world_to_camera(g.position);
            if (pc.z() <= kNearClip) continue;
            const double u = scene.camera.fx * pc.x() / pc.z() + scene.camera.cx;
            const double v = scene.camera.fy * pc.y() / pc.z() + scene.camera.cy;
            if (u < 0.0 || u > scene.camera.width - 1 || v < 0.0 || v > scene.camera.height - 1)
                continue;
            ColoredPoint p;
            Eigen::Vector3d beam = g.position - origin;
            const double range = beam.norm();
            beam /= range;
            p.position = origin + beam * (range + (spec.lidar_noise > 0.0
                                                       ? range_noise(rng)
                                                       : 0.0));
            const Eigen::Vector3d c = eval_sh(g.sh_coeffs, 0, Eigen::Vector3d::UnitZ());
            p.color = c.cwiseMax(0.0).cwiseMin(1.0);
            p.timestamp = frame.timestamp;
            frame.cloud.push_back(p);
        }
    }
    return scene;
}

SyntheticScene write_synthetic_scene(const std::string& out_dir, const SyntheticSpec& spec) {
    SyntheticScene scene = generate_synthetic_scene(spec);
    write_sequence(out_dir, scene.camera, scene.frames, &scene.gt_depths, "gt_map.gsmap");
    save_checkpoint(out_dir + "/gt_map.gsmap", scene.map);
    return scene;
}

} // namespace gsmap

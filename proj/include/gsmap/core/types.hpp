#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>
#include <stdexcept>

namespace gsmap {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// Pinhole camera. No distortion model.
struct CameraModel {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;

    void validate() const {
        if (fx <= 0.0 || fy <= 0.0)
            throw std::invalid_argument("CameraModel: focal lengths must be positive");
        if (width <= 0 || height <= 0)
            throw std::invalid_argument("CameraModel: image size must be positive");
        if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height)
            throw std::invalid_argument("CameraModel: principal point outside image");
    }

    /// Intrinsics for pyramid level k (image downsampled by 2^k with 2x2
    /// block averaging). Sample positions sit on the integer lattice, so the
    /// level-k coordinate of a level-0 coordinate u is (u + 0.5) / 2^k - 0.5.
    CameraModel scaled(int level) const {
        CameraModel c = *this;
        const double f = static_cast<double>(1 << level);
        c.fx = fx / f;
        c.fy = fy / f;
        c.cx = (cx + 0.5) / f - 0.5;
        c.cy = (cy + 0.5) / f - 0.5;
        c.width = (width + (1 << level) - 1) >> level;
        c.height = (height + (1 << level) - 1) >> level;
        return c;
    }
};

/// World-to-camera rigid transform.
struct Pose {
    Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity(); // q_cw
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();        // t_cw

    Pose() = default;
    Pose(const Eigen::Quaterniond& q, const Eigen::Vector3d& t)
        : rotation(q.normalized()), translation(t) {}

    Eigen::Vector3d world_to_camera(const Eigen::Vector3d& p_world) const {
        return rotation * p_world + translation;
    }

    /// Camera origin expressed in world coordinates.
    Eigen::Vector3d camera_center() const {
        return rotation.conjugate() * (-translation);
    }
};

/// Geodesic angle between two rotations, 2*acos(|<q1,q2>|).
inline double rotation_angle(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
    double d = std::abs(a.normalized().dot(b.normalized()));
    d = std::min(d, 1.0);
    return 2.0 * std::acos(d);
}

} // namespace gsmap

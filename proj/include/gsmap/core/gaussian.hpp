#pragma once

#include <Eigen/Dense>
#include <array>

#include "gsmap/core/types.hpp"

namespace gsmap {

inline constexpr int kShMaxDegree = 3;
inline constexpr int kShCoeffCount = (kShMaxDegree + 1) * (kShMaxDegree + 1); // 16

/// One anisotropic 3D Gaussian. Scale lives in log-space and opacity in
/// logit-space so every real-valued parameter vector is valid. The rotation
/// is stored as a raw (w, x, y, z) 4-vector and normalized on use.
struct Gaussian3D {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Vector4d rotation = Eigen::Vector4d(1, 0, 0, 0); // (w, x, y, z)
    Eigen::Vector3d log_scale = Eigen::Vector3d::Zero();
    double opacity_logit = 0.0;
    std::array<Eigen::Vector3d, kShCoeffCount> sh_coeffs{}; // RGB per basis fn
    int active_degree = 0;

    double opacity() const { return sigmoid(opacity_logit); }
    Eigen::Vector3d scale() const { return log_scale.array().exp(); }
};

/// Screen-space footprint of a projected Gaussian. cov2d already includes
/// the regularizing dilation applied at projection time.
struct Gaussian2D {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero(); // pixels
    Eigen::Matrix2d cov2d = Eigen::Matrix2d::Identity();
    double depth = 0.0; // camera-frame z of the mean, meters
    int radius = 1;     // 3-sigma pixel extent for tile binning
};

namespace grad {

/// Gradients for one Gaussian, same shapes as the parameters.
struct GaussianGrad {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Vector4d rotation = Eigen::Vector4d::Zero();
    Eigen::Vector3d log_scale = Eigen::Vector3d::Zero();
    double opacity_logit = 0.0;
    std::array<Eigen::Vector3d, kShCoeffCount> sh_coeffs{};

    GaussianGrad() {
        sh_coeffs.fill(Eigen::Vector3d::Zero());
    }

    void add(const GaussianGrad& o) {
        position += o.position;
        rotation += o.rotation;
        log_scale += o.log_scale;
        opacity_logit += o.opacity_logit;
        for (int i = 0; i < kShCoeffCount; ++i) sh_coeffs[i] += o.sh_coeffs[i];
    }
};

} // namespace grad

} // namespace gsmap

#pragma once

#include <Eigen/Dense>
#include <optional>

#include "gsmap/core/gaussian.hpp"
#include "gsmap/core/types.hpp"

namespace gsmap {

inline constexpr double kNearClip = 0.01;          // meters; culled, not clamped
inline constexpr double kCovRegularization = 0.3;  // pixels^2 added to Sigma_I

/// Local affine approximation of the pinhole map at camera-frame point p.
Eigen::Matrix<double, 2, 3> perspective_jacobian(const Eigen::Vector3d& p_cam,
                                                 const CameraModel& cam);

/// Projects a world-space Gaussian into the image. Returns nullopt when the
/// camera-frame depth is at or behind the near clip. The returned cov2d
/// includes the regularizing dilation; radius = ceil(3 * sqrt(max eigenvalue)).
std::optional<Gaussian2D> project_gaussian(const Gaussian3D& g, const Pose& pose,
                                           const CameraModel& cam);

/// Pullback of project_gaussian for a non-culled Gaussian. Cotangents for the
/// 2D mean, the (regularized) 2D covariance, and the compositing depth flow
/// back to the Gaussian parameters. The pose and camera are not differentiated.
void project_gaussian_vjp(const Gaussian3D& g, const Pose& pose, const CameraModel& cam,
                          const Eigen::Vector2d& d_mean, const Eigen::Matrix2d& d_cov2d,
                          double d_depth,
                          Eigen::Vector3d& d_position, Eigen::Vector4d& d_rotation,
                          Eigen::Vector3d& d_log_scale);

/// exp(-0.5 * (x - mu)^T Sigma^{-1} (x - mu)) for the regularized footprint.
double eval_gaussian_2d(const Gaussian2D& g2, const Eigen::Vector2d& x);

/// Fast path used by the rasterizer: same value given a precomputed inverse.
double eval_gaussian_2d_conic(const Eigen::Vector2d& mean, const Eigen::Matrix2d& cov_inv,
                              const Eigen::Vector2d& x);

/// Pullback of eval_gaussian_2d. `value` is the forward result at x.
void eval_gaussian_2d_vjp(const Eigen::Vector2d& mean, const Eigen::Matrix2d& cov_inv,
                          const Eigen::Vector2d& x, double value, double d_value,
                          Eigen::Vector2d& d_mean, Eigen::Matrix2d& d_cov2d,
                          Eigen::Vector2d& d_x);

} // namespace gsmap

#pragma once

#include <Eigen/Dense>

namespace gsmap {

/// Rotation matrix of a (w, x, y, z) quaternion, normalized internally.
Eigen::Matrix3d quat_to_rotation(const Eigen::Vector4d& q);

/// Sigma = R * S * S^T * R^T with S = diag(exp(log_scale)). Symmetric PSD.
Eigen::Matrix3d build_covariance(const Eigen::Vector4d& q, const Eigen::Vector3d& log_scale);

/// Pullback of build_covariance: given dL/dSigma (general 3x3 cotangent),
/// returns dL/dq (raw, pre-normalization components) and dL/dlog_scale.
void build_covariance_vjp(const Eigen::Vector4d& q, const Eigen::Vector3d& log_scale,
                          const Eigen::Matrix3d& d_sigma,
                          Eigen::Vector4d& d_q, Eigen::Vector3d& d_log_scale);

} // namespace gsmap

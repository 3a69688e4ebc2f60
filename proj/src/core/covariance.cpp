#include "gsmap/core/covariance.hpp"

namespace gsmap {

namespace {

Eigen::Matrix3d rotation_from_unit(const Eigen::Vector4d& u) {
    const double w = u[0], x = u[1], y = u[2], z = u[3];
    Eigen::Matrix3d r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

/// dR/du_k for the unit-quaternion rotation formula, k in {w, x, y, z}.
Eigen::Matrix3d rotation_partial(const Eigen::Vector4d& u, int k) {
    const double w = u[0], x = u[1], y = u[2], z = u[3];
    Eigen::Matrix3d d;
    switch (k) {
        case 0:
            d << 0, -z, y,
                 z, 0, -x,
                 -y, x, 0;
            break;
        case 1:
            d << 0, y, z,
                 y, -2 * x, -w,
                 z, w, -2 * x;
            break;
        case 2:
            d << -2 * y, x, w,
                 x, 0, z,
                 -w, z, -2 * y;
            break;
        default:
            d << -2 * z, -w, x,
                 w, -2 * z, y,
                 x, y, 0;
            break;
    }
    return 2.0 * d;
}

} // namespace

Eigen::Matrix3d quat_to_rotation(const Eigen::Vector4d& q) {
    return rotation_from_unit(q.normalized());
}

Eigen::Matrix3d build_covariance(const Eigen::Vector4d& q, const Eigen::Vector3d& log_scale) {
    const Eigen::Matrix3d r = quat_to_rotation(q);
    const Eigen::Vector3d s2 = (2.0 * log_scale).array().exp(); // S * S^T diagonal
    const Eigen::Matrix3d sigma = r * s2.asDiagonal() * r.transpose();
    return 0.5 * (sigma + sigma.transpose());
}

void build_covariance_vjp(const Eigen::Vector4d& q, const Eigen::Vector3d& log_scale,
                          const Eigen::Matrix3d& d_sigma,
                          Eigen::Vector4d& d_q, Eigen::Vector3d& d_log_scale) {
    const double norm = q.norm();
    const Eigen::Vector4d u = q / norm;
    const Eigen::Matrix3d r = rotation_from_unit(u);
    const Eigen::Vector3d s2 = (2.0 * log_scale).array().exp();

    // Sigma = R D R^T, D = diag(s2).
    const Eigen::Matrix3d g_sym = d_sigma + d_sigma.transpose();
    const Eigen::Matrix3d rtgr = r.transpose() * d_sigma * r;
    for (int k = 0; k < 3; ++k)
        d_log_scale[k] = 2.0 * s2[k] * rtgr(k, k);

    const Eigen::Matrix3d d_r = g_sym * r * s2.asDiagonal();
    Eigen::Vector4d d_u;
    for (int k = 0; k < 4; ++k)
        d_u[k] = (d_r.array() * rotation_partial(u, k).array()).sum();

    // Through the normalization u = q / |q|.
    d_q = (d_u - u * u.dot(d_u)) / norm;
}

} // namespace gsmap

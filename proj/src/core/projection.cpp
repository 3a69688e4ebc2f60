#include "gsmap/core/projection.hpp"

#include <cmath>

#include "gsmap/core/covariance.hpp"

namespace gsmap {

Eigen::Matrix<double, 2, 3> perspective_jacobian(const Eigen::Vector3d& p, const CameraModel& cam) {
    const double z = p.z();
    Eigen::Matrix<double, 2, 3> j;
    j << cam.fx / z, 0.0, -cam.fx * p.x() / (z * z),
         0.0, cam.fy / z, -cam.fy * p.y() / (z * z);
    return j;
}

std::optional<Gaussian2D> project_gaussian(const Gaussian3D& g, const Pose& pose,
                                           const CameraModel& cam) {
    const Eigen::Vector3d p = pose.world_to_camera(g.position);
    if (p.z() <= kNearClip) return std::nullopt;

    Gaussian2D out;
    out.mean = Eigen::Vector2d(cam.fx * p.x() / p.z() + cam.cx,
                               cam.fy * p.y() / p.z() + cam.cy);
    out.depth = p.z();

    const Eigen::Matrix3d w = pose.rotation.toRotationMatrix();
    const Eigen::Matrix<double, 2, 3> m = perspective_jacobian(p, cam) * w;
    const Eigen::Matrix3d sigma_w = build_covariance(g.rotation, g.log_scale);
    Eigen::Matrix2d cov = m * sigma_w * m.transpose();
    cov.diagonal().array() += kCovRegularization;
    out.cov2d = 0.5 * (cov + cov.transpose());

    const double half_trace = 0.5 * out.cov2d.trace();
    const double det = out.cov2d.determinant();
    const double disc = std::sqrt(std::max(half_trace * half_trace - det, 0.0));
    const double lambda_max = half_trace + disc;
    out.radius = std::max(1, static_cast<int>(std::ceil(3.0 * std::sqrt(lambda_max))));
    return out;
}

void project_gaussian_vjp(const Gaussian3D& g, const Pose& pose, const CameraModel& cam,
                          const Eigen::Vector2d& d_mean, const Eigen::Matrix2d& d_cov2d,
                          double d_depth,
                          Eigen::Vector3d& d_position, Eigen::Vector4d& d_rotation,
                          Eigen::Vector3d& d_log_scale) {
    const Eigen::Vector3d p = pose.world_to_camera(g.position);
    const Eigen::Matrix3d w = pose.rotation.toRotationMatrix();
    const Eigen::Matrix<double, 2, 3> j = perspective_jacobian(p, cam);
    const Eigen::Matrix<double, 2, 3> m = j * w;
    const Eigen::Matrix3d sigma_w = build_covariance(g.rotation, g.log_scale);

    // Sigma_I = M Sigma_W M^T (+ const): cotangents for Sigma_W and M.
    const Eigen::Matrix3d d_sigma_w = m.transpose() * d_cov2d * m;
    const Eigen::Matrix<double, 2, 3> d_m = (d_cov2d + d_cov2d.transpose()) * m * sigma_w;
    const Eigen::Matrix<double, 2, 3> d_j = d_m * w.transpose();

    build_covariance_vjp(g.rotation, g.log_scale, d_sigma_w, d_rotation, d_log_scale);

    // Through the projected mean (d mu_I / d p_cam equals J exactly).
    Eigen::Vector3d d_p = j.transpose() * d_mean;

    // Through J's dependence on the camera-frame point.
    const double z = p.z(), z2 = z * z, z3 = z2 * z;
    d_p.x() += d_j(0, 2) * (-cam.fx / z2);
    d_p.y() += d_j(1, 2) * (-cam.fy / z2);
    d_p.z() += d_j(0, 0) * (-cam.fx / z2) + d_j(1, 1) * (-cam.fy / z2) +
               d_j(0, 2) * (2.0 * cam.fx * p.x() / z3) + d_j(1, 2) * (2.0 * cam.fy * p.y() / z3);

    // Through the compositing depth d_i = p_cam.z.
    d_p.z() += d_depth;

    d_position = w.transpose() * d_p;
}

double eval_gaussian_2d(const Gaussian2D& g2, const Eigen::Vector2d& x) {
    return eval_gaussian_2d_conic(g2.mean, g2.cov2d.inverse(), x);
}

double eval_gaussian_2d_conic(const Eigen::Vector2d& mean, const Eigen::Matrix2d& cov_inv,
                              const Eigen::Vector2d& x) {
    const Eigen::Vector2d d = x - mean;
    return std::exp(-0.5 * d.dot(cov_inv * d));
}

void eval_gaussian_2d_vjp(const Eigen::Vector2d& mean, const Eigen::Matrix2d& cov_inv,
                          const Eigen::Vector2d& x, double value, double d_value,
                          Eigen::Vector2d& d_mean, Eigen::Matrix2d& d_cov2d,
                          Eigen::Vector2d& d_x) {
    const Eigen::Vector2d d = x - mean;
    const Eigen::Vector2d u = cov_inv * d;
    const double s = value * d_value;
    d_mean = s * u;
    d_x = -s * u;
    d_cov2d = 0.5 * s * u * u.transpose();
}

} // namespace gsmap

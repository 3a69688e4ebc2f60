#include "gsmap/core/sh.hpp"

#include <stdexcept>

namespace gsmap {

namespace {

constexpr double kC0 = 0.28209479177387814; // sqrt(1/(4 pi))
constexpr double kC1 = 0.4886025119029199;  // sqrt(3/(4 pi))
constexpr double kC2[5] = {
    1.0925484305920792,  // xy
    1.0925484305920792,  // yz
    0.31539156525252005, // 2z^2 - x^2 - y^2
    1.0925484305920792,  // xz
    0.5462742152960396,  // x^2 - y^2
};
constexpr double kC3[7] = {
    0.5900435899266435, // y (3x^2 - y^2)
    2.890611442640554,  // xyz
    0.4570457994644658, // y (4z^2 - x^2 - y^2)
    0.3731763325901154, // z (2z^2 - 3x^2 - 3y^2)
    0.4570457994644658, // x (4z^2 - x^2 - y^2)
    1.445305721320277,  // z (x^2 - y^2)
    0.5900435899266435, // x (x^2 - 3y^2)
};

} // namespace

void sh_basis(const Eigen::Vector3d& dir, int degree, std::array<double, kShCoeffCount>& out) {
    const double x = dir.x(), y = dir.y(), z = dir.z();
    out.fill(0.0);
    out[0] = kC0;
    if (degree < 1) return;
    out[1] = kC1 * y;
    out[2] = kC1 * z;
    out[3] = kC1 * x;
    if (degree < 2) return;
    const double xx = x * x, yy = y * y, zz = z * z;
    out[4] = kC2[0] * x * y;
    out[5] = kC2[1] * y * z;
    out[6] = kC2[2] * (2.0 * zz - xx - yy);
    out[7] = kC2[3] * x * z;
    out[8] = kC2[4] * (xx - yy);
    if (degree < 3) return;
    out[9] = kC3[0] * y * (3.0 * xx - yy);
    out[10] = kC3[1] * x * y * z;
    out[11] = kC3[2] * y * (4.0 * zz - xx - yy);
    out[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    out[13] = kC3[4] * x * (4.0 * zz - xx - yy);
    out[14] = kC3[5] * z * (xx - yy);
    out[15] = kC3[6] * x * (xx - 3.0 * yy);
}

void sh_basis_jacobian(const Eigen::Vector3d& dir, int degree,
                       std::array<double, kShCoeffCount>& basis,
                       std::array<Eigen::Vector3d, kShCoeffCount>& jac) {
    sh_basis(dir, degree, basis);
    const double x = dir.x(), y = dir.y(), z = dir.z();
    for (auto& j : jac) j.setZero();
    if (degree < 1) return;
    jac[1] = Eigen::Vector3d(0, kC1, 0);
    jac[2] = Eigen::Vector3d(0, 0, kC1);
    jac[3] = Eigen::Vector3d(kC1, 0, 0);
    if (degree < 2) return;
    jac[4] = kC2[0] * Eigen::Vector3d(y, x, 0);
    jac[5] = kC2[1] * Eigen::Vector3d(0, z, y);
    jac[6] = kC2[2] * Eigen::Vector3d(-2.0 * x, -2.0 * y, 4.0 * z);
    jac[7] = kC2[3] * Eigen::Vector3d(z, 0, x);
    jac[8] = kC2[4] * Eigen::Vector3d(2.0 * x, -2.0 * y, 0);
    if (degree < 3) return;
    const double xx = x * x, yy = y * y, zz = z * z;
    jac[9] = kC3[0] * Eigen::Vector3d(6.0 * x * y, 3.0 * xx - 3.0 * yy, 0);
    jac[10] = kC3[1] * Eigen::Vector3d(y * z, x * z, x * y);
    jac[11] = kC3[2] * Eigen::Vector3d(-2.0 * x * y, 4.0 * zz - xx - 3.0 * yy, 8.0 * y * z);
    jac[12] = kC3[3] * Eigen::Vector3d(-6.0 * x * z, -6.0 * y * z, 6.0 * zz - 3.0 * xx - 3.0 * yy);
    jac[13] = kC3[4] * Eigen::Vector3d(4.0 * zz - 3.0 * xx - yy, -2.0 * x * y, 8.0 * x * z);
    jac[14] = kC3[5] * Eigen::Vector3d(2.0 * x * z, -2.0 * y * z, xx - yy);
    jac[15] = kC3[6] * Eigen::Vector3d(3.0 * xx - 3.0 * yy, -6.0 * x * y, 0);
}

Eigen::Vector3d eval_sh(const std::array<Eigen::Vector3d, kShCoeffCount>& coeffs,
                        int active_degree, const Eigen::Vector3d& dir) {
    if (active_degree < 0 || active_degree > kShMaxDegree)
        throw std::invalid_argument("eval_sh: active_degree out of range");
    std::array<double, kShCoeffCount> basis;
    sh_basis(dir, active_degree, basis);
    Eigen::Vector3d color(0.5, 0.5, 0.5);
    const int n = sh_basis_count(active_degree);
    for (int i = 0; i < n; ++i) color += basis[i] * coeffs[i];
    return color;
}

void eval_sh_vjp(const std::array<Eigen::Vector3d, kShCoeffCount>& coeffs,
                 int active_degree, const Eigen::Vector3d& dir,
                 const Eigen::Vector3d& d_color,
                 std::array<Eigen::Vector3d, kShCoeffCount>& d_coeffs,
                 Eigen::Vector3d& d_dir) {
    std::array<double, kShCoeffCount> basis;
    std::array<Eigen::Vector3d, kShCoeffCount> jac;
    sh_basis_jacobian(dir, active_degree, basis, jac);
    for (auto& c : d_coeffs) c.setZero();
    d_dir.setZero();
    const int n = sh_basis_count(active_degree);
    for (int i = 0; i < n; ++i) {
        d_coeffs[i] = basis[i] * d_color;
        d_dir += jac[i] * coeffs[i].dot(d_color);
    }
}

} // namespace gsmap

#pragma once

#include <Eigen/Dense>
#include <array>

#include "gsmap/core/gaussian.hpp"

namespace gsmap {

inline constexpr int sh_basis_count(int degree) { return (degree + 1) * (degree + 1); }

/// Real spherical harmonics basis values up to `degree` (<= 3) at a unit
/// direction, in (l, m) order with m ascending. Y_00 = 0.28209479177387814.
void sh_basis(const Eigen::Vector3d& dir, int degree, std::array<double, kShCoeffCount>& out);

/// Basis values and their Jacobian with respect to the direction components.
void sh_basis_jacobian(const Eigen::Vector3d& dir, int degree,
                       std::array<double, kShCoeffCount>& basis,
                       std::array<Eigen::Vector3d, kShCoeffCount>& jac);

/// View-dependent RGB: sum of basis * coefficients plus the 0.5 offset.
/// Unclamped; the renderer clamps to [0, 1] at compositing.
Eigen::Vector3d eval_sh(const std::array<Eigen::Vector3d, kShCoeffCount>& coeffs,
                        int active_degree, const Eigen::Vector3d& dir);

/// Pullback of eval_sh. d_dir is with respect to the (unit) direction as a
/// free 3-vector; callers projecting through a normalization apply that
/// chain themselves.
void eval_sh_vjp(const std::array<Eigen::Vector3d, kShCoeffCount>& coeffs,
                 int active_degree, const Eigen::Vector3d& dir,
                 const Eigen::Vector3d& d_color,
                 std::array<Eigen::Vector3d, kShCoeffCount>& d_coeffs,
                 Eigen::Vector3d& d_dir);

} // namespace gsmap

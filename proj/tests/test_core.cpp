#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "gsmap/core/covariance.hpp"
#include "gsmap/core/projection.hpp"
#include "gsmap/core/sh.hpp"
#include "gsmap/core/types.hpp"

using namespace gsmap;

namespace {

std::mt19937& rng() {
    static std::mt19937 gen(12345);
    return gen;
}

double uni(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng());
}

Eigen::Vector4d random_quat() {
    Eigen::Vector4d q;
    do {
        for (int i = 0; i < 4; ++i) q[i] = uni(-1, 1);
    } while (q.norm() < 0.3);
    return q;
}

/// Independent textbook real spherical harmonics, constants spelled out as
/// closed-form square roots. (l, m) order with m ascending, unit direction.
double sh_reference(int index, const Eigen::Vector3d& d) {
    const double x = d.x(), y = d.y(), z = d.z();
    const double pi = M_PI;
    switch (index) {
        case 0: return 0.5 * std::sqrt(1.0 / pi);
        case 1: return std::sqrt(3.0 / (4.0 * pi)) * y;
        case 2: return std::sqrt(3.0 / (4.0 * pi)) * z;
        case 3: return std::sqrt(3.0 / (4.0 * pi)) * x;
        case 4: return 0.5 * std::sqrt(15.0 / pi) * x * y;
        case 5: return 0.5 * std::sqrt(15.0 / pi) * y * z;
        case 6: return 0.25 * std::sqrt(5.0 / pi) * (3.0 * z * z - 1.0);
        case 7: return 0.5 * std::sqrt(15.0 / pi) * x * z;
        case 8: return 0.25 * std::sqrt(15.0 / pi) * (x * x - y * y);
        case 9: return 0.25 * std::sqrt(35.0 / (2.0 * pi)) * y * (3.0 * x * x - y * y);
        case 10: return 0.5 * std::sqrt(105.0 / pi) * x * y * z;
        case 11: return 0.25 * std::sqrt(21.0 / (2.0 * pi)) * y * (5.0 * z * z - 1.0);
        case 12: return 0.25 * std::sqrt(7.0 / pi) * (5.0 * z * z * z - 3.0 * z);
        case 13: return 0.25 * std::sqrt(21.0 / (2.0 * pi)) * x * (5.0 * z * z - 1.0);
        case 14: return 0.25 * std::sqrt(105.0 / pi) * z * (x * x - y * y);
        case 15: return 0.25 * std::sqrt(35.0 / (2.0 * pi)) * x * (x * x - 3.0 * y * y);
        default: return 0.0;
    }
}

} // namespace

TEST_CASE("build_covariance: identity rotation gives squared scales") {
    const Eigen::Matrix3d s = build_covariance(Eigen::Vector4d(1, 0, 0, 0),
                                               Eigen::Vector3d(0.0, std::log(2.0), std::log(3.0)));
    CHECK((s - Eigen::Vector3d(1, 4, 9).asDiagonal().toDenseMatrix()).norm() < 1e-12);
}

TEST_CASE("build_covariance: 90 degree z rotation swaps axes") {
    const double c = std::cos(M_PI / 4.0);
    const Eigen::Vector4d q(c, 0, 0, std::sin(M_PI / 4.0));
    const Eigen::Matrix3d s = build_covariance(q, Eigen::Vector3d(0.0, std::log(2.0), 0.0));
    CHECK((s - Eigen::Vector3d(4, 1, 1).asDiagonal().toDenseMatrix()).norm() < 1e-12);
}

TEST_CASE("build_covariance matches dense composition oracle") {
    for (int trial = 0; trial < 500; ++trial) {
        const Eigen::Vector4d q = random_quat();
        const Eigen::Vector3d s(uni(-3, 1), uni(-3, 1), uni(-3, 1));
        // Independent route: Eigen quaternion-to-matrix and explicit products.
        const Eigen::Vector4d u = q.normalized();
        const Eigen::Matrix3d r =
            Eigen::Quaterniond(u[0], u[1], u[2], u[3]).toRotationMatrix();
        const Eigen::Matrix3d sm = s.array().exp().matrix().asDiagonal();
        const Eigen::Matrix3d expect = r * sm * sm.transpose() * r.transpose();
        CHECK((build_covariance(q, s) - expect).norm() < 1e-12);
    }
}

TEST_CASE("build_covariance is symmetric positive semi-definite") {
    constexpr int kTrials = 1000000;
    double min_eig = 1e300;
    double max_asym = 0.0;
    for (int trial = 0; trial < kTrials; ++trial) {
        const Eigen::Vector4d q = random_quat();
        const Eigen::Vector3d s(uni(-4, 2), uni(-4, 2), uni(-4, 2));
        const Eigen::Matrix3d sigma = build_covariance(q, s);
        max_asym = std::max(max_asym, (sigma - sigma.transpose()).norm());
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
        es.computeDirect(sigma, Eigen::EigenvaluesOnly);
        min_eig = std::min(min_eig, es.eigenvalues().minCoeff() /
                                        std::max(1.0, es.eigenvalues().maxCoeff()));
    }
    CHECK(max_asym == 0.0); // constructed symmetric
    CHECK(min_eig >= -1e-12);
}

TEST_CASE("build_covariance rotation equivariance") {
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::Vector4d q1 = random_quat().normalized();
        const Eigen::Vector4d q2 = random_quat().normalized();
        const Eigen::Vector3d s(uni(-2, 1), uni(-2, 1), uni(-2, 1));
        const Eigen::Quaterniond eq1(q1[0], q1[1], q1[2], q1[3]);
        const Eigen::Quaterniond prod = eq1 * Eigen::Quaterniond(q2[0], q2[1], q2[2], q2[3]);
        const Eigen::Matrix3d lhs =
            build_covariance(Eigen::Vector4d(prod.w(), prod.x(), prod.y(), prod.z()), s);
        const Eigen::Matrix3d r1 = eq1.toRotationMatrix();
        const Eigen::Matrix3d rhs = r1 * build_covariance(q2, s) * r1.transpose();
        CHECK((lhs - rhs).norm() < 1e-10);
    }
}

TEST_CASE("project_gaussian: on-axis point lands on the principal point") {
    Gaussian3D g;
    g.position = Eigen::Vector3d(0, 0, 1);
    CameraModel cam{100, 100, 50, 50, 101, 101};
    const auto p = project_gaussian(g, Pose{}, cam);
    REQUIRE(p.has_value());
    CHECK(p->mean.x() == doctest::Approx(50.0).epsilon(1e-12));
    CHECK(p->mean.y() == doctest::Approx(50.0).epsilon(1e-12));
    CHECK(p->depth == doctest::Approx(1.0));
    CHECK(p->radius >= 1);
}

TEST_CASE("project_gaussian: behind the camera is culled") {
    Gaussian3D g;
    g.position = Eigen::Vector3d(0, 0, -1);
    CameraModel cam{100, 100, 50, 50, 101, 101};
    CHECK(!project_gaussian(g, Pose{}, cam).has_value());
}

TEST_CASE("project_gaussian mean equals pinhole projection for random poses") {
    CameraModel cam{80, 90, 31.5, 23.5, 64, 48};
    for (int trial = 0; trial < 1000; ++trial) {
        Pose pose(Eigen::Quaterniond::UnitRandom(), Eigen::Vector3d::Random());
        Gaussian3D g;
        const Eigen::Vector3d p_cam(uni(-2, 2), uni(-2, 2), uni(0.05, 10));
        g.position = pose.rotation.conjugate() * (p_cam - pose.translation);
        g.rotation = random_quat();
        g.log_scale = Eigen::Vector3d(uni(-3, 0), uni(-3, 0), uni(-3, 0));
        const auto p = project_gaussian(g, pose, cam);
        REQUIRE(p.has_value());
        CHECK(std::abs(p->mean.x() - (cam.fx * p_cam.x() / p_cam.z() + cam.cx)) < 1e-10);
        CHECK(std::abs(p->mean.y() - (cam.fy * p_cam.y() / p_cam.z() + cam.cy)) < 1e-10);
    }
}

TEST_CASE("projected covariance matches Monte-Carlo pinhole pushforward") {
    // Isotropic sigma = 0.1 at z = 2 on-axis with fx = fy = 100:
    // the analytic image covariance is (fx sigma / z)^2 = 25 per axis.
    const double sigma = 0.1, z = 2.0, fx = 100.0;
    Gaussian3D g;
    g.position = Eigen::Vector3d(0, 0, z);
    g.log_scale.setConstant(std::log(sigma));
    CameraModel cam{fx, fx, 50, 50, 101, 101};
    const auto p = project_gaussian(g, Pose{}, cam);
    REQUIRE(p.has_value());

    std::mt19937 gen(7);
    std::normal_distribution<double> n(0.0, sigma);
    const int samples = 200000;
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d second = Eigen::Matrix2d::Zero();
    for (int i = 0; i < samples; ++i) {
        const Eigen::Vector3d q(n(gen), n(gen), z + n(gen));
        const Eigen::Vector2d uv(fx * q.x() / q.z() + 50, fx * q.y() / q.z() + 50);
        mean += uv;
        second += uv * uv.transpose();
    }
    mean /= samples;
    const Eigen::Matrix2d emp = second / samples - mean * mean.transpose();
    for (int i = 0; i < 2; ++i)
        CHECK(std::abs(p->cov2d(i, i) - 25.0) < 0.05 * 25.0);
    CHECK((emp - (p->cov2d - kCovRegularization * Eigen::Matrix2d::Identity())).norm() <
          0.05 * 25.0);
}

TEST_CASE("eval_gaussian_2d: unit value at the mean, analytic offset") {
    Gaussian2D g2;
    g2.mean = Eigen::Vector2d(3.5, -2.0);
    g2.cov2d = Eigen::Matrix2d::Identity();
    CHECK(eval_gaussian_2d(g2, g2.mean) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(eval_gaussian_2d(g2, g2.mean + Eigen::Vector2d(1, 0)) ==
          doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
}

TEST_CASE("eval_gaussian_2d matches dense quadratic-form oracle") {
    for (int trial = 0; trial < 1000; ++trial) {
        Eigen::Matrix2d a;
        for (int i = 0; i < 4; ++i) a.data()[i] = uni(-2, 2);
        Gaussian2D g2;
        g2.cov2d = a * a.transpose() + kCovRegularization * Eigen::Matrix2d::Identity();
        g2.mean = Eigen::Vector2d(uni(-10, 10), uni(-10, 10));
        const Eigen::Vector2d x(uni(-12, 12), uni(-12, 12));
        // Independent route: full-pivot solve instead of the inverse.
        const Eigen::Vector2d d = x - g2.mean;
        const double expect = std::exp(-0.5 * d.dot(g2.cov2d.fullPivLu().solve(d)));
        CHECK(eval_gaussian_2d(g2, x) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("eval_gaussian_2d stays in (0, 1] with the maximum at the mean") {
    for (int trial = 0; trial < 300; ++trial) {
        Eigen::Matrix2d a;
        for (int i = 0; i < 4; ++i) a.data()[i] = uni(-2, 2);
        Gaussian2D g2;
        g2.cov2d = a * a.transpose() + kCovRegularization * Eigen::Matrix2d::Identity();
        g2.mean = Eigen::Vector2d(uni(-5, 5), uni(-5, 5));
        const Eigen::Vector2d x(uni(-8, 8), uni(-8, 8));
        const double v = eval_gaussian_2d(g2, x);
        CHECK(v > 0.0);
        CHECK(v <= 1.0);
        CHECK(v <= eval_gaussian_2d(g2, g2.mean));
    }
}

TEST_CASE("eval_sh: degree 0 reproduces the offset convention") {
    std::array<Eigen::Vector3d, kShCoeffCount> coeffs{};
    coeffs.fill(Eigen::Vector3d::Zero());
    coeffs[0] = Eigen::Vector3d(0.5 / 0.28209479177387814, 0.0, 0.0);
    const Eigen::Vector3d c = eval_sh(coeffs, 0, Eigen::Vector3d::UnitZ());
    CHECK(c.x() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(c.y() == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(c.z() == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("eval_sh: degree 0 is view independent") {
    std::array<Eigen::Vector3d, kShCoeffCount> coeffs;
    for (auto& c : coeffs) c = Eigen::Vector3d(uni(-1, 1), uni(-1, 1), uni(-1, 1));
    const Eigen::Vector3d a = eval_sh(coeffs, 0, Eigen::Vector3d(1, 0, 0));
    const Eigen::Vector3d b = eval_sh(coeffs, 0, Eigen::Vector3d(0, 0.6, 0.8));
    CHECK((a - b).norm() == 0.0);
}

TEST_CASE("eval_sh matches the textbook direct summation oracle") {
    for (int trial = 0; trial < 500; ++trial) {
        std::array<Eigen::Vector3d, kShCoeffCount> coeffs;
        for (auto& c : coeffs) c = Eigen::Vector3d(uni(-1, 1), uni(-1, 1), uni(-1, 1));
        Eigen::Vector3d dir(uni(-1, 1), uni(-1, 1), uni(-1, 1));
        while (dir.norm() < 0.1) dir = Eigen::Vector3d(uni(-1, 1), uni(-1, 1), uni(-1, 1));
        dir.normalize();
        Eigen::Vector3d expect(0.5, 0.5, 0.5);
        for (int i = 0; i < 16; ++i) expect += sh_reference(i, dir) * coeffs[i];
        CHECK((eval_sh(coeffs, 3, dir) - expect).norm() < 1e-10);
    }
}

TEST_CASE("camera scaling halves the lattice consistently") {
    CameraModel cam{130, 130, 79.5, 59.5, 160, 120};
    const CameraModel half = cam.scaled(1);
    CHECK(half.width == 80);
    CHECK(half.height == 60);
    // A world point projecting to full-res coordinate (2u + 0.5) lands on u.
    const double z = 3.0, u_half = 17.0;
    const double x = (2.0 * u_half + 0.5 - cam.cx) * z / cam.fx;
    CHECK(half.fx * x / z + half.cx == doctest::Approx(u_half).epsilon(1e-12));
}

TEST_CASE("rotation_angle is a symmetric geodesic metric") {
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Quaterniond a = Eigen::Quaterniond::UnitRandom();
        const Eigen::Quaterniond b = Eigen::Quaterniond::UnitRandom();
        CHECK(rotation_angle(a, b) == doctest::Approx(rotation_angle(b, a)));
        CHECK(rotation_angle(a, a) == doctest::Approx(0.0).epsilon(1e-6));
        // A sign flip is the same rotation.
        const Eigen::Quaterniond neg(-a.w(), -a.x(), -a.y(), -a.z());
        CHECK(rotation_angle(a, neg) == doctest::Approx(0.0).epsilon(1e-6));
    }
}

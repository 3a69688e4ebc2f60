#include <doctest.h>

#include <random>

#include "gsmap/core/types.hpp"
#include "gsmap/map/gaussian_map.hpp"
#include "gsmap/pipeline/gradcheck.hpp"
#include "gsmap/render/rasterizer.hpp"
#include "support/brute_force.hpp"

using namespace gsmap;
using gsmap::testing::brute_force_render;
using gsmap::testing::random_scene;

namespace {

constexpr double kShC0 = 0.28209479177387814;

Gaussian3D make_blob(const Eigen::Vector3d& pos, double opacity, const Eigen::Vector3d& color,
                     double log_scale = -1.5) {
    Gaussian3D g;
    g.position = pos;
    g.log_scale.setConstant(log_scale);
    g.opacity_logit = logit(opacity);
    g.sh_coeffs.fill(Eigen::Vector3d::Zero());
    g.sh_coeffs[0] = (color - Eigen::Vector3d::Constant(0.5)) / kShC0;
    return g;
}

CameraModel small_cam() { return CameraModel{100, 100, 32, 32, 64, 64}; }

double max_abs_diff(const ImageD& a, const ImageD& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

} // namespace

TEST_CASE("render: empty map yields background everywhere") {
    GaussianMap map;
    const RenderOutput out = render(map, Pose{}, small_cam());
    for (size_t i = 0; i < out.color.size(); ++i) CHECK(out.color.data()[i] == 0.0);
    for (size_t i = 0; i < out.depth.size(); ++i) CHECK(out.depth.data()[i] == 0.0);
    for (size_t i = 0; i < out.visibility.size(); ++i) CHECK(out.visibility.data()[i] == 0.0);
    CHECK(out.contributors(10, 10).empty());
}

TEST_CASE("render: single on-axis Gaussian composites one term") {
    // Mean exactly on pixel (32, 32): the Gaussian value there is 1, so the
    // pixel alpha equals the learned opacity.
    GaussianMap map;
    map.append({make_blob({0, 0, 2}, 0.7, {1, 0, 0})});
    const RenderOutput out = render(map, Pose{}, small_cam());
    CHECK(out.color.at(32, 32, 0) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(out.color.at(32, 32, 1) == doctest::Approx(0.0));
    CHECK(out.depth.at(32, 32) == doctest::Approx(1.4).epsilon(1e-12));
    CHECK(out.visibility.at(32, 32) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("render: two stacked Gaussians composite front to back") {
    GaussianMap map;
    map.append({make_blob({0, 0, 3}, 0.5, {0, 1, 0}),   // back, green
                make_blob({0, 0, 2}, 0.5, {1, 0, 0})}); // front, red
    const RenderOutput out = render(map, Pose{}, small_cam());
    CHECK(out.color.at(32, 32, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(out.color.at(32, 32, 1) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(out.visibility.at(32, 32) == doctest::Approx(0.75).epsilon(1e-12));
    const auto list = out.contributors(32, 32);
    REQUIRE(list.size() == 2);
    CHECK(list[0].gaussian == 1); // front (depth 2) composites first
    CHECK(list[1].gaussian == 0);
}

TEST_CASE("tile renderer matches the brute-force oracle") {
    std::mt19937 gen(99);
    const CameraModel cam = small_cam();
    for (int scene = 0; scene < 12; ++scene) {
        const Pose pose(Eigen::Quaterniond::UnitRandom(), Eigen::Vector3d::Random() * 0.3);
        const GaussianMap map = random_scene(gen, 200, cam, pose);
        const RenderOutput tiled = render(map, pose, cam);
        const auto brute = brute_force_render(map, pose, cam);
        CHECK(max_abs_diff(tiled.color, brute.color) <= 1e-5);
        CHECK(max_abs_diff(tiled.depth, brute.depth) <= 1e-5);
        CHECK(max_abs_diff(tiled.visibility, brute.visibility) <= 1e-5);
    }
}

TEST_CASE("render is invariant to insertion order") {
    std::mt19937 gen(7);
    const CameraModel cam = small_cam();
    const Pose pose;
    const GaussianMap map = random_scene(gen, 60, cam, pose);
    std::vector<Gaussian3D> shuffled = map.gaussians();
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    GaussianMap map2;
    map2.append(shuffled);
    const RenderOutput a = render(map, pose, cam);
    const RenderOutput b = render(map2, pose, cam);
    CHECK(max_abs_diff(a.color, b.color) == 0.0);
    CHECK(max_abs_diff(a.depth, b.depth) == 0.0);
    CHECK(max_abs_diff(a.visibility, b.visibility) == 0.0);
}

TEST_CASE("compositing identity: visibility complements transmittance") {
    std::mt19937 gen(11);
    const CameraModel cam = small_cam();
    const Pose pose;
    const GaussianMap map = random_scene(gen, 150, cam, pose);
    const RenderOutput out = render(map, pose, cam);
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            double t = 1.0;
            for (const Contribution& c : out.contributors(y, x)) t *= 1.0 - c.alpha;
            CHECK(std::abs(out.visibility.at(y, x) + t - 1.0) < 1e-6);
            for (int ch = 0; ch < 3; ++ch) CHECK(out.color.at(y, x, ch) <= 1.0 + 1e-6);
        }
    }
}

TEST_CASE("raising opacity never lowers visibility (moderate scenes)") {
    std::mt19937 gen(31);
    const CameraModel cam = small_cam();
    const Pose pose;
    for (int trial = 0; trial < 10; ++trial) {
        GaussianMap map = random_scene(gen, 40, cam, pose, -2.0, 0.5);
        const RenderOutput before = render(map, pose, cam);
        std::uniform_int_distribution<size_t> pick(0, map.size() - 1);
        map.gaussians()[pick(gen)].opacity_logit += 0.8;
        const RenderOutput after = render(map, pose, cam);
        for (size_t i = 0; i < before.visibility.size(); ++i)
            CHECK(after.visibility.data()[i] >= before.visibility.data()[i] - 1e-12);
    }
}

TEST_CASE("render parallelism: thread counts agree and are deterministic") {
    std::mt19937 gen(23);
    const CameraModel cam{120, 120, 63.5, 47.5, 128, 96};
    const Pose pose;
    const GaussianMap map = random_scene(gen, 250, cam, pose);
    ThreadPool pool3(3);
    ThreadPool pool3b(3);
    ThreadPool pool7(7);
    const RenderOutput serial = render(map, pose, cam);
    const RenderOutput par3 = render(map, pose, cam, &pool3);
    const RenderOutput par3b = render(map, pose, cam, &pool3b);
    const RenderOutput par7 = render(map, pose, cam, &pool7);
    CHECK(max_abs_diff(par3.color, par3b.color) == 0.0); // fixed thread count: bitwise
    CHECK(max_abs_diff(serial.color, par3.color) < 1e-12);
    CHECK(max_abs_diff(serial.color, par7.color) < 1e-12);

    // Backward: per-thread buffers reduced deterministically.
    ImageD d_color(cam.height, cam.width, 3);
    ImageD d_depth(cam.height, cam.width, 1);
    std::uniform_real_distribution<double> u(-1, 1);
    for (size_t i = 0; i < d_color.size(); ++i) d_color.data()[i] = u(gen);
    for (size_t i = 0; i < d_depth.size(); ++i) d_depth.data()[i] = u(gen);
    const RenderGradients gs = render_backward(map, pose, cam, serial, d_color, d_depth);
    const RenderGradients g3 = render_backward(map, pose, cam, par3, d_color, d_depth, &pool3);
    const RenderGradients g3b = render_backward(map, pose, cam, par3b, d_color, d_depth, &pool3b);
    const RenderGradients g7 = render_backward(map, pose, cam, par7, d_color, d_depth, &pool7);
    double worst_fixed = 0.0, worst_cross = 0.0;
    for (size_t i = 0; i < map.size(); ++i) {
        worst_fixed = std::max(worst_fixed,
                               (g3.per_gaussian[i].position - g3b.per_gaussian[i].position)
                                   .cwiseAbs()
                                   .maxCoeff());
        worst_cross = std::max(worst_cross,
                               (gs.per_gaussian[i].position - g7.per_gaussian[i].position)
                                   .cwiseAbs()
                                   .maxCoeff());
    }
    CHECK(worst_fixed == 0.0);
    CHECK(worst_cross < 1e-6);
}

TEST_CASE("render_backward: zero cotangents give exactly zero gradients") {
    std::mt19937 gen(5);
    const CameraModel cam = small_cam();
    const Pose pose;
    const GaussianMap map = random_scene(gen, 30, cam, pose);
    const RenderOutput out = render(map, pose, cam);
    const ImageD zc(cam.height, cam.width, 3, 0.0);
    const ImageD zd(cam.height, cam.width, 1, 0.0);
    const RenderGradients g = render_backward(map, pose, cam, out, zc, zd);
    for (const auto& gg : g.per_gaussian) {
        CHECK(gg.position.norm() == 0.0);
        CHECK(gg.rotation.norm() == 0.0);
        CHECK(gg.log_scale.norm() == 0.0);
        CHECK(gg.opacity_logit == 0.0);
    }
}

TEST_CASE("render_backward: non-contributing Gaussians get exactly zero gradients") {
    GaussianMap map;
    map.append({make_blob({0, 0, 2}, 0.7, {1, 0, 0}),
                make_blob({100, 100, 2}, 0.7, {0, 1, 0})}); // far off screen
    const CameraModel cam = small_cam();
    const RenderOutput out = render(map, Pose{}, cam);
    ImageD d_color(cam.height, cam.width, 3, 1.0);
    ImageD d_depth(cam.height, cam.width, 1, 0.5);
    const RenderGradients g = render_backward(map, Pose{}, cam, out, d_color, d_depth);
    CHECK(g.per_gaussian[0].position.norm() > 0.0);
    CHECK(g.per_gaussian[1].position.norm() == 0.0);
    CHECK(g.per_gaussian[1].rotation.norm() == 0.0);
    CHECK(g.per_gaussian[1].opacity_logit == 0.0);
}

TEST_CASE("render_backward: single-Gaussian opacity gradient matches the closed form") {
    // Loss = red channel of the center pixel. With the mean on the pixel,
    // C = o * c_r, so dC/d logit = c_r * o * (1 - o).
    const double opacity = 0.7;
    GaussianMap map;
    map.append({make_blob({0, 0, 2}, opacity, {1, 0, 0})});
    const CameraModel cam = small_cam();
    const RenderOutput out = render(map, Pose{}, cam);
    ImageD d_color(cam.height, cam.width, 3, 0.0);
    ImageD d_depth(cam.height, cam.width, 1, 0.0);
    d_color.at(32, 32, 0) = 1.0;
    const RenderGradients g = render_backward(map, Pose{}, cam, out, d_color, d_depth);
    const double hand = 1.0 * opacity * (1.0 - opacity);
    CHECK(g.per_gaussian[0].opacity_logit == doctest::Approx(hand).epsilon(1e-9));

    // Central finite differences on the same scalar.
    const double h = 1e-4;
    auto loss_at = [&](double logit_value) {
        GaussianMap m2;
        auto gg = map.gaussians()[0];
        gg.opacity_logit = logit_value;
        m2.append({gg});
        return render(m2, Pose{}, cam).color.at(32, 32, 0);
    };
    const double fd =
        (loss_at(logit(opacity) + h) - loss_at(logit(opacity) - h)) / (2.0 * h);
    CHECK(g.per_gaussian[0].opacity_logit == doctest::Approx(fd).epsilon(1e-5));
}

TEST_CASE("render_backward rejects mismatched cotangent buffers") {
    GaussianMap map;
    map.append({make_blob({0, 0, 2}, 0.5, {1, 0, 0})});
    const CameraModel cam = small_cam();
    const RenderOutput out = render(map, Pose{}, cam);
    const ImageD bad_color(10, 10, 3, 0.0);
    const ImageD d_depth(cam.height, cam.width, 1, 0.0);
    CHECK_THROWS_AS(render_backward(map, Pose{}, cam, out, bad_color, d_depth),
                    std::invalid_argument);
}

TEST_CASE("gradient check: full render against finite differences (sampled)") {
    GradCheckOptions opts;
    opts.seed = 3;
    opts.configs = 60;
    opts.core_configs = 120;
    opts.n_gaussians = 25;
    const GradCheckResult res = run_gradcheck(opts);
    INFO(res.summary);
    CHECK(res.passed);
    CHECK(res.max_rel_err_core < 1e-4);
    CHECK(res.max_rel_err_render < 1e-3);
}

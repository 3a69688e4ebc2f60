#include "gsmap/pipeline/gradcheck.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "gsmap/core/covariance.hpp"
#include "gsmap/core/projection.hpp"
#include "gsmap/core/sh.hpp"
#include "gsmap/map/gaussian_map.hpp"
#include "gsmap/render/rasterizer.hpp"

namespace gsmap {

namespace {

constexpr double kStep = 1e-4;
constexpr double kEdgeBand = 0.01;   // pixels; guard around footprint edges
constexpr double kErrFloor = 1e-6;

double rel_err(double analytic, double fd) {
    const double denom = std::max({std::abs(analytic), std::abs(fd), kErrFloor});
    return std::abs(analytic - fd) / denom;
}

double uni(std::mt19937& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// ---------------------------------------------------------------------------
// Core primitives
// ---------------------------------------------------------------------------

double check_build_covariance(std::mt19937& rng) {
    Eigen::Vector4d q;
    do {
        for (int i = 0; i < 4; ++i) q[i] = uni(rng, -1.0, 1.0);
    } while (q.norm() < 0.5);
    Eigen::Vector3d s;
    for (int i = 0; i < 3; ++i) s[i] = uni(rng, -2.0, 0.5);
    Eigen::Matrix3d w;
    for (int i = 0; i < 9; ++i) w.data()[i] = uni(rng, -1.0, 1.0);

    Eigen::Vector4d d_q;
    Eigen::Vector3d d_s;
    build_covariance_vjp(q, s, w, d_q, d_s);

    double worst = 0.0;
    auto loss = [&](const Eigen::Vector4d& qq, const Eigen::Vector3d& ss) {
        return (w.array() * build_covariance(qq, ss).array()).sum();
    };
    for (int i = 0; i < 4; ++i) {
        Eigen::Vector4d hi = q, lo = q;
        hi[i] += kStep;
        lo[i] -= kStep;
        worst = std::max(worst, rel_err(d_q[i], (loss(hi, s) - loss(lo, s)) / (2 * kStep)));
    }
    for (int i = 0; i < 3; ++i) {
        Eigen::Vector3d hi = s, lo = s;
        hi[i] += kStep;
        lo[i] -= kStep;
        worst = std::max(worst, rel_err(d_s[i], (loss(q, hi) - loss(q, lo)) / (2 * kStep)));
    }
    return worst;
}

double check_project(std::mt19937& rng) {
    Gaussian3D g;
    Pose pose(Eigen::Quaterniond(uni(rng, -1, 1), uni(rng, -1, 1), uni(rng, -1, 1),
                                 uni(rng, -1, 1))
                  .normalized(),
              Eigen::Vector3d(uni(rng, -1, 1), uni(rng, -1, 1), uni(rng, -1, 1)));
    CameraModel cam{50.0, 55.0, 31.5, 31.5, 64, 64};
    const Eigen::Vector3d p_cam(uni(rng, -1, 1), uni(rng, -1, 1), uni(rng, 1.0, 5.0));
    g.position = pose.rotation.conjugate() * (p_cam - pose.translation);
    do {
        for (int i = 0; i < 4; ++i) g.rotation[i] = uni(rng, -1.0, 1.0);
    } while (g.rotation.norm() < 0.5);
    for (int i = 0; i < 3; ++i) g.log_scale[i] = uni(rng, -3.0, -0.5);

    Eigen::Vector2d w_mean(uni(rng, -1, 1), uni(rng, -1, 1));
    Eigen::Matrix2d w_cov;
    for (int i = 0; i < 4; ++i) w_cov.data()[i] = uni(rng, -1, 1);
    const double w_depth = uni(rng, -1, 1);

    Eigen::Vector3d d_pos, d_scale;
    Eigen::Vector4d d_rot;
    project_gaussian_vjp(g, pose, cam, w_mean, w_cov, w_depth, d_pos, d_rot, d_scale);

    auto loss = [&](const Gaussian3D& gg) {
        const auto p2 = project_gaussian(gg, pose, cam);
        return w_mean.dot(p2->mean) + (w_cov.array() * p2->cov2d.array()).sum() +
               w_depth * p2->depth;
    };
    double worst = 0.0;
    for (int i = 0; i < 3; ++i) {
        Gaussian3D hi = g, lo = g;
        hi.position[i] += kStep;
        lo.position[i] -= kStep;
        worst = std::max(worst, rel_err(d_pos[i], (loss(hi) - loss(lo)) / (2 * kStep)));
    }
    for (int i = 0; i < 4; ++i) {
        Gaussian3D hi = g, lo = g;
        hi.rotation[i] += kStep;
        lo.rotation[i] -= kStep;
        worst = std::max(worst, rel_err(d_rot[i], (loss(hi) - loss(lo)) / (2 * kStep)));
    }
    for (int i = 0; i < 3; ++i) {
        Gaussian3D hi = g, lo = g;
        hi.log_scale[i] += kStep;
        lo.log_scale[i] -= kStep;
        worst = std::max(worst, rel_err(d_scale[i], (loss(hi) - loss(lo)) / (2 * kStep)));
    }
    return worst;
}

double check_eval2d(std::mt19937& rng) {
    Eigen::Matrix2d a;
    for (int i = 0; i < 4; ++i) a.data()[i] = uni(rng, -2, 2);
    Eigen::Matrix2d cov = a * a.transpose();
    cov.diagonal().array() += kCovRegularization;
    const Eigen::Vector2d mean(uni(rng, -5, 5), uni(rng, -5, 5));
    const double sigma = std::sqrt(cov.trace() / 2.0);
    const Eigen::Vector2d x = mean + Eigen::Vector2d(uni(rng, -2, 2), uni(rng, -2, 2)) * sigma;
    const double w = uni(rng, -1, 1);

    const Eigen::Matrix2d cov_inv = cov.inverse();
    const double value = eval_gaussian_2d_conic(mean, cov_inv, x);
    Eigen::Vector2d d_mean, d_x;
    Eigen::Matrix2d d_cov;
    eval_gaussian_2d_vjp(mean, cov_inv, x, value, w, d_mean, d_cov, d_x);

    auto loss = [&](const Eigen::Vector2d& m, const Eigen::Matrix2d& c, const Eigen::Vector2d& xx) {
        return w * eval_gaussian_2d_conic(m, c.inverse(), xx);
    };
    double worst = 0.0;
    for (int i = 0; i < 2; ++i) {
        Eigen::Vector2d hi = mean, lo = mean;
        hi[i] += kStep;
        lo[i] -= kStep;
        worst = std::max(worst, rel_err(d_mean[i], (loss(hi, cov, x) - loss(lo, cov, x)) / (2 * kStep)));
        hi = x;
        lo = x;
        hi[i] += kStep;
        lo[i] -= kStep;
        worst = std::max(worst, rel_err(d_x[i], (loss(mean, cov, hi) - loss(mean, cov, lo)) / (2 * kStep)));
    }
    // Symmetric perturbations stay on the covariance manifold.
    for (int i = 0; i < 2; ++i) {
        for (int j = i; j < 2; ++j) {
            Eigen::Matrix2d hi = cov, lo = cov;
            hi(i, j) += kStep;
            hi(j, i) = hi(i, j);
            lo(i, j) -= kStep;
            lo(j, i) = lo(i, j);
            const double fd = (loss(mean, hi, x) - loss(mean, lo, x)) / (2 * kStep);
            const double analytic = i == j ? d_cov(i, i) : d_cov(i, j) + d_cov(j, i);
            worst = std::max(worst, rel_err(analytic, fd));
        }
    }
    return worst;
}

double check_sh(std::mt19937& rng) {
    std::array<Eigen::Vector3d, kShCoeffCount> coeffs;
    for (auto& c : coeffs)
        c = Eigen::Vector3d(uni(rng, -1, 1), uni(rng, -1, 1), uni(rng, -1, 1));
    Eigen::Vector3d raw;
    do {
        raw = Eigen::Vector3d(uni(rng, -1, 1), uni(rng, -1, 1), uni(rng, -1, 1));
    } while (raw.norm() < 0.3);
    const Eigen::Vector3d w(uni(rng, -1, 1), uni(rng, -1, 1), uni(rng, -1, 1));
    const int degree = 3;

    const Eigen::Vector3d dir = raw.normalized();
    std::array<Eigen::Vector3d, kShCoeffCount> d_coeffs;
    Eigen::Vector3d d_dir;
    eval_sh_vjp(coeffs, degree, dir, w, d_coeffs, d_dir);
    const Eigen::Vector3d d_raw = (d_dir - dir * dir.dot(d_dir)) / raw.norm();

    auto loss = [&](const std::array<Eigen::Vector3d, kShCoeffCount>& cc,
                    const Eigen::Vector3d& rr) {
        return w.dot(eval_sh(cc, degree, rr.normalized()));
    };
    double worst = 0.0;
    for (int k = 0; k < kShCoeffCount; ++k) {
        for (int c = 0; c < 3; ++c) {
            auto hi = coeffs, lo = coeffs;
            hi[k][c] += kStep;
            lo[k][c] -= kStep;
            worst = std::max(worst, rel_err(d_coeffs[k][c], (loss(hi, raw) - loss(lo, raw)) / (2 * kStep)));
        }
    }
    for (int i = 0; i < 3; ++i) {
        Eigen::Vector3d hi = raw, lo = raw;
        hi[i] += kStep;
        lo[i] -= kStep;
        worst = std::max(worst, rel_err(d_raw[i], (loss(coeffs, hi) - loss(coeffs, lo)) / (2 * kStep)));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Full render
// ---------------------------------------------------------------------------

struct RenderConfig {
    GaussianMap map;
    Pose pose;
    CameraModel cam;
    ImageD w_color;
    ImageD w_depth;
};

RenderConfig draw_render_config(std::mt19937& rng, int n_gaussians, int image_size) {
    RenderConfig rc;
    rc.cam = CameraModel{40.0, 42.0, (image_size - 1) / 2.0, (image_size - 1) / 2.0,
                         image_size, image_size};
    rc.pose = Pose(Eigen::Quaterniond(uni(rng, -1, 1), uni(rng, -1, 1), uni(rng, -1, 1),
                                      uni(rng, -1, 1))
                       .normalized(),
                   Eigen::Vector3d(uni(rng, -0.5, 0.5), uni(rng, -0.5, 0.5), uni(rng, -0.5, 0.5)));
    const int n = std::max(1, n_gaussians);
    std::vector<Gaussian3D> gs(n);
    for (auto& g : gs) {
        const double z = uni(rng, 1.5, 6.0);
        const Eigen::Vector3d p_cam(uni(rng, -0.35, 0.35) * z, uni(rng, -0.35, 0.35) * z, z);
        g.position = rc.pose.rotation.conjugate() * (p_cam - rc.pose.translation);
        do {
            for (int i = 0; i < 4; ++i) g.rotation[i] = uni(rng, -1.0, 1.0);
        } while (g.rotation.norm() < 0.5);
        for (int i = 0; i < 3; ++i) g.log_scale[i] = std::log(uni(rng, 0.05, 0.25));
        g.opacity_logit = uni(rng, -2.5, 1.5);
        g.active_degree = static_cast<int>(uni(rng, 0.0, 3.999));
        g.sh_coeffs.fill(Eigen::Vector3d::Zero());
        for (int c = 0; c < 3; ++c) g.sh_coeffs[0][c] = uni(rng, -0.7, 0.7);
        for (int k = 1; k < sh_basis_count(g.active_degree); ++k)
            for (int c = 0; c < 3; ++c) g.sh_coeffs[k][c] = uni(rng, -0.04, 0.04);
    }
    rc.map.append(gs);

    rc.w_color = ImageD(image_size, image_size, 3);
    rc.w_depth = ImageD(image_size, image_size, 1);
    for (size_t i = 0; i < rc.w_color.size(); ++i) rc.w_color.data()[i] = uni(rng, -1, 1);
    for (size_t i = 0; i < rc.w_depth.size(); ++i) rc.w_depth.data()[i] = uni(rng, -0.3, 0.3);
    return rc;
}

/// True when the rendered configuration sits clear of every non-smooth
/// boundary a finite-difference step could cross.
bool config_is_smooth(const RenderConfig& rc, const RenderOutput& out) {
    if (out.projected.size() != rc.map.size()) return false; // something culled
    for (const ProjectedGaussian& pg : out.projected) {
        if (pg.depth < 0.2) return false;
        const double fx_ = pg.mean.x() - std::floor(pg.mean.x());
        const double fy_ = pg.mean.y() - std::floor(pg.mean.y());
        if (fx_ < kEdgeBand || fx_ > 1.0 - kEdgeBand) return false;
        if (fy_ < kEdgeBand || fy_ > 1.0 - kEdgeBand) return false;
        // ceil(3 sigma_max) about to flip.
        const double half_trace = 0.5 * pg.cov2d.trace();
        const double det = pg.cov2d.determinant();
        const double lmax = half_trace + std::sqrt(std::max(half_trace * half_trace - det, 0.0));
        const double r = 3.0 * std::sqrt(lmax);
        if (std::abs(r - std::round(r)) < kEdgeBand) return false;
        for (int c = 0; c < 3; ++c)
            if (pg.color_raw[c] < 0.03 || pg.color_raw[c] > 0.97) return false;
        if (pg.opacity > 0.95) return false;
    }
    // Early-termination threshold crossings.
    const int h = out.color.height(), w = out.color.width();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double t = 1.0;
            for (const Contribution& c : out.contributors(y, x)) {
                t *= 1.0 - c.alpha;
                if (t > 2.0 * kTransmittanceMin) continue;
                if (t > 0.5 * kTransmittanceMin) return false;
                break;
            }
        }
    }
    return true;
}

double weighted_loss(const RenderConfig& rc) {
    const RenderOutput out = render(rc.map, rc.pose, rc.cam);
    double loss = 0.0;
    for (size_t i = 0; i < out.color.size(); ++i)
        loss += out.color.data()[i] * rc.w_color.data()[i];
    for (size_t i = 0; i < out.depth.size(); ++i)
        loss += out.depth.data()[i] * rc.w_depth.data()[i];
    return loss;
}

/// One finite-difference probe of a single scalar parameter.
double fd_probe(RenderConfig& rc, size_t gi, int slot, int idx, double* analytic,
                const RenderGradients& grads) {
    Gaussian3D& g = rc.map.gaussians()[gi];
    double* target = nullptr;
    switch (slot) {
        case 0: target = &g.position[idx % 3]; *analytic = grads.per_gaussian[gi].position[idx % 3]; break;
        case 1: target = &g.rotation[idx % 4]; *analytic = grads.per_gaussian[gi].rotation[idx % 4]; break;
        case 2: target = &g.log_scale[idx % 3]; *analytic = grads.per_gaussian[gi].log_scale[idx % 3]; break;
        case 3: target = &g.opacity_logit; *analytic = grads.per_gaussian[gi].opacity_logit; break;
        default: {
            const int k = (idx / 3) % sh_basis_count(g.active_degree);
            const int c = idx % 3;
            target = &g.sh_coeffs[k][c];
            *analytic = grads.per_gaussian[gi].sh_coeffs[k][c];
            break;
        }
    }
    const double saved = *target;
    *target = saved + kStep;
    const double hi = weighted_loss(rc);
    *target = saved - kStep;
    const double lo = weighted_loss(rc);
    *target = saved;
    return (hi - lo) / (2.0 * kStep);
}

} // namespace

GradCheckResult run_gradcheck(const GradCheckOptions& opts) {
    GradCheckResult res;
    std::mt19937 rng(opts.seed);

    for (int i = 0; i < opts.core_configs; ++i) {
        res.max_rel_err_core = std::max(res.max_rel_err_core, check_build_covariance(rng));
        res.max_rel_err_core = std::max(res.max_rel_err_core, check_project(rng));
        res.max_rel_err_core = std::max(res.max_rel_err_core, check_eval2d(rng));
        res.max_rel_err_core = std::max(res.max_rel_err_core, check_sh(rng));
    }

    std::uniform_int_distribution<int> slot_pick(0, 4);
    for (int cfg = 0; cfg < opts.configs; ++cfg) {
        RenderConfig rc;
        RenderOutput out;
        for (;;) {
            rc = draw_render_config(rng, opts.n_gaussians, opts.image_size);
            out = render(rc.map, rc.pose, rc.cam);
            if (config_is_smooth(rc, out)) break;
            ++res.configs_resampled;
        }
        const RenderGradients grads =
            render_backward(rc.map, rc.pose, rc.cam, out, rc.w_color, rc.w_depth);

        std::uniform_int_distribution<size_t> g_pick(0, rc.map.size() - 1);
        for (int p = 0; p < opts.params_per_config; ++p) {
            const size_t gi = g_pick(rng);
            const int slot = p < 5 ? p : slot_pick(rng); // cover every group first
            const int idx = static_cast<int>(rng() % 14400);
            double analytic = 0.0;
            const double fd = fd_probe(rc, gi, slot, idx, &analytic, grads);
            res.max_rel_err_render = std::max(res.max_rel_err_render, rel_err(analytic, fd));
        }
        ++res.configs_run;
    }

    res.passed = res.max_rel_err_core < opts.core_tolerance &&
                 res.max_rel_err_render < opts.render_tolerance;
    std::ostringstream os;
    os << "core primitives: max rel err " << res.max_rel_err_core << " (tol "
       << opts.core_tolerance << ")\n"
       << "render: max rel err " << res.max_rel_err_render << " (tol " << opts.render_tolerance
       << ") over " << res.configs_run << " configurations (" << res.configs_resampled
       << " resampled)\n"
       << (res.passed ? "PASS" : "FAIL") << '\n';
    res.summary = os.str();
    return res;
}

} // namespace gsmap

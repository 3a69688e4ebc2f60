#include "gsmap/map/mapper.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gsmap/core/sh.hpp"
#include "gsmap/metrics/metrics.hpp"

namespace gsmap {

namespace {

constexpr double kShC0 = 0.28209479177387814;
constexpr double kMinInitScale = 1e-4; // meters
constexpr double kDefaultInitScale = 0.1;
constexpr double kInitOpacity = 0.1;

double mean_knn_distance(std::span<const ColoredPoint> points, size_t i, int k) {
    // Brute force over the batch; packets are a few thousand points at most.
    std::array<double, 3> best{};
    int found = 0;
    for (size_t j = 0; j < points.size(); ++j) {
        if (j == i) continue;
        const double d2 = (points[j].position - points[i].position).squaredNorm();
        if (found < k) {
            best[found++] = d2;
            std::push_heap(best.begin(), best.begin() + found);
        } else if (d2 < best.front()) {
            std::pop_heap(best.begin(), best.begin() + k);
            best[k - 1] = d2;
            std::push_heap(best.begin(), best.begin() + k);
        }
    }
    if (found == 0) return kDefaultInitScale;
    double sum = 0.0;
    for (int j = 0; j < found; ++j) sum += std::sqrt(best[j]);
    return sum / found;
}

} // namespace

size_t init_gaussians_from_points(GaussianMap& map, std::span<const ColoredPoint> points) {
    if (points.empty()) return 0;
    const int k = static_cast<int>(std::min<size_t>(3, points.size() - 1));
    std::vector<Gaussian3D> fresh(points.size());
    for (size_t i = 0; i < points.size(); ++i) {
        Gaussian3D& g = fresh[i];
        g.position = points[i].position;
        g.rotation = Eigen::Vector4d(1, 0, 0, 0);
        const double s = k > 0 ? std::max(mean_knn_distance(points, i, k), kMinInitScale)
                               : kDefaultInitScale;
        g.log_scale.setConstant(std::log(s));
        g.opacity_logit = logit(kInitOpacity);
        g.sh_coeffs.fill(Eigen::Vector3d::Zero());
        g.sh_coeffs[0] = (points[i].color - Eigen::Vector3d::Constant(0.5)) / kShC0;
        g.active_degree = 0;
    }
    map.append(fresh);
    return fresh.size();
}

namespace {

ImageD downsample_color(const ImageD& in) {
    const int h = (in.height() + 1) / 2, w = (in.width() + 1) / 2;
    ImageD out(h, w, in.channels(), 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < in.channels(); ++c) {
                double sum = 0.0;
                int n = 0;
                for (int dy = 0; dy < 2; ++dy) {
                    for (int dx = 0; dx < 2; ++dx) {
                        const int sy = 2 * y + dy, sx = 2 * x + dx;
                        if (sy < in.height() && sx < in.width()) {
                            sum += in.at(sy, sx, c);
                            ++n;
                        }
                    }
                }
                out.at(y, x, c) = sum / n;
            }
        }
    }
    return out;
}

ImageD downsample_depth(const ImageD& in) {
    const int h = (in.height() + 1) / 2, w = (in.width() + 1) / 2;
    ImageD out(h, w, 1, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double sum = 0.0;
            int n = 0;
            for (int dy = 0; dy < 2; ++dy) {
                for (int dx = 0; dx < 2; ++dx) {
                    const int sy = 2 * y + dy, sx = 2 * x + dx;
                    if (sy < in.height() && sx < in.width() && in.at(sy, sx) > 0.0) {
                        sum += in.at(sy, sx);
                        ++n;
                    }
                }
            }
            out.at(y, x) = n ? sum / n : 0.0;
        }
    }
    return out;
}

void check_pyramid_size(int h, int w, int levels) {
    if (levels < 0) throw std::invalid_argument("build_pyramid: levels must be >= 0");
    if (h < (1 << levels) || w < (1 << levels))
        throw std::invalid_argument("build_pyramid: image too small for requested levels");
}

} // namespace

std::vector<ImageD> build_pyramid(const ImageD& image, int levels) {
    check_pyramid_size(image.height(), image.width(), levels);
    std::vector<ImageD> out;
    out.reserve(levels + 1);
    out.push_back(image);
    for (int l = 0; l < levels; ++l) out.push_back(downsample_color(out.back()));
    return out;
}

std::vector<ImageD> build_depth_pyramid(const ImageD& depth, int levels) {
    check_pyramid_size(depth.height(), depth.width(), levels);
    std::vector<ImageD> out;
    out.reserve(levels + 1);
    out.push_back(depth);
    for (int l = 0; l < levels; ++l) out.push_back(downsample_depth(out.back()));
    return out;
}

void build_keyframe_pyramid(Keyframe& kf, int levels) {
    auto colors = build_pyramid(kf.color_image, levels);
    auto depths = build_depth_pyramid(kf.sparse_depth, levels);
    kf.pyramid.clear();
    kf.pyramid.reserve(colors.size());
    for (size_t i = 0; i < colors.size(); ++i)
        kf.pyramid.push_back({std::move(colors[i]), std::move(depths[i])});
}

LossResult compute_loss(const RenderOutput& rendered, const Keyframe& kf, int level,
                        const TrainConfig& cfg) {
    if (level < 0 || level >= static_cast<int>(kf.pyramid.size()))
        throw std::invalid_argument("compute_loss: pyramid level out of range");
    const ImageD& gt_color = kf.pyramid[level].color;
    const ImageD& gt_depth = kf.pyramid[level].depth;
    if (!rendered.color.same_shape(gt_color))
        throw std::invalid_argument("compute_loss: rendered resolution does not match level");

    LossResult res;
    const int h = gt_color.height(), w = gt_color.width();

    // L1 on color.
    res.dl_dcolor = ImageD(h, w, 3, 0.0);
    const double inv_n = 1.0 / (static_cast<double>(h) * w * 3);
    double l1 = 0.0;
    for (size_t i = 0; i < gt_color.size(); ++i) {
        const double d = rendered.color.data()[i] - gt_color.data()[i];
        l1 += std::abs(d);
        res.dl_dcolor.data()[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) * inv_n * (1.0 - cfg.lambda);
    }
    res.l1 = l1 * inv_n;

    // SSIM enters as 1 - SSIM so that minimizing improves similarity.
    if (cfg.lambda != 0.0) {
        ImageD d_ssim;
        res.ssim = ssim_with_gradient(rendered.color, gt_color, d_ssim);
        for (size_t i = 0; i < d_ssim.size(); ++i)
            res.dl_dcolor.data()[i] += -cfg.lambda * d_ssim.data()[i];
    } else {
        res.ssim = 0.0;
    }
    res.color_loss = (1.0 - cfg.lambda) * res.l1 +
                     (cfg.lambda != 0.0 ? cfg.lambda * (1.0 - res.ssim) : 0.0);

    // Masked L1 on the expected depth D / V. The raw composite scales with
    // accumulated visibility, so supervising it directly rewards inflating
    // or deflating transmittance instead of moving geometry; dividing by the
    // (detached) visibility leaves a pure geometric residual. Pixels the map
    // barely explains are skipped until the color loss builds opacity.
    res.dl_ddepth = ImageD(h, w, 1, 0.0);
    double ld = 0.0;
    size_t n_valid = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (gt_depth.at(y, x) > 0.0 &&
                rendered.visibility.at(y, x) > kDepthLossMinVisibility)
                ++n_valid;
    if (n_valid > 0) {
        const double inv_v = 1.0 / static_cast<double>(n_valid);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double vis = rendered.visibility.at(y, x);
                if (gt_depth.at(y, x) > 0.0 && vis > kDepthLossMinVisibility) {
                    const double d = rendered.depth.at(y, x) / vis - gt_depth.at(y, x);
                    ld += std::abs(d);
                    res.dl_ddepth.at(y, x) =
                        (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) * inv_v * cfg.lambda_d / vis;
                }
            }
        }
        ld *= inv_v;
    }
    res.depth_loss = ld;
    res.total = res.color_loss + cfg.lambda_d * res.depth_loss;
    return res;
}

std::optional<StepReport> train_keyframe_step(GaussianMap& map, Keyframe& kf,
                                              const TrainConfig& cfg, const CameraModel& cam,
                                              ThreadPool* pool) {
    if (kf.pyramid.empty())
        throw std::invalid_argument("train_keyframe_step: keyframe pyramid not built");
    if (kf.consumed_iters >= kf.initial_iters) return std::nullopt;

    const int n = static_cast<int>(kf.pyramid.size()) - 1;
    const int ipl = cfg.effective_iters_per_level(kf.initial_iters);
    const int level = n - std::min(n, kf.consumed_iters / ipl); // coarse to fine
    const CameraModel level_cam = cam.scaled(level);

    const RenderOutput out = render(map, kf.pose, level_cam, pool);
    const LossResult loss = compute_loss(out, kf, level, cfg);
    const RenderGradients grads =
        render_backward(map, kf.pose, level_cam, out, loss.dl_dcolor, loss.dl_ddepth, pool);
    map.apply_gradients(grads, cfg.lr);
    ++kf.consumed_iters;

    StepReport report;
    report.level = level;
    report.loss = loss.total;
    report.psnr = psnr(out.color, kf.pyramid[level].color);
    return report;
}

int maybe_upgrade_sh(GaussianMap& map, const TrainConfig& cfg) {
    if (cfg.sh_interval <= 0) return map.max_active_degree();
    const int target =
        std::min<int64_t>(kShMaxDegree, map.global_step() / cfg.sh_interval);
    map.raise_sh_degree(static_cast<int>(target));
    return static_cast<int>(target);
}

} // namespace gsmap

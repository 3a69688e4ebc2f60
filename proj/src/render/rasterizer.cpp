#include "gsmap/render/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gsmap/core/covariance.hpp"
#include "gsmap/core/projection.hpp"
#include "gsmap/core/sh.hpp"
#include "gsmap/map/gaussian_map.hpp"

namespace gsmap {

namespace {

struct TileGrid {
    int tiles_x = 0;
    int tiles_y = 0;
    int count() const { return tiles_x * tiles_y; }
};

TileGrid make_grid(const CameraModel& cam) {
    TileGrid g;
    g.tiles_x = (cam.width + kTileSize - 1) / kTileSize;
    g.tiles_y = (cam.height + kTileSize - 1) / kTileSize;
    return g;
}

void run_parallel(ThreadPool* pool, size_t n,
                  const std::function<void(int, size_t, size_t)>& fn) {
    if (pool && n > 0)
        pool->parallel_for(n, fn);
    else if (n > 0)
        fn(0, 0, n);
}

std::vector<ProjectedGaussian> project_visible(const GaussianMap& map, const Pose& pose,
                                               const CameraModel& cam) {
    std::vector<ProjectedGaussian> out;
    out.reserve(map.size());
    const Eigen::Vector3d center = pose.camera_center();
    const auto& gaussians = map.gaussians();
    for (size_t i = 0; i < gaussians.size(); ++i) {
        const Gaussian3D& g = gaussians[i];
        auto p2 = project_gaussian(g, pose, cam);
        if (!p2) continue;
        // Footprint entirely off screen.
        if (p2->mean.x() + p2->radius < 0.0 || p2->mean.x() - p2->radius > cam.width - 1 ||
            p2->mean.y() + p2->radius < 0.0 || p2->mean.y() - p2->radius > cam.height - 1)
            continue;

        ProjectedGaussian pg;
        pg.index = static_cast<int32_t>(i);
        pg.mean = p2->mean;
        pg.cov2d = p2->cov2d;
        pg.cov_inv = p2->cov2d.inverse();
        pg.depth = p2->depth;
        pg.radius = p2->radius;
        pg.opacity = g.opacity();

        Eigen::Vector3d v = g.position - center;
        pg.view_dist = v.norm();
        pg.view_dir = pg.view_dist > 0.0 ? Eigen::Vector3d(v / pg.view_dist)
                                         : Eigen::Vector3d(0, 0, 1);
        pg.color_raw = eval_sh(g.sh_coeffs, g.active_degree, pg.view_dir);
        pg.color = pg.color_raw.cwiseMax(0.0).cwiseMin(1.0);
        out.push_back(pg);
    }
    std::sort(out.begin(), out.end(), [](const ProjectedGaussian& a, const ProjectedGaussian& b) {
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.index < b.index;
    });
    return out;
}

std::vector<std::vector<int32_t>> bin_tiles(const std::vector<ProjectedGaussian>& projected,
                                            const CameraModel& cam, const TileGrid& grid) {
    std::vector<std::vector<int32_t>> bins(grid.count());
    for (size_t pi = 0; pi < projected.size(); ++pi) {
        const ProjectedGaussian& pg = projected[pi];
        const int px_min = std::max(0, static_cast<int>(std::ceil(pg.mean.x() - pg.radius)));
        const int px_max = std::min(cam.width - 1, static_cast<int>(std::floor(pg.mean.x() + pg.radius)));
        const int py_min = std::max(0, static_cast<int>(std::ceil(pg.mean.y() - pg.radius)));
        const int py_max = std::min(cam.height - 1, static_cast<int>(std::floor(pg.mean.y() + pg.radius)));
        if (px_min > px_max || py_min > py_max) continue;
        for (int ty = py_min / kTileSize; ty <= py_max / kTileSize; ++ty)
            for (int tx = px_min / kTileSize; tx <= px_max / kTileSize; ++tx)
                bins[ty * grid.tiles_x + tx].push_back(static_cast<int32_t>(pi));
    }
    return bins;
}

struct TileScratch {
    std::vector<Contribution> entries;
    std::vector<uint32_t> counts; // per pixel, tile-local row-major
};

} // namespace

RenderOutput render(const GaussianMap& map, const Pose& pose, const CameraModel& cam,
                    ThreadPool* pool) {
    cam.validate();
    RenderOutput out;
    out.color = ImageD(cam.height, cam.width, 3, 0.0);
    out.depth = ImageD(cam.height, cam.width, 1, 0.0);
    out.visibility = ImageD(cam.height, cam.width, 1, 0.0);
    const size_t n_pixels = static_cast<size_t>(cam.height) * cam.width;
    out.contrib_offsets.assign(n_pixels + 1, 0);
    if (map.empty()) return out;

    out.projected = project_visible(map, pose, cam);
    const TileGrid grid = make_grid(cam);
    const auto bins = bin_tiles(out.projected, cam, grid);

    std::vector<TileScratch> scratch(grid.count());
    const auto& projected = out.projected;

    run_parallel(pool, grid.count(), [&](int, size_t t_begin, size_t t_end) {
        for (size_t t = t_begin; t < t_end; ++t) {
            const int tx = static_cast<int>(t) % grid.tiles_x;
            const int ty = static_cast<int>(t) / grid.tiles_x;
            const int x0 = tx * kTileSize, x1 = std::min(cam.width, x0 + kTileSize);
            const int y0 = ty * kTileSize, y1 = std::min(cam.height, y0 + kTileSize);
            TileScratch& ts = scratch[t];
            ts.counts.assign(static_cast<size_t>(y1 - y0) * (x1 - x0), 0);
            const auto& list = bins[t];
            if (list.empty()) continue;

            size_t local_pixel = 0;
            for (int py = y0; py < y1; ++py) {
                for (int px = x0; px < x1; ++px, ++local_pixel) {
                    double transmittance = 1.0;
                    Eigen::Vector3d color = Eigen::Vector3d::Zero();
                    double depth = 0.0, visibility = 0.0;
                    uint32_t count = 0;
                    const Eigen::Vector2d pix(px, py);
                    for (int32_t pi : list) {
                        const ProjectedGaussian& pg = projected[pi];
                        if (std::abs(pix.x() - pg.mean.x()) > pg.radius ||
                            std::abs(pix.y() - pg.mean.y()) > pg.radius)
                            continue;
                        const double g = eval_gaussian_2d_conic(pg.mean, pg.cov_inv, pix);
                        const double alpha = std::min(pg.opacity * g, kAlphaMax);
                        const double w = alpha * transmittance;
                        color += w * pg.color;
                        depth += w * pg.depth;
                        visibility += w;
                        ts.entries.push_back({pg.index, alpha});
                        ++count;
                        transmittance *= 1.0 - alpha;
                        if (transmittance < kTransmittanceMin) break;
                    }
                    ts.counts[local_pixel] = count;
                    out.color.at(py, px, 0) = color.x();
                    out.color.at(py, px, 1) = color.y();
                    out.color.at(py, px, 2) = color.z();
                    out.depth.at(py, px) = depth;
                    out.visibility.at(py, px) = visibility;
                }
            }
        }
    });

    // Assemble the CSR contributor table from the per-tile scratch buffers.
    for (int t = 0; t < grid.count(); ++t) {
        const int tx = t % grid.tiles_x;
        const int ty = t / grid.tiles_x;
        const int x0 = tx * kTileSize, x1 = std::min(cam.width, x0 + kTileSize);
        const int y0 = ty * kTileSize, y1 = std::min(cam.height, y0 + kTileSize);
        size_t local_pixel = 0;
        for (int py = y0; py < y1; ++py)
            for (int px = x0; px < x1; ++px, ++local_pixel)
                out.contrib_offsets[static_cast<size_t>(py) * cam.width + px + 1] =
                    scratch[t].counts[local_pixel];
    }
    for (size_t p = 0; p < n_pixels; ++p)
        out.contrib_offsets[p + 1] += out.contrib_offsets[p];
    out.contribs.resize(out.contrib_offsets.back());
    for (int t = 0; t < grid.count(); ++t) {
        const TileScratch& ts = scratch[t];
        if (ts.entries.empty()) continue;
        const int tx = t % grid.tiles_x;
        const int ty = t / grid.tiles_x;
        const int x0 = tx * kTileSize, x1 = std::min(cam.width, x0 + kTileSize);
        const int y0 = ty * kTileSize, y1 = std::min(cam.height, y0 + kTileSize);
        size_t local_pixel = 0, cursor = 0;
        for (int py = y0; py < y1; ++py) {
            for (int px = x0; px < x1; ++px, ++local_pixel) {
                const uint32_t c = ts.counts[local_pixel];
                if (c == 0) continue;
                std::copy_n(ts.entries.begin() + cursor, c,
                            out.contribs.begin() +
                                out.contrib_offsets[static_cast<size_t>(py) * cam.width + px]);
                cursor += c;
            }
        }
    }
    return out;
}

namespace {

/// Pixel-space cotangents accumulated for one projected Gaussian.
struct PixAccum {
    Eigen::Vector2d d_mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d d_cov = Eigen::Matrix2d::Zero();
    double d_depth = 0.0;
    Eigen::Vector3d d_color = Eigen::Vector3d::Zero();
    double d_opacity = 0.0;
    bool touched = false;

    void add(const PixAccum& o) {
        d_mean += o.d_mean;
        d_cov += o.d_cov;
        d_depth += o.d_depth;
        d_color += o.d_color;
        d_opacity += o.d_opacity;
        touched = touched || o.touched;
    }
};

} // namespace

RenderGradients render_backward(const GaussianMap& map, const Pose& pose,
                                const CameraModel& cam, const RenderOutput& out,
                                const ImageD& dl_dcolor, const ImageD& dl_ddepth,
                                ThreadPool* pool) {
    cam.validate();
    if (dl_dcolor.height() != cam.height || dl_dcolor.width() != cam.width ||
        dl_dcolor.channels() != 3)
        throw std::invalid_argument("render_backward: dl_dcolor dimensions mismatch");
    if (dl_ddepth.height() != cam.height || dl_ddepth.width() != cam.width ||
        dl_ddepth.channels() != 1)
        throw std::invalid_argument("render_backward: dl_ddepth dimensions mismatch");
    const size_t n_pixels = static_cast<size_t>(cam.height) * cam.width;
    if (out.contrib_offsets.size() != n_pixels + 1)
        throw std::logic_error("render_backward: contributor lists missing or inconsistent");

    RenderGradients grads;
    grads.per_gaussian.assign(map.size(), grad::GaussianGrad{});
    if (out.projected.empty()) return grads;

    // Map index -> projected index.
    std::vector<int32_t> proj_of(map.size(), -1);
    for (size_t pi = 0; pi < out.projected.size(); ++pi)
        proj_of[out.projected[pi].index] = static_cast<int32_t>(pi);

    const int n_threads = pool ? pool->thread_count() : 1;
    std::vector<std::vector<PixAccum>> thread_accums(
        n_threads, std::vector<PixAccum>(out.projected.size()));

    const TileGrid grid = make_grid(cam);
    run_parallel(pool, grid.count(), [&](int thread, size_t t_begin, size_t t_end) {
        std::vector<PixAccum>& accum = thread_accums[thread];
        std::vector<double> prefix_t;
        for (size_t t = t_begin; t < t_end; ++t) {
            const int tx = static_cast<int>(t) % grid.tiles_x;
            const int ty = static_cast<int>(t) / grid.tiles_x;
            const int x0 = tx * kTileSize, x1 = std::min(cam.width, x0 + kTileSize);
            const int y0 = ty * kTileSize, y1 = std::min(cam.height, y0 + kTileSize);
            for (int py = y0; py < y1; ++py) {
                for (int px = x0; px < x1; ++px) {
                    const auto list = out.contributors(py, px);
                    if (list.empty()) continue;
                    const Eigen::Vector3d d_c(dl_dcolor.at(py, px, 0), dl_dcolor.at(py, px, 1),
                                              dl_dcolor.at(py, px, 2));
                    const double d_d = dl_ddepth.at(py, px);
                    if (d_c.isZero(0.0) && d_d == 0.0) continue;

                    const size_t k = list.size();
                    prefix_t.resize(k);
                    double transmittance = 1.0;
                    for (size_t i = 0; i < k; ++i) {
                        prefix_t[i] = transmittance;
                        transmittance *= 1.0 - list[i].alpha;
                    }

                    const Eigen::Vector2d pix(px, py);
                    Eigen::Vector3d suffix_c = Eigen::Vector3d::Zero();
                    double suffix_d = 0.0;
                    for (size_t ri = k; ri-- > 0;) {
                        const double alpha = list[ri].alpha;
                        const int32_t pi = proj_of[list[ri].gaussian];
                        const ProjectedGaussian& pg = out.projected[pi];
                        const double t_i = prefix_t[ri];
                        const double w = alpha * t_i;

                        PixAccum& a = accum[pi];
                        a.touched = true;
                        a.d_color += w * d_c;
                        a.d_depth += w * d_d;

                        const double one_minus = 1.0 - alpha;
                        const double d_alpha =
                            d_c.dot(pg.color * t_i - suffix_c / one_minus) +
                            d_d * (pg.depth * t_i - suffix_d / one_minus);

                        suffix_c += w * pg.color;
                        suffix_d += w * pg.depth;

                        if (alpha >= kAlphaMax) continue; // clamp is flat
                        const double g = eval_gaussian_2d_conic(pg.mean, pg.cov_inv, pix);
                        a.d_opacity += d_alpha * g;
                        Eigen::Vector2d d_mean;
                        Eigen::Matrix2d d_cov;
                        Eigen::Vector2d d_x;
                        eval_gaussian_2d_vjp(pg.mean, pg.cov_inv, pix, g, d_alpha * pg.opacity,
                                             d_mean, d_cov, d_x);
                        a.d_mean += d_mean;
                        a.d_cov += d_cov;
                    }
                }
            }
        }
    });

    // Deterministic reduction in thread order.
    std::vector<PixAccum>& total = thread_accums[0];
    for (int t = 1; t < n_threads; ++t)
        for (size_t pi = 0; pi < total.size(); ++pi)
            total[pi].add(thread_accums[t][pi]);

    const auto& gaussians = map.gaussians();
    run_parallel(pool, out.projected.size(), [&](int, size_t begin, size_t end) {
        for (size_t pi = begin; pi < end; ++pi) {
            const PixAccum& a = total[pi];
            if (!a.touched) continue;
            const ProjectedGaussian& pg = out.projected[pi];
            const Gaussian3D& g = gaussians[pg.index];
            grad::GaussianGrad& gg = grads.per_gaussian[pg.index];

            // Color: clamp mask, then spherical harmonics and view direction.
            Eigen::Vector3d d_raw = a.d_color;
            for (int c = 0; c < 3; ++c)
                if (pg.color_raw[c] <= 0.0 || pg.color_raw[c] >= 1.0) d_raw[c] = 0.0;
            Eigen::Vector3d d_dir;
            eval_sh_vjp(g.sh_coeffs, g.active_degree, pg.view_dir, d_raw, gg.sh_coeffs, d_dir);
            if (pg.view_dist > 0.0)
                gg.position += (d_dir - pg.view_dir * pg.view_dir.dot(d_dir)) / pg.view_dist;

            // Opacity logit through the sigmoid.
            gg.opacity_logit = a.d_opacity * pg.opacity * (1.0 - pg.opacity);

            // Geometry through the projection.
            Eigen::Vector3d d_position, d_log_scale;
            Eigen::Vector4d d_rotation;
            project_gaussian_vjp(g, pose, cam, a.d_mean, a.d_cov, a.d_depth, d_position,
                                 d_rotation, d_log_scale);
            gg.position += d_position;
            gg.rotation = d_rotation;
            gg.log_scale = d_log_scale;
        }
    });
    return grads;
}

} // namespace gsmap

#include "gsmap/map/keyframe.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gsmap/core/projection.hpp"
#include "gsmap/map/gaussian_map.hpp"
#include "gsmap/render/rasterizer.hpp"

namespace gsmap {

bool should_admit(const Pose& candidate, const Pose& last_keyframe, double tau_r, double tau_t) {
    if (tau_r <= 0.0 || tau_t <= 0.0)
        throw std::invalid_argument("should_admit: thresholds must be positive");
    const double angle = rotation_angle(candidate.rotation, last_keyframe.rotation);
    const double dist = (candidate.translation - last_keyframe.translation).norm();
    return angle > tau_r || dist > tau_t;
}

double overlap_ratio(const Keyframe& candidate, const Keyframe& existing,
                     const GaussianMap* map, const CameraModel& cam) {
    ImageD rendered_depth;
    if (map && !map->empty())
        rendered_depth = render(*map, candidate.pose, cam).depth;

    const Eigen::Matrix3d r_wc = candidate.pose.rotation.toRotationMatrix().transpose();
    const Eigen::Matrix3d r_e = existing.pose.rotation.toRotationMatrix();
    size_t with_depth = 0, inside = 0;
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            double d = candidate.sparse_depth.empty() ? 0.0 : candidate.sparse_depth.at(y, x);
            if (d <= 0.0 && !rendered_depth.empty()) d = rendered_depth.at(y, x);
            if (d <= 0.0) continue;
            ++with_depth;
            const Eigen::Vector3d p_cam((x - cam.cx) / cam.fx * d, (y - cam.cy) / cam.fy * d, d);
            const Eigen::Vector3d p_world = r_wc * (p_cam - candidate.pose.translation);
            const Eigen::Vector3d q = r_e * p_world + existing.pose.translation;
            if (q.z() <= 0.0) continue;
            const double u = cam.fx * q.x() / q.z() + cam.cx;
            const double v = cam.fy * q.y() / q.z() + cam.cy;
            if (u >= 0.0 && u <= cam.width - 1 && v >= 0.0 && v <= cam.height - 1) ++inside;
        }
    }
    if (with_depth == 0) return 0.0;
    return static_cast<double>(inside) / static_cast<double>(with_depth);
}

std::vector<ColoredPoint> filter_points_by_visibility(std::span<const ColoredPoint> points,
                                                      const Keyframe& kf, const GaussianMap& map,
                                                      const CameraModel& cam, double tau_alpha,
                                                      ThreadPool* pool) {
    if (tau_alpha < 0.0 || tau_alpha > 1.0)
        throw std::invalid_argument("filter_points_by_visibility: tau_alpha must be in [0,1]");
    const RenderOutput out = render(map, kf.pose, cam, pool);
    std::vector<ColoredPoint> kept;
    kept.reserve(points.size());
    for (const ColoredPoint& p : points) {
        const Eigen::Vector3d pc = kf.pose.world_to_camera(p.position);
        if (pc.z() <= kNearClip) {
            kept.push_back(p);
            continue;
        }
        const long px = std::lround(cam.fx * pc.x() / pc.z() + cam.cx);
        const long py = std::lround(cam.fy * pc.y() / pc.z() + cam.cy);
        if (px < 0 || px >= cam.width || py < 0 || py >= cam.height) {
            kept.push_back(p);
            continue;
        }
        if (out.visibility.at(static_cast<int>(py), static_cast<int>(px)) <= tau_alpha)
            kept.push_back(p);
    }
    return kept;
}

double sharpness_score(const ImageD& color) {
    const int h = color.height(), w = color.width();
    if (h < 3 || w < 3) return 0.0;
    std::vector<double> gray(static_cast<size_t>(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            gray[static_cast<size_t>(y) * w + x] =
                255.0 * (0.299 * color.at(y, x, 0) + 0.587 * color.at(y, x, 1) +
                         0.114 * color.at(y, x, 2));
    double sum = 0.0, sum2 = 0.0;
    const size_t n = static_cast<size_t>(h - 2) * (w - 2);
    for (int y = 1; y + 1 < h; ++y) {
        for (int x = 1; x + 1 < w; ++x) {
            const double lap = gray[(y - 1) * w + x] + gray[(y + 1) * w + x] +
                               gray[y * w + x - 1] + gray[y * w + x + 1] -
                               4.0 * gray[y * w + x];
            sum += lap;
            sum2 += lap * lap;
        }
    }
    const double mean = sum / static_cast<double>(n);
    return sum2 / static_cast<double>(n) - mean * mean;
}

std::vector<KeyframePtr> KeyframeQueue::push_and_release(const KeyframePtr& kf, int delay_depth) {
    if (delay_depth < 0)
        throw std::invalid_argument("push_and_release: delay_depth must be >= 0");
    std::lock_guard<std::mutex> lock(mutex_);
    buffer_.push_back(kf);
    std::vector<KeyframePtr> released;
    while (buffer_.size() > static_cast<size_t>(delay_depth)) {
        released.push_back(buffer_.front());
        buffer_.pop_front();
    }
    for (const auto& r : released) active_.push_back(r);
    return released;
}

std::vector<KeyframePtr> KeyframeQueue::flush() {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<KeyframePtr> released(buffer_.begin(), buffer_.end());
    buffer_.clear();
    for (const auto& r : released) active_.push_back(r);
    return released;
}

KeyframePtr KeyframeQueue::sample_for_optimization(std::mt19937& rng) {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<size_t> eligible;
    eligible.reserve(active_.size());
    for (size_t i = 0; i < active_.size(); ++i)
        if (active_[i]->remaining_iters > 0) eligible.push_back(i);
    if (eligible.empty()) return nullptr;
    std::uniform_int_distribution<size_t> pick(0, eligible.size() - 1);
    const size_t idx = eligible[pick(rng)];
    KeyframePtr kf = active_[idx];
    kf->remaining_iters -= 1;
    if (kf->remaining_iters == 0) {
        retired_.push_back(kf->id);
        active_.erase(active_.begin() + idx);
    }
    return kf;
}

size_t KeyframeQueue::buffered_count() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return buffer_.size();
}

size_t KeyframeQueue::active_count() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return active_.size();
}

size_t KeyframeQueue::retired_count() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return retired_.size();
}

std::vector<KeyframePtr> KeyframeQueue::active_snapshot() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return active_;
}

} // namespace gsmap

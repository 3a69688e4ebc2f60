#pragma once

#include <deque>
#include <memory>
#include <mutex>
#include <random>
#include <vector>

#include "gsmap/core/types.hpp"
#include "gsmap/io/image.hpp"
#include "gsmap/map/voxel_store.hpp"

namespace gsmap {

class GaussianMap;
class ThreadPool;

struct PyramidLevel {
    ImageD color; // H x W x 3
    ImageD depth; // H x W, 0 = no measurement
};

struct Keyframe {
    int id = 0;
    Pose pose;
    ImageD color_image;               // H x W x 3 in [0, 1]
    ImageD sparse_depth;              // H x W meters, 0 = no measurement
    std::vector<ColoredPoint> points; // packet drained for this frame
    int initial_iters = 0;
    int remaining_iters = 0;
    int consumed_iters = 0;
    std::vector<PyramidLevel> pyramid; // level 0 = native, filled by the mapper
};

using KeyframePtr = std::shared_ptr<Keyframe>;

struct KeyframeConfig {
    double tau_r_deg = 5.0;
    double tau_t_m = 0.1;
    double tau_overlap = 0.95;
    double tau_alpha = 0.5;
    int delay_depth = 3;
    int iter_budget = 60;
    double blur_threshold = 100.0;
};

/// True iff the geodesic rotation angle exceeds tau_r (radians) or the
/// translation distance exceeds tau_t (meters).
bool should_admit(const Pose& candidate, const Pose& last_keyframe, double tau_r,
                  double tau_t);

/// Fraction of the candidate's pixels with depth (sparse where present, else
/// rendered from `map` if given) whose back-projected 3D point lands inside
/// the existing keyframe's image with positive depth. 0 when no pixel has
/// depth.
double overlap_ratio(const Keyframe& candidate, const Keyframe& existing,
                     const GaussianMap* map, const CameraModel& cam);

/// Keeps the points whose projected pixel in the keyframe's view has
/// visibility <= tau_alpha; points projecting outside the image are kept.
std::vector<ColoredPoint> filter_points_by_visibility(std::span<const ColoredPoint> points,
                                                      const Keyframe& kf,
                                                      const GaussianMap& map,
                                                      const CameraModel& cam, double tau_alpha,
                                                      ThreadPool* pool = nullptr);

/// Variance of the Laplacian on the [0,255]-scaled grayscale image. Higher
/// is sharper; frames below the threshold are treated as motion-blurred.
double sharpness_score(const ImageD& color);

/// Delay buffer plus the active training pool. Thread-safe.
class KeyframeQueue {
public:
    /// kf enters the FIFO; keyframes beyond delay_depth positions move to
    /// the active pool and are returned in FIFO order.
    std::vector<KeyframePtr> push_and_release(const KeyframePtr& kf, int delay_depth);

    /// Releases everything still buffered, in FIFO order.
    std::vector<KeyframePtr> flush();

    /// Uniform random choice among active keyframes with remaining budget;
    /// decrements the chosen keyframe's budget by one and retires exhausted
    /// keyframes. Null when nothing is eligible.
    KeyframePtr sample_for_optimization(std::mt19937& rng);

    size_t buffered_count() const;
    size_t active_count() const;
    size_t retired_count() const;
    std::vector<KeyframePtr> active_snapshot() const;

private:
    mutable std::mutex mutex_;
    std::deque<KeyframePtr> buffer_;
    std::vector<KeyframePtr> active_;
    std::vector<int> retired_;
};

} // namespace gsmap

#pragma once

#include <cstdint>
#include <shared_mutex>
#include <vector>

#include "gsmap/core/gaussian.hpp"
#include "gsmap/render/rasterizer.hpp"

namespace gsmap {

/// Adam accumulators for one Gaussian, shaped like its parameters.
struct AdamState {
    Eigen::Vector3d m_position = Eigen::Vector3d::Zero();
    Eigen::Vector3d v_position = Eigen::Vector3d::Zero();
    Eigen::Vector4d m_rotation = Eigen::Vector4d::Zero();
    Eigen::Vector4d v_rotation = Eigen::Vector4d::Zero();
    Eigen::Vector3d m_log_scale = Eigen::Vector3d::Zero();
    Eigen::Vector3d v_log_scale = Eigen::Vector3d::Zero();
    double m_opacity = 0.0;
    double v_opacity = 0.0;
    std::array<Eigen::Vector3d, kShCoeffCount> m_sh{};
    std::array<Eigen::Vector3d, kShCoeffCount> v_sh{};
    int64_t step = 0;

    AdamState() {
        m_sh.fill(Eigen::Vector3d::Zero());
        v_sh.fill(Eigen::Vector3d::Zero());
    }
};

/// Per-parameter-group learning rates. The position rate is additionally
/// scaled by the scene extent when the optimizer applies it.
struct LearningRates {
    double position = 1.6e-4;
    double rotation = 1e-3;
    double log_scale = 5e-3;
    double opacity = 5e-2;
    double sh = 2.5e-3;
};

/// The trainable scene: Gaussians plus optimizer state, always the same
/// length. Writers take the lock exclusively; renders may share it.
class GaussianMap {
public:
    GaussianMap() = default;
    GaussianMap(GaussianMap&& o) noexcept
        : gaussians_(std::move(o.gaussians_)), opt_(std::move(o.opt_)),
          global_step_(o.global_step_), scene_extent_(o.scene_extent_) {}
    GaussianMap& operator=(GaussianMap&& o) noexcept {
        gaussians_ = std::move(o.gaussians_);
        opt_ = std::move(o.opt_);
        global_step_ = o.global_step_;
        scene_extent_ = o.scene_extent_;
        return *this;
    }

    size_t size() const { return gaussians_.size(); }
    bool empty() const { return gaussians_.empty(); }

    const std::vector<Gaussian3D>& gaussians() const { return gaussians_; }
    std::vector<Gaussian3D>& gaussians() { return gaussians_; }
    const std::vector<AdamState>& optimizer_state() const { return opt_; }

    int64_t global_step() const { return global_step_; }
    void set_global_step(int64_t s) { global_step_ = s; }

    double scene_extent() const { return scene_extent_; }

    /// Appends Gaussians with fresh optimizer state and refreshes the extent.
    void append(const std::vector<Gaussian3D>& gs);

    /// One Adam update (beta1 = 0.9, beta2 = 0.999, eps = 1e-15) on every
    /// parameter from the given gradients. Increments global_step.
    void apply_gradients(const RenderGradients& grads, const LearningRates& lr);

    /// Removes Gaussians with sigmoid(opacity_logit) < threshold, compacting
    /// parameters and optimizer state together. Returns the removed count.
    size_t prune(double opacity_threshold);

    /// Raises every Gaussian's active SH degree to `degree` (capped at 3).
    void raise_sh_degree(int degree);

    int max_active_degree() const;

    std::shared_mutex& mutex() const { return mutex_; }

private:
    void refresh_extent();

    std::vector<Gaussian3D> gaussians_;
    std::vector<AdamState> opt_;
    int64_t global_step_ = 0;
    double scene_extent_ = 1.0;
    mutable std::shared_mutex mutex_;
};

} // namespace gsmap

#include "gsmap/map/gaussian_map.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gsmap {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-15;

inline double adam_step(double grad, double& m, double& v, int64_t t, double lr) {
    m = kBeta1 * m + (1.0 - kBeta1) * grad;
    v = kBeta2 * v + (1.0 - kBeta2) * grad * grad;
    const double m_hat = m / (1.0 - std::pow(kBeta1, static_cast<double>(t)));
    const double v_hat = v / (1.0 - std::pow(kBeta2, static_cast<double>(t)));
    return -lr * m_hat / (std::sqrt(v_hat) + kEps);
}

template <typename Vec>
inline void adam_step_vec(const Vec& grad, Vec& m, Vec& v, int64_t t, double lr, Vec& param) {
    for (int i = 0; i < grad.size(); ++i)
        param[i] += adam_step(grad[i], m[i], v[i], t, lr);
}

} // namespace

void GaussianMap::append(const std::vector<Gaussian3D>& gs) {
    gaussians_.insert(gaussians_.end(), gs.begin(), gs.end());
    opt_.resize(gaussians_.size());
    refresh_extent();
}

void GaussianMap::apply_gradients(const RenderGradients& grads, const LearningRates& lr) {
    if (grads.per_gaussian.size() != gaussians_.size())
        throw std::invalid_argument("apply_gradients: gradient count does not match map size");
    const double lr_pos = lr.position * scene_extent_;
    for (size_t i = 0; i < gaussians_.size(); ++i) {
        Gaussian3D& g = gaussians_[i];
        AdamState& s = opt_[i];
        const grad::GaussianGrad& d = grads.per_gaussian[i];
        const int64_t t = ++s.step;
        adam_step_vec(d.position, s.m_position, s.v_position, t, lr_pos, g.position);
        adam_step_vec(d.rotation, s.m_rotation, s.v_rotation, t, lr.rotation, g.rotation);
        adam_step_vec(d.log_scale, s.m_log_scale, s.v_log_scale, t, lr.log_scale, g.log_scale);
        g.opacity_logit += adam_step(d.opacity_logit, s.m_opacity, s.v_opacity, t, lr.opacity);
        for (int k = 0; k < kShCoeffCount; ++k)
            adam_step_vec(d.sh_coeffs[k], s.m_sh[k], s.v_sh[k], t, lr.sh, g.sh_coeffs[k]);
    }
    ++global_step_;
}

size_t GaussianMap::prune(double opacity_threshold) {
    if (opacity_threshold <= 0.0 || opacity_threshold >= 1.0)
        throw std::invalid_argument("prune: threshold must be in (0, 1)");
    size_t kept = 0;
    for (size_t i = 0; i < gaussians_.size(); ++i) {
        if (gaussians_[i].opacity() >= opacity_threshold) {
            if (kept != i) {
                gaussians_[kept] = gaussians_[i];
                opt_[kept] = opt_[i];
            }
            ++kept;
        }
    }
    const size_t removed = gaussians_.size() - kept;
    gaussians_.resize(kept);
    opt_.resize(kept);
    return removed;
}

void GaussianMap::raise_sh_degree(int degree) {
    const int d = std::clamp(degree, 0, kShMaxDegree);
    for (auto& g : gaussians_)
        g.active_degree = std::max(g.active_degree, d);
}

int GaussianMap::max_active_degree() const {
    int d = 0;
    for (const auto& g : gaussians_) d = std::max(d, g.active_degree);
    return d;
}

void GaussianMap::refresh_extent() {
    if (gaussians_.empty()) {
        scene_extent_ = 1.0;
        return;
    }
    Eigen::Vector3d lo = gaussians_.front().position;
    Eigen::Vector3d hi = lo;
    for (const auto& g : gaussians_) {
        lo = lo.cwiseMin(g.position);
        hi = hi.cwiseMax(g.position);
    }
    scene_extent_ = std::max(0.5 * (hi - lo).norm(), 1e-6);
}

} // namespace gsmap

#include "gsmap/map/voxel_store.hpp"

#include <cmath>
#include <stdexcept>

namespace gsmap {

VoxelIndex voxel_index(const Eigen::Vector3d& position, double voxel_size) {
    if (voxel_size <= 0.0)
        throw std::invalid_argument("voxel_index: voxel_size must be positive");
    return VoxelIndex{static_cast<int64_t>(std::floor(position.x() / voxel_size)),
                      static_cast<int64_t>(std::floor(position.y() / voxel_size)),
                      static_cast<int64_t>(std::floor(position.z() / voxel_size))};
}

VoxelStore::VoxelStore(double voxel_size, int cap_per_voxel)
    : voxel_size_(voxel_size), cap_(cap_per_voxel), min_separation_(voxel_size / 4.0) {
    if (voxel_size <= 0.0)
        throw std::invalid_argument("VoxelStore: voxel_size must be positive");
    if (cap_per_voxel <= 0)
        throw std::invalid_argument("VoxelStore: cap must be positive");
}

InsertStats VoxelStore::insert_points(std::span<const ColoredPoint> points, double now) {
    std::lock_guard<std::mutex> lock(mutex_);
    InsertStats stats;
    const double min_sep2 = min_separation_ * min_separation_;
    for (const ColoredPoint& p : points) {
        VoxelRecord& rec = voxels_[voxel_index(p.position, voxel_size_)];
        bool duplicate = false;
        for (uint32_t id : rec.point_ids) {
            if ((accepted_[id].position - p.position).squaredNorm() < min_sep2) {
                duplicate = true;
                break;
            }
        }
        if (duplicate) {
            ++stats.rejected_duplicate;
            continue;
        }
        if (rec.point_ids.size() >= static_cast<size_t>(cap_)) {
            ++stats.rejected_cap;
            continue;
        }
        rec.point_ids.push_back(static_cast<uint32_t>(accepted_.size()));
        rec.last_update = now;
        accepted_.push_back(p);
        ++stats.accepted;
    }
    return stats;
}

std::vector<VoxelIndex> VoxelStore::active_voxels(double now, double window) const {
    if (window <= 0.0)
        throw std::invalid_argument("active_voxels: window must be positive");
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<VoxelIndex> out;
    for (const auto& [idx, rec] : voxels_)
        if (now - rec.last_update <= window) out.push_back(idx);
    return out;
}

std::vector<ColoredPoint> VoxelStore::drain_for_frame(size_t count) {
    if (count == 0)
        throw std::invalid_argument("drain_for_frame: count must be positive");
    std::lock_guard<std::mutex> lock(mutex_);
    const size_t n = std::min(count, accepted_.size() - drain_cursor_);
    std::vector<ColoredPoint> out(accepted_.begin() + drain_cursor_,
                                  accepted_.begin() + drain_cursor_ + n);
    drain_cursor_ += n;
    return out;
}

size_t VoxelStore::total_accepted() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return accepted_.size();
}

size_t VoxelStore::undrained_count() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return accepted_.size() - drain_cursor_;
}

size_t VoxelStore::points_in_voxel(const VoxelIndex& v) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = voxels_.find(v);
    return it == voxels_.end() ? 0 : it->second.point_ids.size();
}

} // namespace gsmap

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <mutex>
#include <span>
#include <unordered_map>
#include <vector>

namespace gsmap {

struct ColoredPoint {
    Eigen::Vector3d position = Eigen::Vector3d::Zero(); // meters
    Eigen::Vector3d color = Eigen::Vector3d::Zero();    // RGB in [0, 1]
    double timestamp = 0.0;                             // seconds
};

struct VoxelIndex {
    int64_t x = 0, y = 0, z = 0;
    bool operator==(const VoxelIndex&) const = default;
};

struct VoxelIndexHash {
    size_t operator()(const VoxelIndex& v) const {
        size_t h = std::hash<int64_t>{}(v.x);
        h ^= std::hash<int64_t>{}(v.y) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        h ^= std::hash<int64_t>{}(v.z) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        return h;
    }
};

struct InsertStats {
    size_t accepted = 0;
    size_t rejected_duplicate = 0;
    size_t rejected_cap = 0;
};

VoxelIndex voxel_index(const Eigen::Vector3d& position, double voxel_size);

/// Voxel-hashed store of colorized points with recency-based activation.
/// Duplicates (closer than voxel_size / 4 to a stored point in the same
/// voxel) and over-cap insertions are rejected. Accepted points are drained
/// at most once, in insertion order. Single writer, concurrent readers.
class VoxelStore {
public:
    explicit VoxelStore(double voxel_size = 0.1, int cap_per_voxel = 20);

    double voxel_size() const { return voxel_size_; }
    int cap_per_voxel() const { return cap_; }
    double min_point_separation() const { return min_separation_; }

    InsertStats insert_points(std::span<const ColoredPoint> points, double now);

    /// Voxels updated within the window: now - last_update <= window.
    std::vector<VoxelIndex> active_voxels(double now, double window) const;

    /// Removes and returns up to `count` not-yet-drained points, in
    /// insertion order. The drain cursor persists for the store's lifetime.
    std::vector<ColoredPoint> drain_for_frame(size_t count);

    size_t total_accepted() const;
    size_t undrained_count() const;
    size_t points_in_voxel(const VoxelIndex& v) const;

private:
    struct VoxelRecord {
        std::vector<uint32_t> point_ids;
        double last_update = 0.0;
    };

    double voxel_size_;
    int cap_;
    double min_separation_;
    std::vector<ColoredPoint> accepted_; // insertion order, never shrunk
    size_t drain_cursor_ = 0;
    std::unordered_map<VoxelIndex, VoxelRecord, VoxelIndexHash> voxels_;
    mutable std::mutex mutex_;
};

} // namespace gsmap

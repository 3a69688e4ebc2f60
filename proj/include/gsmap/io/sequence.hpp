#pragma once

#include <string>
#include <vector>

#include "gsmap/core/types.hpp"
#include "gsmap/io/image.hpp"
#include "gsmap/map/voxel_store.hpp"

namespace gsmap {

/// On-disk sequence layout:
///   manifest          key-value text (intrinsics, resolution, optional extras)
///   poses.csv         rows: timestamp,qw,qx,qy,qz,tx,ty,tz  (world->camera)
///   images/%06d.png   8-bit RGB
///   clouds/%06d.ply   ASCII, properties x y z red green blue (colors 0-255)
/// Optional ground-truth extras written by the synthetic generator:
///   depth/%06d.bin    raw little-endian doubles, H*W
///   gt_map.gsmap      checkpoint of the generating Gaussians
struct SequenceManifest {
    CameraModel camera;
    int frame_count = 0;
    std::string root;
    bool has_gt_depth = false;
    std::string gt_map_file; // empty if absent
};

struct Frame {
    int index = 0;
    double timestamp = 0.0;
    Pose pose;
    ImageD color;
    std::vector<ColoredPoint> cloud;
};

/// Validates the layout (manifest present, every referenced file exists,
/// timestamps strictly increasing) and streams frames in timestamp order.
class SequenceReader {
public:
    explicit SequenceReader(const std::string& path);

    const SequenceManifest& manifest() const { return manifest_; }
    int frame_count() const { return manifest_.frame_count; }

    /// Loads frame i (pose row, decoded image, parsed cloud).
    Frame read_frame(int i) const;

    /// Ground-truth dense depth for frame i; throws if the sequence has none.
    ImageD read_gt_depth(int i) const;

    double timestamp(int i) const { return timestamps_.at(i); }
    const Pose& pose(int i) const { return poses_.at(i); }

private:
    SequenceManifest manifest_;
    std::vector<double> timestamps_;
    std::vector<Pose> poses_;
};

/// Writes a full sequence in the canonical format. Floats are serialized
/// with 9 significant digits; loading then writing reproduces pose and cloud
/// files byte for byte.
void write_sequence(const std::string& path, const CameraModel& cam,
                    const std::vector<Frame>& frames,
                    const std::vector<ImageD>* gt_depths = nullptr,
                    const std::string& gt_map_file = "");

/// Projects points with the pinhole model; each hit pixel keeps the minimum
/// camera-frame z. Out-of-frustum points are ignored.
ImageD project_sparse_depth(std::span<const ColoredPoint> points, const Pose& pose,
                            const CameraModel& cam);

/// Canonical float formatting used across the sequence files (%.9g).
std::string format_double(double v);

} // namespace gsmap

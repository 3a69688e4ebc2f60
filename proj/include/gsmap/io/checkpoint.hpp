#pragma once

#include <string>

#include "gsmap/map/gaussian_map.hpp"

namespace gsmap {

/// Versioned map checkpoint: a small text header (format version, count,
/// max SH degree) followed by raw little-endian doubles for every parameter
/// array. Save -> load -> render is bit-exact.
void save_checkpoint(const std::string& path, const GaussianMap& map);

GaussianMap load_checkpoint(const std::string& path);

} // namespace gsmap

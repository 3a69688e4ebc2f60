#pragma once

#include <string>

#include "gsmap/io/image.hpp"

namespace gsmap {

/// Decodes an 8-bit RGB PNG to a [0,1] float image (values / 255).
ImageD read_png_rgb(const std::string& path);

/// Encodes a [0,1] float image as 8-bit RGB PNG (round(v * 255), clamped).
/// Fixed encoder settings, so identical inputs produce identical bytes.
void write_png_rgb(const std::string& path, const ImageD& image);

/// 8-bit grayscale PNG of a single-channel image scaled so that `max_value`
/// maps to white. Used for depth visualization.
void write_png_gray(const std::string& path, const ImageD& image, double max_value);

} // namespace gsmap

#include "gsmap/io/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

namespace gsmap {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

uint8_t to_byte(double v) {
    const double s = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
    return static_cast<uint8_t>(s);
}

void write_png(const std::string& path, const std::vector<uint8_t>& bytes, int h, int w,
               int color_type, int channels) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("write_png: cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("write_png: libpng failure on " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, w, h, 8, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    for (int y = 0; y < h; ++y)
        png_write_row(png, const_cast<png_bytep>(bytes.data() + static_cast<size_t>(y) * w * channels));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

} // namespace

ImageD read_png_rgb(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("read_png_rgb: cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_png_rgb: libpng failure on " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    const int w = png_get_image_width(png, info);
    const int h = png_get_image_height(png, info);
    const png_byte color_type = png_get_color_type(png, info);
    const png_byte bit_depth = png_get_bit_depth(png, info);

    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    std::vector<uint8_t> row(static_cast<size_t>(w) * 3);
    ImageD out(h, w, 3);
    for (int y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                out.at(y, x, c) = row[static_cast<size_t>(x) * 3 + c] / 255.0;
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

void write_png_rgb(const std::string& path, const ImageD& image) {
    if (image.channels() != 3)
        throw std::invalid_argument("write_png_rgb: image must have 3 channels");
    std::vector<uint8_t> bytes(image.size());
    for (size_t i = 0; i < image.size(); ++i) bytes[i] = to_byte(image.data()[i]);
    write_png(path, bytes, image.height(), image.width(), PNG_COLOR_TYPE_RGB, 3);
}

void write_png_gray(const std::string& path, const ImageD& image, double max_value) {
    if (image.channels() != 1)
        throw std::invalid_argument("write_png_gray: image must have 1 channel");
    const double scale = max_value > 0.0 ? 1.0 / max_value : 1.0;
    std::vector<uint8_t> bytes(image.size());
    for (size_t i = 0; i < image.size(); ++i) bytes[i] = to_byte(image.data()[i] * scale);
    write_png(path, bytes, image.height(), image.width(), PNG_COLOR_TYPE_GRAY, 1);
}

} // namespace gsmap

#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace gsmap {

/// Dense row-major image buffer with an arbitrary number of channels.
/// Pixel (x, y) samples the continuous image plane at coordinate (x, y),
/// i.e. sample positions sit on the integer lattice.
template <typename T>
class Image {
public:
    Image() = default;
    Image(int height, int width, int channels, T fill = T{})
        : height_(height), width_(width), channels_(channels),
          data_(static_cast<size_t>(height) * width * channels, fill) {}

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    bool empty() const { return data_.empty(); }
    size_t size() const { return data_.size(); }

    T& at(int y, int x, int c = 0) {
        assert(y >= 0 && y < height_ && x >= 0 && x < width_ && c >= 0 && c < channels_);
        return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
    }
    T at(int y, int x, int c = 0) const {
        assert(y >= 0 && y < height_ && x >= 0 && x < width_ && c >= 0 && c < channels_);
        return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
    }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Image& o) const {
        return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
    }

private:
    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<T> data_;
};

using ImageD = Image<double>;

} // namespace gsmap

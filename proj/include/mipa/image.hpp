#pragma once

#include <cstddef>
#include <vector>

namespace mipa {

// Dense H x W x C image, values stored as reals (nominally in [0, 1]),
// row-major with the channel index fastest.
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int h, int w, int c, double fill = 0.0)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, fill) {}

    double& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    bool same_shape(const Image& other) const {
        return height == other.height && width == other.width && channels == other.channels;
    }
    std::size_t size() const { return data.size(); }
};

// Bilinear resample to out_h x out_w (channel count preserved).
Image resize_bilinear(const Image& src, int out_h, int out_w);

} // namespace mipa

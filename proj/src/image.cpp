#include "mipa/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mipa {

Image resize_bilinear(const Image& src, int out_h, int out_w) {
    if (src.height <= 0 || src.width <= 0 || src.channels <= 0)
        throw std::invalid_argument("resize_bilinear: empty source image");
    if (out_h <= 0 || out_w <= 0)
        throw std::invalid_argument("resize_bilinear: non-positive target size");

    Image dst(out_h, out_w, src.channels);
    const double sy = static_cast<double>(src.height) / out_h;
    const double sx = static_cast<double>(src.width) / out_w;
    for (int y = 0; y < out_h; ++y) {
        // Align pixel centers between the two grids.
        const double fy = (y + 0.5) * sy - 0.5;
        const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, src.height - 1);
        const int y1 = std::min(y0 + 1, src.height - 1);
        const double wy = std::clamp(fy - y0, 0.0, 1.0);
        for (int x = 0; x < out_w; ++x) {
            const double fx = (x + 0.5) * sx - 0.5;
            const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, src.width - 1);
            const int x1 = std::min(x0 + 1, src.width - 1);
            const double wx = std::clamp(fx - x0, 0.0, 1.0);
            for (int c = 0; c < src.channels; ++c) {
                const double top = src.at(y0, x0, c) * (1.0 - wx) + src.at(y0, x1, c) * wx;
                const double bot = src.at(y1, x0, c) * (1.0 - wx) + src.at(y1, x1, c) * wx;
                dst.at(y, x, c) = top * (1.0 - wy) + bot * wy;
            }
        }
    }
    return dst;
}

} // namespace mipa

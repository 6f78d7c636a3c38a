#include "mipa/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace mipa {

namespace {

// Skips whitespace and '#' comment lines between header tokens.
int next_header_int(std::istream& in, const std::string& path) {
    while (true) {
        const int ch = in.peek();
        if (ch == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(ch)) {
            in.get();
        } else {
            break;
        }
    }
    int value = 0;
    if (!(in >> value))
        throw std::runtime_error("malformed PPM header in " + path);
    return value;
}

} // namespace

Image read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open image file " + path);

    std::string magic;
    in >> magic;
    const bool gray = magic == "P5";
    if (!gray && magic != "P6")
        throw std::runtime_error("unsupported image format '" + magic + "' in " + path);

    const int width = next_header_int(in, path);
    const int height = next_header_int(in, path);
    const int max_val = next_header_int(in, path);
    if (width <= 0 || height <= 0 || max_val != 255)
        throw std::runtime_error("unsupported PPM geometry or depth in " + path);
    in.get(); // single whitespace after header

    const int in_channels = gray ? 1 : 3;
    std::vector<unsigned char> raw(static_cast<std::size_t>(width) * height * in_channels);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
        throw std::runtime_error("truncated image data in " + path);

    Image image(height, width, 3);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < 3; ++c) {
                const std::size_t idx = (static_cast<std::size_t>(y) * width + x) * in_channels + (gray ? 0 : c);
                image.at(y, x, c) = raw[idx] / 255.0;
            }
        }
    }
    return image;
}

void write_ppm(const std::string& path, const Image& image) {
    if (image.channels != 1 && image.channels != 3)
        throw std::invalid_argument("write_ppm: only 1- or 3-channel images supported");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write image file " + path);

    out << (image.channels == 1 ? "P5\n" : "P6\n") << image.width << ' ' << image.height << "\n255\n";
    std::vector<unsigned char> raw;
    raw.reserve(static_cast<std::size_t>(image.width) * image.height * image.channels);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < image.channels; ++c) {
                const double v = std::clamp(image.at(y, x, c), 0.0, 1.0);
                raw.push_back(static_cast<unsigned char>(std::lround(v * 255.0)));
            }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

} // namespace mipa

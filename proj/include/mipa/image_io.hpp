#pragma once

#include <string>

#include "mipa/image.hpp"

namespace mipa {

// Binary PPM (P6, 3-channel) and PGM (P5, replicated to 3 channels on read).
// Values map linearly between [0, 1] reals and 8-bit.
Image read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Image& image);

} // namespace mipa

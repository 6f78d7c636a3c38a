#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "mipa/image.hpp"

namespace mipa {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// An image decomposed into non-overlapping square patches, row-major from the
// top-left corner. Row i of `patches` holds patch i flattened (y, x, channel).
struct PatchGrid {
    Matrix patches;
    int grid_h = 0;
    int grid_w = 0;
    int patch_size = 0;
    int channels = 0;
    int image_h = 0;
    int image_w = 0;

    int count() const { return grid_h * grid_w; }
    bool same_geometry(const PatchGrid& other) const {
        return grid_h == other.grid_h && grid_w == other.grid_w &&
               patch_size == other.patch_size && channels == other.channels;
    }
};

// Per-patch source assignment: 1 selects modality f (IR), 0 modality g (RGB).
// The partition is complementary by construction: m_count + l_count == n and
// m_count == round-half-even(n * rho).
struct ModalityMask {
    std::vector<std::uint8_t> assignment;
    double rho = 0.0;
    int m_count = 0;
    int l_count = 0;

    int size() const { return static_cast<int>(assignment.size()); }
};

// Row-major binary grid; the adversarial classifier's target map.
struct BinaryMap {
    int h = 0;
    int w = 0;
    std::vector<std::uint8_t> values;

    std::uint8_t at(int r, int c) const { return values[static_cast<std::size_t>(r) * w + c]; }
    int count() const { return h * w; }
};

// Deterministic count of f-patches for a given rho: round n*rho half to even.
int mask_ones_count(int n, double rho);

PatchGrid patchify(const Image& image, int patch_size);
Image unpatchify(const PatchGrid& grid);

ModalityMask sample_mask(int n, double rho, std::uint64_t rng_seed);

PatchGrid mix(const PatchGrid& grid_f, const PatchGrid& grid_g, const ModalityMask& mask);

BinaryMap modality_map_from_mask(const ModalityMask& mask, int grid_h, int grid_w);

} // namespace mipa

#include "mipa/mosaic.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "mipa/rng.hpp"

namespace mipa {

int mask_ones_count(int n, double rho) {
    const double x = static_cast<double>(n) * rho;
    const double floor_x = std::floor(x);
    const double frac = x - floor_x;
    int m = static_cast<int>(floor_x);
    if (frac > 0.5) {
        m += 1;
    } else if (frac == 0.5) {
        if (m % 2 != 0) m += 1; // half to even
    }
    return m;
}

PatchGrid patchify(const Image& image, int patch_size) {
    if (patch_size <= 0)
        throw std::invalid_argument("patchify: patch_size must be positive");
    if (image.height % patch_size != 0)
        throw std::invalid_argument("patchify: image height " + std::to_string(image.height) +
                                    " is not divisible by patch size " + std::to_string(patch_size));
    if (image.width % patch_size != 0)
        throw std::invalid_argument("patchify: image width " + std::to_string(image.width) +
                                    " is not divisible by patch size " + std::to_string(patch_size));

    PatchGrid grid;
    grid.grid_h = image.height / patch_size;
    grid.grid_w = image.width / patch_size;
    grid.patch_size = patch_size;
    grid.channels = image.channels;
    grid.image_h = image.height;
    grid.image_w = image.width;

    const int dim = patch_size * patch_size * image.channels;
    grid.patches.resize(grid.count(), dim);
    for (int gy = 0; gy < grid.grid_h; ++gy) {
        for (int gx = 0; gx < grid.grid_w; ++gx) {
            const int row = gy * grid.grid_w + gx;
            int k = 0;
            for (int py = 0; py < patch_size; ++py)
                for (int px = 0; px < patch_size; ++px)
                    for (int c = 0; c < image.channels; ++c)
                        grid.patches(row, k++) = image.at(gy * patch_size + py, gx * patch_size + px, c);
        }
    }
    return grid;
}

Image unpatchify(const PatchGrid& grid) {
    if (grid.count() <= 0 || grid.patches.rows() != grid.count())
        throw std::invalid_argument("unpatchify: malformed patch grid");
    Image image(grid.image_h, grid.image_w, grid.channels);
    for (int gy = 0; gy < grid.grid_h; ++gy) {
        for (int gx = 0; gx < grid.grid_w; ++gx) {
            const int row = gy * grid.grid_w + gx;
            int k = 0;
            for (int py = 0; py < grid.patch_size; ++py)
                for (int px = 0; px < grid.patch_size; ++px)
                    for (int c = 0; c < grid.channels; ++c)
                        image.at(gy * grid.patch_size + py, gx * grid.patch_size + px, c) = grid.patches(row, k++);
        }
    }
    return image;
}

ModalityMask sample_mask(int n, double rho, std::uint64_t rng_seed) {
    if (n < 1)
        throw std::invalid_argument("sample_mask: n must be >= 1");
    if (!(rho >= 0.0 && rho <= 1.0))
        throw std::invalid_argument("sample_mask: rho must lie in [0, 1], got " + std::to_string(rho));

    ModalityMask mask;
    mask.rho = rho;
    mask.assignment.assign(static_cast<std::size_t>(n), 0);
    mask.m_count = mask_ones_count(n, rho);
    mask.l_count = n - mask.m_count;

    // Uniform m-subset via partial Fisher-Yates over the index vector.
    std::vector<int> indices(static_cast<std::size_t>(n));
    std::iota(indices.begin(), indices.end(), 0);
    Rng rng(rng_seed);
    for (int i = 0; i < mask.m_count; ++i) {
        const int j = i + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n - i)));
        std::swap(indices[i], indices[j]);
        mask.assignment[static_cast<std::size_t>(indices[i])] = 1;
    }
    return mask;
}

PatchGrid mix(const PatchGrid& grid_f, const PatchGrid& grid_g, const ModalityMask& mask) {
    if (!grid_f.same_geometry(grid_g))
        throw std::invalid_argument(
            "mix: patch grid geometry mismatch, f is " + std::to_string(grid_f.grid_h) + "x" +
            std::to_string(grid_f.grid_w) + " (patch " + std::to_string(grid_f.patch_size) + ", ch " +
            std::to_string(grid_f.channels) + ") vs g " + std::to_string(grid_g.grid_h) + "x" +
            std::to_string(grid_g.grid_w) + " (patch " + std::to_string(grid_g.patch_size) + ", ch " +
            std::to_string(grid_g.channels) + ")");
    if (mask.size() != grid_f.count())
        throw std::invalid_argument("mix: mask length " + std::to_string(mask.size()) +
                                    " does not match patch count " + std::to_string(grid_f.count()));

    PatchGrid out = grid_g;
    for (int i = 0; i < mask.size(); ++i)
        if (mask.assignment[static_cast<std::size_t>(i)])
            out.patches.row(i) = grid_f.patches.row(i);
    return out;
}

BinaryMap modality_map_from_mask(const ModalityMask& mask, int grid_h, int grid_w) {
    if (mask.size() != grid_h * grid_w)
        throw std::invalid_argument("modality_map_from_mask: mask length " + std::to_string(mask.size()) +
                                    " does not match grid " + std::to_string(grid_h) + "x" + std::to_string(grid_w));
    BinaryMap map;
    map.h = grid_h;
    map.w = grid_w;
    map.values = mask.assignment;
    return map;
}

} // namespace mipa

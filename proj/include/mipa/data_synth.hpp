#pragma once

#include <cstdint>
#include <vector>

#include "mipa/det_head.hpp"
#include "mipa/image.hpp"

namespace mipa {

// How strongly a class shows up in each sensor: 1 = full contrast against
// the background, 0 = invisible.
struct ClassAffinity {
    double visibility_f = 1.0; // IR
    double visibility_g = 1.0; // RGB
};

struct SceneSpec {
    int image_h = 24;
    int image_w = 24;
    int min_objects = 1;
    int max_objects = 2;
    int num_classes = 2;
    std::vector<ClassAffinity> affinities; // one per class; missing -> (1, 1)
    double noise_sigma_f = 0.02;
    double noise_sigma_g = 0.02;
    int min_object_px = 6;
    int max_object_px = 12;
    std::uint64_t seed = 0;

    void validate() const;
};

// A pixel-aligned (IR, RGB) rendering pair with shared ground truth.
struct PairedSample {
    Image image_f; // IR, grayscale replicated over 3 channels
    Image image_g; // RGB
    DetectionSet gt;
    std::int64_t scene_id = 0;
    int objects_requested = 0;
    int objects_placed = 0;
};

// Background and per-class intensities of the two sensor palettes.
// Object pixel = background + visibility * (class signature - background).
struct ScenePalette {
    static constexpr double kBackgroundF = 0.18;
    static double background_g(int channel);
    static double class_intensity_f(int class_id);
    static double class_color_g(int class_id, int channel);
};

// Deterministic in (spec.seed, index), bit-exact.
PairedSample generate_scene(const SceneSpec& spec, std::int64_t index);

std::vector<PairedSample> generate_dataset(const SceneSpec& spec, std::int64_t first_index, int count);

// Histogram mutual information (nats) between co-located mean patch
// intensities of the two modalities. Diagnostic only. Returns 0 with a
// warning on degenerate (constant) channels.
double estimate_pairwise_mi(const std::vector<PairedSample>& samples, int bins,
                            int summary_patch = 4);

} // namespace mipa

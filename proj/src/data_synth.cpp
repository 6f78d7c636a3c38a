#include "mipa/data_synth.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "mipa/evalkit.hpp"
#include "mipa/mosaic.hpp"
#include "mipa/rng.hpp"

namespace mipa {

void SceneSpec::validate() const {
    if (image_h <= 0 || image_w <= 0)
        throw std::invalid_argument("scene spec: image dims must be positive");
    if (min_objects < 0 || max_objects < min_objects)
        throw std::invalid_argument("scene spec: invalid object count range");
    if (num_classes < 1)
        throw std::invalid_argument("scene spec: need at least one class");
    if (noise_sigma_f < 0.0 || noise_sigma_g < 0.0)
        throw std::invalid_argument("scene spec: noise sigma must be >= 0");
    if (min_object_px < 2 || max_object_px < min_object_px)
        throw std::invalid_argument("scene spec: invalid object size range");
    if (max_object_px > std::min(image_h, image_w))
        throw std::invalid_argument("scene spec: objects larger than the image");
    for (const ClassAffinity& a : affinities)
        if (a.visibility_f < 0.0 || a.visibility_f > 1.0 || a.visibility_g < 0.0 || a.visibility_g > 1.0)
            throw std::invalid_argument("scene spec: visibilities must lie in [0, 1]");
}

double ScenePalette::background_g(int channel) {
    static constexpr double kBg[3] = {0.30, 0.34, 0.38};
    return kBg[channel % 3];
}

double ScenePalette::class_intensity_f(int class_id) {
    // Bright IR signatures, staggered per class.
    const double t = std::fmod(class_id * 0.6180339887498949, 1.0);
    return 0.78 + 0.14 * t;
}

double ScenePalette::class_color_g(int class_id, int channel) {
    // Distinct saturated colors from a golden-angle hue walk.
    const double hue = std::fmod(0.05 + class_id * 0.6180339887498949, 1.0) * 6.0;
    const int sector = static_cast<int>(hue) % 6;
    const double frac = hue - std::floor(hue);
    const double v = 0.88, lo = 0.12;
    const double up = lo + (v - lo) * frac;
    const double down = v - (v - lo) * frac;
    double r, g, b;
    switch (sector) {
        case 0: r = v; g = up; b = lo; break;
        case 1: r = down; g = v; b = lo; break;
        case 2: r = lo; g = v; b = up; break;
        case 3: r = lo; g = down; b = v; break;
        case 4: r = up; g = lo; b = v; break;
        default: r = v; g = lo; b = down; break;
    }
    return channel == 0 ? r : (channel == 1 ? g : b);
}

namespace {

ClassAffinity affinity_for(const SceneSpec& spec, int class_id) {
    if (class_id < static_cast<int>(spec.affinities.size()))
        return spec.affinities[static_cast<std::size_t>(class_id)];
    return ClassAffinity{};
}

struct PlacedObject {
    int x0, y0, w, h, class_id;
};

constexpr int kPlacementRetries = 30;
constexpr double kMaxPlacementIou = 0.25;

} // namespace

PairedSample generate_scene(const SceneSpec& spec, std::int64_t index) {
    spec.validate();
    Rng rng(hash_combine(spec.seed, static_cast<std::uint64_t>(index)));

    PairedSample sample;
    sample.scene_id = index;
    sample.gt.image_id = index;
    sample.image_f = Image(spec.image_h, spec.image_w, 3, ScenePalette::kBackgroundF);
    sample.image_g = Image(spec.image_h, spec.image_w, 3);
    for (int y = 0; y < spec.image_h; ++y)
        for (int x = 0; x < spec.image_w; ++x)
            for (int c = 0; c < 3; ++c)
                sample.image_g.at(y, x, c) = ScenePalette::background_g(c);

    const int span = spec.max_objects - spec.min_objects + 1;
    sample.objects_requested = spec.min_objects + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(span)));

    std::vector<PlacedObject> placed;
    for (int k = 0; k < sample.objects_requested; ++k) {
        const int class_id = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(spec.num_classes)));
        bool ok = false;
        PlacedObject obj{};
        for (int attempt = 0; attempt < kPlacementRetries && !ok; ++attempt) {
            const int size_span = spec.max_object_px - spec.min_object_px + 1;
            obj.w = spec.min_object_px + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(size_span)));
            obj.h = spec.min_object_px + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(size_span)));
            obj.x0 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(spec.image_w - obj.w + 1)));
            obj.y0 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(spec.image_h - obj.h + 1)));
            obj.class_id = class_id;

            ok = true;
            BoundingBox candidate{(obj.x0 + obj.w / 2.0) / spec.image_w, (obj.y0 + obj.h / 2.0) / spec.image_h,
                                  static_cast<double>(obj.w) / spec.image_w, static_cast<double>(obj.h) / spec.image_h,
                                  class_id, 1.0};
            for (const PlacedObject& other : placed) {
                BoundingBox existing{(other.x0 + other.w / 2.0) / spec.image_w, (other.y0 + other.h / 2.0) / spec.image_h,
                                     static_cast<double>(other.w) / spec.image_w, static_cast<double>(other.h) / spec.image_h,
                                     other.class_id, 1.0};
                if (iou(candidate, existing) > kMaxPlacementIou) {
                    ok = false;
                    break;
                }
            }
        }
        if (!ok) continue; // fewer objects than requested; reflected in objects_placed
        placed.push_back(obj);
    }
    sample.objects_placed = static_cast<int>(placed.size());

    for (const PlacedObject& obj : placed) {
        const ClassAffinity vis = affinity_for(spec, obj.class_id);
        const double f_val = ScenePalette::kBackgroundF +
                             vis.visibility_f * (ScenePalette::class_intensity_f(obj.class_id) - ScenePalette::kBackgroundF);
        for (int y = obj.y0; y < obj.y0 + obj.h; ++y) {
            for (int x = obj.x0; x < obj.x0 + obj.w; ++x) {
                for (int c = 0; c < 3; ++c) {
                    sample.image_f.at(y, x, c) = f_val;
                    const double bg = ScenePalette::background_g(c);
                    sample.image_g.at(y, x, c) =
                        bg + vis.visibility_g * (ScenePalette::class_color_g(obj.class_id, c) - bg);
                }
            }
        }
        BoundingBox box;
        box.cx = (obj.x0 + obj.w / 2.0) / spec.image_w;
        box.cy = (obj.y0 + obj.h / 2.0) / spec.image_h;
        box.w = static_cast<double>(obj.w) / spec.image_w;
        box.h = static_cast<double>(obj.h) / spec.image_h;
        box.class_id = obj.class_id;
        sample.gt.boxes.push_back(box);
    }

    // Sensor noise: IR noise is a single per-pixel draw replicated over the
    // channels (grayscale preserved); RGB noise is per channel.
    for (int y = 0; y < spec.image_h; ++y) {
        for (int x = 0; x < spec.image_w; ++x) {
            const double nf = spec.noise_sigma_f > 0.0 ? rng.normal(0.0, spec.noise_sigma_f) : 0.0;
            for (int c = 0; c < 3; ++c) {
                sample.image_f.at(y, x, c) = std::clamp(sample.image_f.at(y, x, c) + nf, 0.0, 1.0);
                const double ng = spec.noise_sigma_g > 0.0 ? rng.normal(0.0, spec.noise_sigma_g) : 0.0;
                sample.image_g.at(y, x, c) = std::clamp(sample.image_g.at(y, x, c) + ng, 0.0, 1.0);
            }
        }
    }
    return sample;
}

std::vector<PairedSample> generate_dataset(const SceneSpec& spec, std::int64_t first_index, int count) {
    std::vector<PairedSample> samples;
    samples.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) samples.push_back(generate_scene(spec, first_index + i));
    return samples;
}

double estimate_pairwise_mi(const std::vector<PairedSample>& samples, int bins, int summary_patch) {
    if (samples.size() < 100)
        throw std::invalid_argument("estimate_pairwise_mi: need at least 100 samples, got " +
                                    std::to_string(samples.size()));
    if (bins < 2) throw std::invalid_argument("estimate_pairwise_mi: need at least 2 bins");

    std::vector<double> xs, ys;
    for (const PairedSample& sample : samples) {
        const PatchGrid gf = patchify(sample.image_f, summary_patch);
        const PatchGrid gg = patchify(sample.image_g, summary_patch);
        for (int i = 0; i < gf.count(); ++i) {
            xs.push_back(gf.patches.row(i).mean());
            ys.push_back(gg.patches.row(i).mean());
        }
    }

    const auto [x_min_it, x_max_it] = std::minmax_element(xs.begin(), xs.end());
    const auto [y_min_it, y_max_it] = std::minmax_element(ys.begin(), ys.end());
    const double x_min = *x_min_it, x_span = *x_max_it - x_min;
    const double y_min = *y_min_it, y_span = *y_max_it - y_min;
    if (x_span <= 0.0 || y_span <= 0.0) {
        std::cerr << "estimate_pairwise_mi: degenerate constant channel, returning 0\n";
        return 0.0;
    }

    std::vector<double> joint(static_cast<std::size_t>(bins) * bins, 0.0);
    std::vector<double> px(static_cast<std::size_t>(bins), 0.0), py(static_cast<std::size_t>(bins), 0.0);
    const double n = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const int bx = std::min(bins - 1, static_cast<int>((xs[i] - x_min) / x_span * bins));
        const int by = std::min(bins - 1, static_cast<int>((ys[i] - y_min) / y_span * bins));
        joint[static_cast<std::size_t>(bx) * bins + by] += 1.0;
        px[static_cast<std::size_t>(bx)] += 1.0;
        py[static_cast<std::size_t>(by)] += 1.0;
    }

    double mi = 0.0;
    for (int bx = 0; bx < bins; ++bx) {
        for (int by = 0; by < bins; ++by) {
            const double pxy = joint[static_cast<std::size_t>(bx) * bins + by] / n;
            if (pxy <= 0.0) continue;
            mi += pxy * std::log(pxy * n * n / (px[static_cast<std::size_t>(bx)] * py[static_cast<std::size_t>(by)]));
        }
    }
    return mi;
}

} // namespace mipa

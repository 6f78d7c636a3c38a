#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "mipa/coco.hpp"
#include "mipa/data_synth.hpp"
#include "mipa/image_io.hpp"
#include "mipa/rng.hpp"

using namespace mipa;
namespace fs = std::filesystem;

namespace {

SceneSpec complementary_spec() {
    SceneSpec spec;
    spec.image_h = 24;
    spec.image_w = 24;
    spec.min_objects = 1;
    spec.max_objects = 2;
    spec.num_classes = 2;
    spec.affinities = {{1.0, 0.1}, {0.1, 1.0}};
    spec.noise_sigma_f = 0.02;
    spec.noise_sigma_g = 0.02;
    spec.seed = 99;
    return spec;
}

// Mean |pixel - background| over the object's box region, channel-averaged.
double object_contrast(const Image& image, const BoundingBox& box, bool is_ir) {
    const int x0 = static_cast<int>(std::lround((box.cx - box.w / 2) * image.width));
    const int y0 = static_cast<int>(std::lround((box.cy - box.h / 2) * image.height));
    const int x1 = static_cast<int>(std::lround((box.cx + box.w / 2) * image.width));
    const int y1 = static_cast<int>(std::lround((box.cy + box.h / 2) * image.height));
    double sum = 0.0;
    long count = 0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
            for (int c = 0; c < 3; ++c) {
                const double bg = is_ir ? ScenePalette::kBackgroundF : ScenePalette::background_g(c);
                sum += std::abs(image.at(y, x, c) - bg);
                ++count;
            }
    return count > 0 ? sum / count : 0.0;
}

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
    auto ranks = [](const std::vector<double>& values) {
        std::vector<std::size_t> index(values.size());
        for (std::size_t i = 0; i < index.size(); ++i) index[i] = i;
        std::sort(index.begin(), index.end(),
                  [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        std::vector<double> rank(values.size());
        for (std::size_t i = 0; i < index.size(); ++i) rank[index[i]] = static_cast<double>(i);
        return rank;
    };
    const std::vector<double> rx = ranks(xs), ry = ranks(ys);
    const double n = static_cast<double>(xs.size());
    double mean = (n - 1) / 2.0, num = 0.0, dx = 0.0, dy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        num += (rx[i] - mean) * (ry[i] - mean);
        dx += (rx[i] - mean) * (rx[i] - mean);
        dy += (ry[i] - mean) * (ry[i] - mean);
    }
    return num / std::sqrt(dx * dy);
}

} // namespace

TEST_CASE("zero objects give a background-only pair with empty ground truth") {
    SceneSpec spec = complementary_spec();
    spec.min_objects = spec.max_objects = 0;
    spec.noise_sigma_f = spec.noise_sigma_g = 0.0;
    const PairedSample sample = generate_scene(spec, 0);
    CHECK(sample.gt.boxes.empty());
    CHECK(sample.objects_placed == 0);
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x) {
            CHECK(sample.image_f.at(y, x, 0) == ScenePalette::kBackgroundF);
            CHECK(sample.image_g.at(y, x, 1) == ScenePalette::background_g(1));
        }
}

TEST_CASE("full visibility in both modalities puts the object in both renderings") {
    SceneSpec spec = complementary_spec();
    spec.num_classes = 1;
    spec.affinities = {{1.0, 1.0}};
    spec.min_objects = spec.max_objects = 1;
    spec.noise_sigma_f = spec.noise_sigma_g = 0.0;
    const PairedSample sample = generate_scene(spec, 3);
    REQUIRE(sample.gt.boxes.size() == 1);

    // The support masks agree up to the per-modality palette.
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x) {
            const bool on_f = std::abs(sample.image_f.at(y, x, 0) - ScenePalette::kBackgroundF) > 1e-9;
            double g_dev = 0.0;
            for (int c = 0; c < 3; ++c)
                g_dev += std::abs(sample.image_g.at(y, x, c) - ScenePalette::background_g(c));
            CHECK(on_f == (g_dev > 1e-9));
        }
}

TEST_CASE("IR rendering is channel-replicated") {
    const PairedSample sample = generate_scene(complementary_spec(), 17);
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x) {
            CHECK(sample.image_f.at(y, x, 0) == sample.image_f.at(y, x, 1));
            CHECK(sample.image_f.at(y, x, 0) == sample.image_f.at(y, x, 2));
        }
}

TEST_CASE("contrast oracle: the invisible modality shows under 15% of the visible one") {
    const SceneSpec spec = complementary_spec();
    double visible_sum = 0.0, invisible_sum = 0.0;
    long count = 0;
    for (int i = 0; i < 1000; ++i) {
        const PairedSample sample = generate_scene(spec, i);
        for (const BoundingBox& box : sample.gt.boxes) {
            const bool ir_strong = box.class_id == 0; // affinity (1.0, 0.1)
            const double f_contrast = object_contrast(sample.image_f, box, true);
            const double g_contrast = object_contrast(sample.image_g, box, false);
            visible_sum += ir_strong ? f_contrast : g_contrast;
            invisible_sum += ir_strong ? g_contrast : f_contrast;
            ++count;
        }
    }
    REQUIRE(count > 500);
    CHECK(invisible_sum / count < 0.15 * (visible_sum / count));
}

TEST_CASE("generation is bit-exact deterministic in (seed, index)") {
    const SceneSpec spec = complementary_spec();
    const PairedSample a = generate_scene(spec, 123);
    const PairedSample b = generate_scene(spec, 123);
    CHECK(a.image_f.data == b.image_f.data);
    CHECK(a.image_g.data == b.image_g.data);
    REQUIRE(a.gt.boxes.size() == b.gt.boxes.size());
    for (std::size_t i = 0; i < a.gt.boxes.size(); ++i) {
        CHECK(a.gt.boxes[i].cx == b.gt.boxes[i].cx);
        CHECK(a.gt.boxes[i].class_id == b.gt.boxes[i].class_id);
    }
    const PairedSample c = generate_scene(spec, 124);
    CHECK(a.image_f.data != c.image_f.data);
}

TEST_CASE("ground truth is shared between the two renderings and stays in bounds") {
    const SceneSpec spec = complementary_spec();
    for (int i = 0; i < 50; ++i) {
        const PairedSample sample = generate_scene(spec, i);
        CHECK(sample.image_f.same_shape(sample.image_g));
        CHECK(sample.objects_placed == static_cast<int>(sample.gt.boxes.size()));
        CHECK(sample.objects_placed <= sample.objects_requested);
        for (const BoundingBox& box : sample.gt.boxes) {
            CHECK(box.cx - box.w / 2 >= -1e-12);
            CHECK(box.cx + box.w / 2 <= 1.0 + 1e-12);
            CHECK(box.cy - box.h / 2 >= -1e-12);
            CHECK(box.cy + box.h / 2 <= 1.0 + 1e-12);
            CHECK(box.class_id >= 0);
            CHECK(box.class_id < 2);
        }
    }
}

TEST_CASE("mi estimator: identical pairs reach the marginal entropy") {
    SceneSpec spec = complementary_spec();
    spec.noise_sigma_f = spec.noise_sigma_g = 0.05;
    std::vector<PairedSample> samples;
    for (int i = 0; i < 150; ++i) {
        PairedSample sample = generate_scene(spec, i);
        sample.image_g = sample.image_f; // X vs X
        samples.push_back(std::move(sample));
    }
    const int bins = 32;
    const double mi = estimate_pairwise_mi(samples, bins, 4);

    // Marginal entropy of the same summaries under the same binning.
    std::vector<double> xs;
    for (const PairedSample& sample : samples) {
        const PatchGrid grid = patchify(sample.image_f, 4);
        for (int i = 0; i < grid.count(); ++i) xs.push_back(grid.patches.row(i).mean());
    }
    const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    std::vector<double> hist(static_cast<std::size_t>(bins), 0.0);
    for (double x : xs) {
        const int b = std::min(bins - 1, static_cast<int>((x - *lo) / (*hi - *lo) * bins));
        hist[static_cast<std::size_t>(b)] += 1.0;
    }
    double entropy = 0.0;
    for (double count : hist)
        if (count > 0) entropy -= count / xs.size() * std::log(count / xs.size());

    CHECK(mi == doctest::Approx(entropy).epsilon(1e-9));
    CHECK(mi > 0.5); // far from independent
}

TEST_CASE("mi estimator: independent noise is under 0.05 nats") {
    std::vector<PairedSample> samples;
    Rng rng(515);
    for (int i = 0; i < 500; ++i) {
        PairedSample sample;
        sample.image_f = Image(24, 24, 3);
        sample.image_g = Image(24, 24, 3);
        for (double& v : sample.image_f.data) v = rng.uniform();
        for (double& v : sample.image_g.data) v = rng.uniform();
        samples.push_back(std::move(sample));
    }
    CHECK(estimate_pairwise_mi(samples, 32, 4) < 0.05);
}

TEST_CASE("mi estimator: degenerate constant channels give zero") {
    std::vector<PairedSample> samples;
    for (int i = 0; i < 100; ++i) {
        PairedSample sample;
        sample.image_f = Image(8, 8, 3, 0.5);
        sample.image_g = Image(8, 8, 3, 0.25);
        samples.push_back(std::move(sample));
    }
    CHECK(estimate_pairwise_mi(samples, 16, 4) == 0.0);
}

TEST_CASE("mi estimator requires at least 100 samples") {
    std::vector<PairedSample> samples(5);
    CHECK_THROWS_AS(estimate_pairwise_mi(samples, 16, 4), std::invalid_argument);
}

TEST_CASE("mi decreases monotonically as noise drowns the scene (rank test)") {
    std::vector<double> sigmas = {0.0, 0.05, 0.1, 0.2, 0.4, 0.8};
    std::vector<double> mis;
    for (double sigma : sigmas) {
        SceneSpec spec = complementary_spec();
        spec.affinities = {{1.0, 1.0}, {1.0, 1.0}}; // shared structure in both
        spec.noise_sigma_f = spec.noise_sigma_g = sigma;
        std::vector<PairedSample> samples;
        for (int i = 0; i < 200; ++i) samples.push_back(generate_scene(spec, i));
        mis.push_back(estimate_pairwise_mi(samples, 16, 4));
    }
    CHECK(spearman(sigmas, mis) < 0.0);
    CHECK(mis.front() > mis.back());
}

TEST_CASE("coco round trip: write synthetic data, load aligned pairs back") {
    const fs::path root = fs::temp_directory_path() / "mipa_coco_roundtrip";
    fs::remove_all(root);

    SceneSpec spec = complementary_spec();
    spec.noise_sigma_f = spec.noise_sigma_g = 0.0;
    std::vector<PairedSample> samples;
    for (int i = 0; i < 2; ++i) samples.push_back(generate_scene(spec, i));
    write_coco_dataset(root.string(), samples, 2);

    CocoLoadOptions options;
    options.root = root.string();
    options.annotation_file = (root / "annotations.json").string();
    const CocoDataset loaded = load_coco_pairs(options);
    CHECK(loaded.report.loaded == 2);
    CHECK(loaded.report.skipped_missing == 0);
    CHECK(loaded.num_classes == 2);
    REQUIRE(loaded.samples.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(loaded.samples[i].image_g.height == 24);
        CHECK(loaded.samples[i].gt.boxes.size() == samples[i].gt.boxes.size());
        // 8-bit quantization bounds the pixel error.
        for (std::size_t k = 0; k < loaded.samples[i].image_f.data.size(); ++k)
            CHECK(std::abs(loaded.samples[i].image_f.data[k] - samples[i].image_f.data[k]) < 0.5 / 255.0 + 1e-9);
        for (std::size_t b = 0; b < samples[i].gt.boxes.size(); ++b) {
            CHECK(loaded.samples[i].gt.boxes[b].cx == doctest::Approx(samples[i].gt.boxes[b].cx));
            CHECK(loaded.samples[i].gt.boxes[b].w == doctest::Approx(samples[i].gt.boxes[b].w));
        }
    }
    fs::remove_all(root);
}

TEST_CASE("coco loader rescales boxes like the hand oracle") {
    const fs::path root = fs::temp_directory_path() / "mipa_coco_rescale";
    fs::remove_all(root);
    fs::create_directories(root / "visible");
    fs::create_directories(root / "infrared");

    // 1280x1024 source pair, box (x,y,w,h) = (100,100,50,50).
    Image big(1024, 1280, 1, 0.5);
    write_ppm((root / "visible" / "img.ppm").string(), big);
    write_ppm((root / "infrared" / "img.ppm").string(), big);
    std::ofstream ann(root / "ann.json");
    ann << R"({"images":[{"id":1,"file_name":"visible/img.ppm","width":1280,"height":1024}],)"
        << R"("annotations":[{"id":1,"image_id":1,"category_id":5,"bbox":[100,100,50,50]}],)"
        << R"("categories":[{"id":5,"name":"pedestrian"}]})";
    ann.close();

    CocoLoadOptions options;
    options.root = root.string();
    options.annotation_file = (root / "ann.json").string();
    options.resize_h = 512;
    options.resize_w = 640;
    const CocoDataset loaded = load_coco_pairs(options);
    REQUIRE(loaded.samples.size() == 1);
    CHECK(loaded.samples[0].image_g.height == 512);
    CHECK(loaded.samples[0].image_g.width == 640);
    REQUIRE(loaded.samples[0].gt.boxes.size() == 1);
    const BoundingBox& box = loaded.samples[0].gt.boxes[0];
    CHECK(box.cx == doctest::Approx(0.0977).epsilon(1e-3));
    CHECK(box.cy == doctest::Approx(0.1221).epsilon(1e-3));
    CHECK(box.w == doctest::Approx(0.0391).epsilon(1e-3));
    CHECK(box.h == doctest::Approx(0.0488).epsilon(1e-3));
    CHECK(box.class_id == 0);
    fs::remove_all(root);
}

TEST_CASE("coco loader skips missing counterpart files and reports them") {
    const fs::path root = fs::temp_directory_path() / "mipa_coco_missing";
    fs::remove_all(root);
    fs::create_directories(root / "visible");
    fs::create_directories(root / "infrared");
    write_ppm((root / "visible" / "a.ppm").string(), Image(8, 8, 3, 0.3));
    write_ppm((root / "infrared" / "a.ppm").string(), Image(8, 8, 3, 0.6));
    write_ppm((root / "visible" / "b.ppm").string(), Image(8, 8, 3, 0.3)); // no IR counterpart

    std::ofstream ann(root / "ann.json");
    ann << R"({"images":[{"id":1,"file_name":"visible/a.ppm","width":8,"height":8},)"
        << R"({"id":2,"file_name":"visible/b.ppm","width":8,"height":8}],)"
        << R"("annotations":[],"categories":[{"id":1,"name":"c"}]})";
    ann.close();

    CocoLoadOptions options;
    options.root = root.string();
    options.annotation_file = (root / "ann.json").string();
    const CocoDataset loaded = load_coco_pairs(options);
    CHECK(loaded.report.loaded == 1);
    CHECK(loaded.report.skipped_missing == 1);
    REQUIRE(loaded.report.messages.size() == 1);
    CHECK(loaded.report.messages[0].find("b.ppm") != std::string::npos);
    fs::remove_all(root);
}

TEST_CASE("coco loader rejects malformed annotations with context") {
    const fs::path root = fs::temp_directory_path() / "mipa_coco_malformed";
    fs::remove_all(root);
    fs::create_directories(root);
    std::ofstream ann(root / "bad.json");
    ann << "{ not json";
    ann.close();

    CocoLoadOptions options;
    options.root = root.string();
    options.annotation_file = (root / "bad.json").string();
    CHECK_THROWS_WITH_AS(load_coco_pairs(options), doctest::Contains("bad.json"), std::runtime_error);
    fs::remove_all(root);
}

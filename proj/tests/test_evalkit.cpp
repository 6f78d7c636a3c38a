#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "mipa/evalkit.hpp"
#include "mipa/rng.hpp"

using namespace mipa;

namespace {

BoundingBox make_box(double cx, double cy, double w, double h, int class_id, double score = 1.0) {
    BoundingBox box;
    box.cx = cx;
    box.cy = cy;
    box.w = w;
    box.h = h;
    box.class_id = class_id;
    box.score = score;
    return box;
}

struct OracleOutcome {
    std::vector<bool> is_tp; // global score-descending order
    long num_gt = 0;
};

// Brute-force matcher: per image, enumerate every injective pred->GT
// assignment (including "unmatched") and keep the unique one satisfying the
// greedy definition -- each prediction in score order takes the free GT with
// the highest IoU at or above the threshold.
OracleOutcome oracle_match_class(const std::vector<DetectionSet>& preds,
                                 const std::vector<DetectionSet>& gts,
                                 int class_id, double threshold) {
    OracleOutcome outcome;
    for (const DetectionSet& set : gts)
        for (const BoundingBox& box : set.boxes)
            if (box.class_id == class_id) ++outcome.num_gt;

    struct Entry {
        double score;
        std::size_t image;
        const BoundingBox* box;
        bool tp = false;
    };
    std::vector<Entry> entries;
    for (std::size_t i = 0; i < preds.size(); ++i)
        for (const BoundingBox& box : preds[i].boxes)
            if (box.class_id == class_id) entries.push_back({box.score, i, &box, false});

    for (std::size_t img = 0; img < gts.size(); ++img) {
        std::vector<const BoundingBox*> class_gts;
        for (const BoundingBox& box : gts[img].boxes)
            if (box.class_id == class_id) class_gts.push_back(&box);

        std::vector<Entry*> image_entries;
        for (Entry& e : entries)
            if (e.image == img) image_entries.push_back(&e);
        std::stable_sort(image_entries.begin(), image_entries.end(),
                         [](const Entry* a, const Entry* b) { return a->score > b->score; });

        const std::size_t n_p = image_entries.size();
        const std::size_t n_g = class_gts.size();
        if (n_p == 0) continue;

        std::vector<int> assignment(n_p, -2);
        std::vector<int> chosen;
        std::vector<bool> used(n_g, false);
        std::function<void(std::size_t)> enumerate = [&](std::size_t i) {
            if (!chosen.empty()) return;
            if (i == n_p) {
                // Replay the greedy definition against this assignment.
                std::vector<bool> taken(n_g, false);
                for (std::size_t k = 0; k < n_p; ++k) {
                    double best_iou = 0.0;
                    int best = -1;
                    for (std::size_t g = 0; g < n_g; ++g) {
                        if (taken[g]) continue;
                        const double overlap = iou(*image_entries[k]->box, *class_gts[g]);
                        if (overlap >= threshold && overlap > best_iou) {
                            best_iou = overlap;
                            best = static_cast<int>(g);
                        }
                    }
                    if (assignment[k] != best) return;
                    if (best >= 0) taken[static_cast<std::size_t>(best)] = true;
                }
                chosen = assignment;
                return;
            }
            for (int g = -1; g < static_cast<int>(n_g); ++g) {
                if (g >= 0 && used[static_cast<std::size_t>(g)]) continue;
                assignment[i] = g;
                if (g >= 0) used[static_cast<std::size_t>(g)] = true;
                enumerate(i + 1);
                if (g >= 0) used[static_cast<std::size_t>(g)] = false;
            }
        };
        enumerate(0);
        REQUIRE(chosen.size() == n_p);
        for (std::size_t k = 0; k < n_p; ++k) image_entries[k]->tp = chosen[k] >= 0;
    }

    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& a, const Entry& b) { return a.score > b.score; });
    for (const Entry& e : entries) outcome.is_tp.push_back(e.tp);
    return outcome;
}

// Direct PR-curve integration, reimplemented with plain loops.
double oracle_ap(const OracleOutcome& outcome) {
    if (outcome.num_gt == 0) return 0.0;
    std::vector<double> precisions, recalls;
    long tp = 0, fp = 0;
    for (bool hit : outcome.is_tp) {
        hit ? ++tp : ++fp;
        precisions.push_back(static_cast<double>(tp) / (tp + fp));
        recalls.push_back(static_cast<double>(tp) / outcome.num_gt);
    }
    double sum = 0.0;
    for (int k = 0; k <= 100; ++k) {
        const double r = k / 100.0;
        double best = 0.0;
        for (std::size_t i = 0; i < precisions.size(); ++i)
            if (recalls[i] >= r && precisions[i] > best) best = precisions[i];
        sum += best;
    }
    return sum / 101.0;
}

} // namespace

TEST_CASE("iou hand cases") {
    const BoundingBox a = make_box(0.5, 0.5, 0.2, 0.2, 0);
    CHECK(std::abs(iou(a, a) - 1.0) < 1e-9);
    const BoundingBox far = make_box(0.1, 0.1, 0.05, 0.05, 0);
    CHECK(iou(a, far) == 0.0);

    // Corner boxes xyxy [0,0,2,2] and [1,1,3,3] in a 4-unit frame -> IoU 1/7.
    const BoundingBox c1 = make_box(0.25, 0.25, 0.5, 0.5, 0);
    const BoundingBox c2 = make_box(0.5, 0.5, 0.5, 0.5, 0);
    CHECK(std::abs(iou(c1, c2) - 1.0 / 7.0) < 1e-9);
}

TEST_CASE("ap50 basics: single prediction above/below the overlap threshold") {
    std::vector<DetectionSet> gts(1), preds(1);
    gts[0].image_id = preds[0].image_id = 0;
    gts[0].boxes.push_back(make_box(0.5, 0.5, 0.2, 0.2, 0));

    preds[0].boxes.push_back(make_box(0.505, 0.5, 0.2, 0.2, 0, 0.9)); // IoU ~0.95
    CHECK(average_precision(preds, gts, 0.5) == doctest::Approx(1.0));

    preds[0].boxes[0] = make_box(0.62, 0.62, 0.2, 0.2, 0, 0.9);
    CHECK(iou(preds[0].boxes[0], gts[0].boxes[0]) < 0.5);
    CHECK(average_precision(preds, gts, 0.5) == 0.0);
}

TEST_CASE("ap edge conventions: preds without gt score zero, absent classes are excluded") {
    std::vector<DetectionSet> gts(2), preds(2);
    for (int i = 0; i < 2; ++i) gts[static_cast<std::size_t>(i)].image_id =
        preds[static_cast<std::size_t>(i)].image_id = i;
    gts[0].boxes.push_back(make_box(0.5, 0.5, 0.2, 0.2, 0));
    preds[0].boxes.push_back(make_box(0.5, 0.5, 0.2, 0.2, 0, 0.9));
    preds[1].boxes.push_back(make_box(0.3, 0.3, 0.2, 0.2, 1, 0.8)); // class 1 has no GT

    const auto per_class = average_precision_per_class(preds, gts, 0.5);
    REQUIRE(per_class.size() == 2);
    CHECK(per_class.at(0) == doctest::Approx(1.0));
    CHECK(per_class.at(1) == 0.0);
    CHECK(average_precision(preds, gts, 0.5) == doctest::Approx(0.5));

    const auto only = average_precision_per_class({preds[0]}, {gts[0]}, 0.5);
    CHECK(only.size() == 1);
}

TEST_CASE("greedy ap equals the brute-force assignment enumeration oracle") {
    Rng rng(2025);
    for (int instance = 0; instance < 200; ++instance) {
        const int images = 1 + static_cast<int>(rng.uniform_int(10));
        std::vector<DetectionSet> gts(static_cast<std::size_t>(images));
        std::vector<DetectionSet> preds(static_cast<std::size_t>(images));
        for (int i = 0; i < images; ++i) {
            gts[static_cast<std::size_t>(i)].image_id = i;
            preds[static_cast<std::size_t>(i)].image_id = i;
            const int gt_count = static_cast<int>(rng.uniform_int(5));
            const int pred_count = static_cast<int>(rng.uniform_int(5));
            for (int k = 0; k < gt_count; ++k)
                gts[static_cast<std::size_t>(i)].boxes.push_back(
                    make_box(0.2 + 0.6 * rng.uniform(), 0.2 + 0.6 * rng.uniform(),
                             0.1 + 0.3 * rng.uniform(), 0.1 + 0.3 * rng.uniform(),
                             static_cast<int>(rng.uniform_int(2))));
            for (int k = 0; k < pred_count; ++k)
                preds[static_cast<std::size_t>(i)].boxes.push_back(
                    make_box(0.2 + 0.6 * rng.uniform(), 0.2 + 0.6 * rng.uniform(),
                             0.1 + 0.3 * rng.uniform(), 0.1 + 0.3 * rng.uniform(),
                             static_cast<int>(rng.uniform_int(2)), rng.uniform()));
        }

        for (const double threshold : {0.5, 0.75}) {
            double oracle_sum = 0.0;
            int classes = 0;
            for (int class_id = 0; class_id < 2; ++class_id) {
                const OracleOutcome outcome = oracle_match_class(preds, gts, class_id, threshold);
                bool any_pred = false;
                for (const DetectionSet& set : preds)
                    for (const BoundingBox& box : set.boxes)
                        if (box.class_id == class_id) any_pred = true;
                if (outcome.num_gt == 0 && !any_pred) continue;
                oracle_sum += oracle_ap(outcome);
                ++classes;
            }
            const double expected = classes > 0 ? oracle_sum / classes : 0.0;
            CHECK(average_precision(preds, gts, threshold) == expected);
        }
    }
}

TEST_CASE("ap is invariant to prediction order and positive score rescaling") {
    Rng rng(4);
    std::vector<DetectionSet> gts(3), preds(3);
    for (int i = 0; i < 3; ++i) {
        gts[static_cast<std::size_t>(i)].image_id = preds[static_cast<std::size_t>(i)].image_id = i;
        for (int k = 0; k < 3; ++k) {
            gts[static_cast<std::size_t>(i)].boxes.push_back(
                make_box(0.2 + 0.6 * rng.uniform(), 0.2 + 0.6 * rng.uniform(), 0.15, 0.15, 0));
            preds[static_cast<std::size_t>(i)].boxes.push_back(
                make_box(0.2 + 0.6 * rng.uniform(), 0.2 + 0.6 * rng.uniform(), 0.15, 0.15, 0,
                         0.1 + 0.8 * rng.uniform()));
        }
    }
    const double base = average_precision(preds, gts, 0.5);

    auto reordered = preds;
    for (auto& set : reordered) std::reverse(set.boxes.begin(), set.boxes.end());
    CHECK(average_precision(reordered, gts, 0.5) == base);

    auto rescaled = preds;
    for (auto& set : rescaled)
        for (BoundingBox& box : set.boxes) box.score *= 0.37;
    CHECK(average_precision(rescaled, gts, 0.5) == base);
}

TEST_CASE("ap is monotone nonincreasing in the iou threshold") {
    Rng rng(6);
    std::vector<DetectionSet> gts(4), preds(4);
    for (int i = 0; i < 4; ++i) {
        gts[static_cast<std::size_t>(i)].image_id = preds[static_cast<std::size_t>(i)].image_id = i;
        for (int k = 0; k < 2; ++k) {
            const BoundingBox gt = make_box(0.25 + 0.5 * rng.uniform(), 0.25 + 0.5 * rng.uniform(),
                                            0.2, 0.2, 0);
            gts[static_cast<std::size_t>(i)].boxes.push_back(gt);
            BoundingBox shifted = gt;
            shifted.cx += 0.03 * rng.normal();
            shifted.cy += 0.03 * rng.normal();
            shifted.score = rng.uniform();
            preds[static_cast<std::size_t>(i)].boxes.push_back(shifted);
        }
    }
    double prev = 1.1;
    for (int k = 0; k < 10; ++k) {
        const double ap = average_precision(preds, gts, 0.5 + 0.05 * k);
        CHECK(ap <= prev + 1e-12);
        prev = ap;
    }
}

TEST_CASE("build_report fills both modalities and averages exactly") {
    std::vector<DetectionSet> gts(2), good(2), half(2);
    for (int i = 0; i < 2; ++i) {
        gts[static_cast<std::size_t>(i)].image_id = i;
        good[static_cast<std::size_t>(i)].image_id = i;
        half[static_cast<std::size_t>(i)].image_id = i;
    }
    gts[0].boxes.push_back(make_box(0.5, 0.5, 0.2, 0.2, 0));
    gts[1].boxes.push_back(make_box(0.4, 0.4, 0.2, 0.2, 0));
    good[0].boxes.push_back(make_box(0.5, 0.5, 0.2, 0.2, 0, 0.9));
    good[1].boxes.push_back(make_box(0.4, 0.4, 0.2, 0.2, 0, 0.9));
    half[0].boxes.push_back(make_box(0.5, 0.5, 0.2, 0.2, 0, 0.9)); // one hit, one miss
    half[1].boxes.push_back(make_box(0.9, 0.9, 0.05, 0.05, 0, 0.8));

    const EvalReport report = build_report(&half, &good, gts);
    REQUIRE(report.rgb);
    REQUIRE(report.ir);
    CHECK(!report.partial);
    CHECK(report.ir->ap50 == doctest::Approx(1.0));
    CHECK(report.average.ap50 == (report.rgb->ap50 + report.ir->ap50) / 2.0);
    CHECK(report.average.ap75 == (report.rgb->ap75 + report.ir->ap75) / 2.0);
    CHECK(report.average.ap == (report.rgb->ap + report.ir->ap) / 2.0);

    const EvalReport same = build_report(&good, &good, gts);
    CHECK(same.average.ap50 == same.rgb->ap50);

    // The paper-style averaging arithmetic.
    CHECK(std::abs((88.5 + 97.5) / 2.0 - 93.00) < 1e-12);
    CHECK(std::abs((78.9 + 98.2) / 2.0 - 88.55) < 1e-12);

    const EvalReport partial = build_report(nullptr, &good, gts);
    CHECK(partial.partial);
    CHECK(!partial.rgb);
    CHECK(partial.average.ap50 == partial.ir->ap50);

    const std::string json_text = report.to_json();
    CHECK(json_text.find("ap50_rgb") != std::string::npos);
    CHECK(json_text.find("ap75_ir") != std::string::npos);
    CHECK(json_text.find("ap_avg") != std::string::npos);
    CHECK(report.csv_header() ==
          "ap50_rgb,ap50_ir,ap50_avg,ap75_rgb,ap75_ir,ap75_avg,ap_rgb,ap_ir,ap_avg");
}

TEST_CASE("average_precision validates aligned image ids") {
    std::vector<DetectionSet> gts(2), preds(2);
    gts[0].image_id = 0;
    gts[1].image_id = 1;
    preds[0].image_id = 0;
    preds[1].image_id = 7;
    CHECK_THROWS_AS(average_precision(preds, gts, 0.5), std::invalid_argument);
}

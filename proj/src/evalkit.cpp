#include "mipa/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

namespace mipa {

double iou(const BoundingBox& a, const BoundingBox& b) {
    const double ax0 = a.cx - a.w / 2, ax1 = a.cx + a.w / 2;
    const double ay0 = a.cy - a.h / 2, ay1 = a.cy + a.h / 2;
    const double bx0 = b.cx - b.w / 2, bx1 = b.cx + b.w / 2;
    const double by0 = b.cy - b.h / 2, by1 = b.cy + b.h / 2;

    const double ix = std::max(0.0, std::min(ax1, bx1) - std::max(ax0, bx0));
    const double iy = std::max(0.0, std::min(ay1, by1) - std::max(ay0, by0));
    const double inter = ix * iy;
    const double uni = a.w * a.h + b.w * b.h - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

namespace {

struct ScoredPred {
    double score;
    std::size_t image_index;
    std::size_t box_index;
};

// TP/FP flags for one class at one threshold, in score-descending order,
// plus the total GT count for that class.
struct MatchOutcome {
    std::vector<bool> is_tp;
    long num_gt = 0;
};

MatchOutcome match_class(const std::vector<DetectionSet>& preds,
                         const std::vector<DetectionSet>& gts,
                         int class_id, double iou_threshold) {
    MatchOutcome outcome;

    std::vector<ScoredPred> scored;
    for (std::size_t i = 0; i < preds.size(); ++i)
        for (std::size_t j = 0; j < preds[i].boxes.size(); ++j)
            if (preds[i].boxes[j].class_id == class_id)
                scored.push_back({preds[i].boxes[j].score, i, j});
    std::stable_sort(scored.begin(), scored.end(),
                     [](const ScoredPred& a, const ScoredPred& b) { return a.score > b.score; });

    std::vector<std::vector<bool>> gt_used(gts.size());
    for (std::size_t i = 0; i < gts.size(); ++i) {
        gt_used[i].assign(gts[i].boxes.size(), false);
        for (const BoundingBox& box : gts[i].boxes)
            if (box.class_id == class_id) ++outcome.num_gt;
    }

    outcome.is_tp.reserve(scored.size());
    for (const ScoredPred& sp : scored) {
        const BoundingBox& pred_box = preds[sp.image_index].boxes[sp.box_index];
        const DetectionSet& gt = gts[sp.image_index];

        double best_iou = 0.0;
        int best = -1;
        for (std::size_t j = 0; j < gt.boxes.size(); ++j) {
            if (gt.boxes[j].class_id != class_id || gt_used[sp.image_index][j]) continue;
            const double overlap = iou(pred_box, gt.boxes[j]);
            if (overlap >= iou_threshold && overlap > best_iou) {
                best_iou = overlap;
                best = static_cast<int>(j);
            }
        }
        if (best >= 0) {
            gt_used[sp.image_index][static_cast<std::size_t>(best)] = true;
            outcome.is_tp.push_back(true);
        } else {
            outcome.is_tp.push_back(false);
        }
    }
    return outcome;
}

double ap_from_matches(const MatchOutcome& outcome) {
    if (outcome.num_gt == 0) return 0.0;

    std::vector<double> precision, recall;
    long tp = 0, fp = 0;
    for (bool hit : outcome.is_tp) {
        hit ? ++tp : ++fp;
        precision.push_back(static_cast<double>(tp) / (tp + fp));
        recall.push_back(static_cast<double>(tp) / outcome.num_gt);
    }

    // 101-point interpolation: mean over r in {0, 0.01, ..., 1} of the best
    // precision at recall >= r.
    double sum = 0.0;
    for (int k = 0; k <= 100; ++k) {
        const double r = k / 100.0;
        double best = 0.0;
        for (std::size_t i = 0; i < recall.size(); ++i)
            if (recall[i] >= r && precision[i] > best) best = precision[i];
        sum += best;
    }
    return sum / 101.0;
}

std::set<int> classes_in_play(const std::vector<DetectionSet>& preds,
                              const std::vector<DetectionSet>& gts) {
    std::set<int> ids;
    for (const DetectionSet& set : gts)
        for (const BoundingBox& box : set.boxes) ids.insert(box.class_id);
    for (const DetectionSet& set : preds)
        for (const BoundingBox& box : set.boxes) ids.insert(box.class_id);
    return ids;
}

void align_check(const std::vector<DetectionSet>& preds, const std::vector<DetectionSet>& gts) {
    if (preds.size() != gts.size())
        throw std::invalid_argument("average_precision: prediction and GT image counts differ");
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i].image_id != gts[i].image_id)
            throw std::invalid_argument("average_precision: image_id mismatch at index " + std::to_string(i));
}

} // namespace

std::map<int, double> average_precision_per_class(const std::vector<DetectionSet>& preds,
                                                  const std::vector<DetectionSet>& gts,
                                                  double iou_threshold) {
    align_check(preds, gts);
    std::map<int, double> result;
    for (int class_id : classes_in_play(preds, gts))
        result[class_id] = ap_from_matches(match_class(preds, gts, class_id, iou_threshold));
    return result;
}

double average_precision(const std::vector<DetectionSet>& preds,
                         const std::vector<DetectionSet>& gts,
                         double iou_threshold) {
    const auto per_class = average_precision_per_class(preds, gts, iou_threshold);
    if (per_class.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [id, ap] : per_class) sum += ap;
    return sum / per_class.size();
}

ModalityMetrics evaluate_modality(const std::vector<DetectionSet>& preds,
                                  const std::vector<DetectionSet>& gts) {
    ModalityMetrics metrics;
    metrics.ap50 = average_precision(preds, gts, 0.50);
    metrics.ap75 = average_precision(preds, gts, 0.75);
    double sum = 0.0;
    for (int k = 0; k < 10; ++k) sum += average_precision(preds, gts, 0.50 + 0.05 * k);
    metrics.ap = sum / 10.0;
    metrics.per_class_ap50 = average_precision_per_class(preds, gts, 0.50);
    return metrics;
}

EvalReport build_report(const std::vector<DetectionSet>* preds_rgb,
                        const std::vector<DetectionSet>* preds_ir,
                        const std::vector<DetectionSet>& gts) {
    EvalReport report;
    if (preds_rgb) report.rgb = evaluate_modality(*preds_rgb, gts);
    if (preds_ir) report.ir = evaluate_modality(*preds_ir, gts);
    report.partial = !(report.rgb && report.ir);

    const ModalityMetrics zero;
    const ModalityMetrics& rgb = report.rgb ? *report.rgb : zero;
    const ModalityMetrics& ir = report.ir ? *report.ir : zero;
    if (report.rgb && report.ir) {
        report.average.ap50 = (rgb.ap50 + ir.ap50) / 2.0;
        report.average.ap75 = (rgb.ap75 + ir.ap75) / 2.0;
        report.average.ap = (rgb.ap + ir.ap) / 2.0;
    } else if (report.rgb) {
        report.average = rgb;
    } else if (report.ir) {
        report.average = ir;
    }
    return report;
}

namespace {

void metrics_to_json(nlohmann::json& out, const char* suffix, const ModalityMetrics* metrics) {
    if (!metrics) {
        out[std::string("ap50_") + suffix] = nullptr;
        out[std::string("ap75_") + suffix] = nullptr;
        out[std::string("ap_") + suffix] = nullptr;
        return;
    }
    out[std::string("ap50_") + suffix] = metrics->ap50;
    out[std::string("ap75_") + suffix] = metrics->ap75;
    out[std::string("ap_") + suffix] = metrics->ap;
    nlohmann::json per_class = nlohmann::json::object();
    for (const auto& [id, ap] : metrics->per_class_ap50) per_class[std::to_string(id)] = ap;
    out[std::string("per_class_ap50_") + suffix] = per_class;
}

} // namespace

std::string EvalReport::to_json() const {
    nlohmann::json out;
    metrics_to_json(out, "rgb", rgb ? &*rgb : nullptr);
    metrics_to_json(out, "ir", ir ? &*ir : nullptr);
    metrics_to_json(out, "avg", &average);
    out["partial"] = partial;
    return out.dump(2);
}

std::string EvalReport::csv_header() const {
    return "ap50_rgb,ap50_ir,ap50_avg,ap75_rgb,ap75_ir,ap75_avg,ap_rgb,ap_ir,ap_avg";
}

std::string EvalReport::csv_row() const {
    std::ostringstream os;
    os.precision(17);
    auto cell = [&os](const ModalityMetrics* m, double ModalityMetrics::*field, bool last = false) {
        if (m) os << m->*field;
        if (!last) os << ',';
    };
    const ModalityMetrics* r = rgb ? &*rgb : nullptr;
    const ModalityMetrics* i = ir ? &*ir : nullptr;
    cell(r, &ModalityMetrics::ap50);
    cell(i, &ModalityMetrics::ap50);
    cell(&average, &ModalityMetrics::ap50);
    cell(r, &ModalityMetrics::ap75);
    cell(i, &ModalityMetrics::ap75);
    cell(&average, &ModalityMetrics::ap75);
    cell(r, &ModalityMetrics::ap);
    cell(i, &ModalityMetrics::ap);
    cell(&average, &ModalityMetrics::ap, true);
    return os.str();
}

} // namespace mipa

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mipa/det_head.hpp"

namespace mipa {

double iou(const BoundingBox& a, const BoundingBox& b);

// Per-IoU-threshold metrics for one modality. `ap` is the mean over the COCO
// threshold grid 0.50:0.05:0.95; per_class_ap50 keeps the class breakdown at
// IoU 0.5.
struct ModalityMetrics {
    double ap50 = 0.0;
    double ap75 = 0.0;
    double ap = 0.0;
    std::map<int, double> per_class_ap50;
};

struct EvalReport {
    std::optional<ModalityMetrics> rgb;
    std::optional<ModalityMetrics> ir;
    ModalityMetrics average; // arithmetic mean of the two modality rows
    bool partial = false;    // set when a modality is missing

    std::string to_json() const;
    std::string csv_header() const;
    std::string csv_row() const;
};

// Mean AP over classes at one IoU threshold. Greedy score-descending
// matching, one GT used at most once per image, 101-point interpolated
// precision-recall integration. Classes without GT and without predictions
// are excluded; classes with predictions but no GT score 0.
double average_precision(const std::vector<DetectionSet>& preds,
                         const std::vector<DetectionSet>& gts,
                         double iou_threshold);

// Class breakdown at one threshold (same matching rules).
std::map<int, double> average_precision_per_class(const std::vector<DetectionSet>& preds,
                                                  const std::vector<DetectionSet>& gts,
                                                  double iou_threshold);

ModalityMetrics evaluate_modality(const std::vector<DetectionSet>& preds,
                                  const std::vector<DetectionSet>& gts);

// Either prediction list may be null; the report is then marked partial.
EvalReport build_report(const std::vector<DetectionSet>* preds_rgb,
                        const std::vector<DetectionSet>* preds_ir,
                        const std::vector<DetectionSet>& gts);

} // namespace mipa

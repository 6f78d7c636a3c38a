#pragma once

#include <cstdint>
#include <vector>

#include "mipa/nn/encoder.hpp"
#include "mipa/nn/layers.hpp"

namespace mipa {

// Box in normalized image coordinates: center (cx, cy), extents (w, h),
// all in [0, 1]. `score` is meaningful for predictions only.
struct BoundingBox {
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;
    int class_id = 0;
    double score = 1.0;
};

struct DetectionSet {
    std::vector<BoundingBox> boxes;
    std::int64_t image_id = 0;
};

// Per-token supervision produced by the center-cell assignment.
struct TokenTargets {
    Matrix class_targets;               // n x num_classes, entries in {0, 1}
    Matrix box_targets;                 // n x 4 (cx, cy, w, h), valid on positives
    std::vector<std::uint8_t> positive; // n
    int num_positive = 0;
};

struct DetectionLoss {
    double classification = 0.0;
    double regression = 0.0;
    double total = 0.0; // classification + lambda_reg * regression
};

// Anchor-free head: one linear projection of final tokens to
// num_classes class logits plus 4 box logits per token.
class DetHead {
public:
    DetHead() = default;
    DetHead(int feature_dim, int num_classes);

    void init(std::uint64_t seed, double stddev = 0.02, double class_bias_prior = -2.0);

    // Raw per-token outputs, n x (num_classes + 4).
    Matrix forward(const nn::TokenMap& final_tokens);
    Matrix backward(const Matrix& d_raw);
    void collect(nn::ParamRefs& out);

    int num_classes() const { return num_classes_; }

    nn::Linear head;

private:
    int feature_dim_ = 0;
    int num_classes_ = 0;
};

// The token cell containing each GT center becomes positive for that class;
// when two GT centers land in one cell the larger-area box wins.
TokenTargets assign_targets(const DetectionSet& gt, int grid_h, int grid_w, int num_classes);

// L_d = L_c + lambda_reg * L_r. L_c is mean BCE over all tokens and classes,
// L_r mean squared error over the 4 box values of positive tokens (0 when no
// positives). Rejects non-finite head outputs.
DetectionLoss detection_loss(const Matrix& raw, const TokenTargets& targets, double lambda_reg);
// Gradient of detection_loss with respect to the raw head outputs.
Matrix detection_loss_backward(const Matrix& raw, const TokenTargets& targets, double lambda_reg);

// Decode raw outputs into score-thresholded, per-class NMS-filtered boxes.
DetectionSet predict(const Matrix& raw, int num_classes, double score_threshold,
                     double nms_iou, std::int64_t image_id);

// Greedy per-class non-maximum suppression; keeps the highest-scored box of
// any overlapping group (IoU strictly above the threshold suppresses).
std::vector<BoundingBox> nms(std::vector<BoundingBox> boxes, double iou_threshold);

// Newline-delimited prediction records for offline evaluation:
// image_id class_id score cx cy w h
void write_prediction_dump(const std::string& path, const std::vector<DetectionSet>& sets);
std::vector<DetectionSet> read_prediction_dump(const std::string& path);

} // namespace mipa

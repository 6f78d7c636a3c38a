#include "mipa/det_head.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "mipa/evalkit.hpp"

namespace mipa {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
constexpr double kProbClamp = 1e-7;

} // namespace

DetHead::DetHead(int feature_dim, int num_classes)
    : feature_dim_(feature_dim), num_classes_(num_classes) {
    if (num_classes < 1) throw std::invalid_argument("det head: need at least one class");
    head.setup("det.head", feature_dim, num_classes + 4);
}

void DetHead::init(std::uint64_t seed, double stddev, double class_bias_prior) {
    head.init(seed, stddev);
    // Bias class logits low so the untrained head starts near-silent.
    for (int c = 0; c < num_classes_; ++c) head.bias.value(0, c) = class_bias_prior;
}

Matrix DetHead::forward(const nn::TokenMap& final_tokens) {
    if (final_tokens.tokens.cols() != feature_dim_)
        throw std::invalid_argument("det head: feature dim mismatch");
    return head.forward(final_tokens.tokens);
}

Matrix DetHead::backward(const Matrix& d_raw) {
    return head.backward(d_raw);
}

void DetHead::collect(nn::ParamRefs& out) {
    head.collect(out);
}

TokenTargets assign_targets(const DetectionSet& gt, int grid_h, int grid_w, int num_classes) {
    const int n = grid_h * grid_w;
    TokenTargets targets;
    targets.class_targets = Matrix::Zero(n, num_classes);
    targets.box_targets = Matrix::Zero(n, 4);
    targets.positive.assign(static_cast<std::size_t>(n), 0);

    std::vector<double> winning_area(static_cast<std::size_t>(n), -1.0);
    for (const BoundingBox& box : gt.boxes) {
        const int col = std::min(grid_w - 1, std::max(0, static_cast<int>(std::floor(box.cx * grid_w))));
        const int row = std::min(grid_h - 1, std::max(0, static_cast<int>(std::floor(box.cy * grid_h))));
        const int cell = row * grid_w + col;
        const double area = box.w * box.h;
        if (area <= winning_area[static_cast<std::size_t>(cell)]) continue;

        winning_area[static_cast<std::size_t>(cell)] = area;
        targets.class_targets.row(cell).setZero();
        targets.class_targets(cell, box.class_id) = 1.0;
        targets.box_targets(cell, 0) = box.cx;
        targets.box_targets(cell, 1) = box.cy;
        targets.box_targets(cell, 2) = box.w;
        targets.box_targets(cell, 3) = box.h;
        targets.positive[static_cast<std::size_t>(cell)] = 1;
    }
    for (std::uint8_t flag : targets.positive) targets.num_positive += flag;
    return targets;
}

DetectionLoss detection_loss(const Matrix& raw, const TokenTargets& targets, double lambda_reg) {
    if (!raw.allFinite())
        throw std::invalid_argument("detection_loss: non-finite head outputs");
    const int n = static_cast<int>(raw.rows());
    const int num_classes = static_cast<int>(targets.class_targets.cols());
    if (raw.cols() != num_classes + 4 || targets.class_targets.rows() != n)
        throw std::invalid_argument("detection_loss: shape mismatch between outputs and targets");

    double bce_sum = 0.0;
    for (int t = 0; t < n; ++t) {
        for (int c = 0; c < num_classes; ++c) {
            const double p = std::clamp(sigmoid(raw(t, c)), kProbClamp, 1.0 - kProbClamp);
            const double y = targets.class_targets(t, c);
            bce_sum += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
        }
    }

    double sq_sum = 0.0;
    for (int t = 0; t < n; ++t) {
        if (!targets.positive[static_cast<std::size_t>(t)]) continue;
        for (int k = 0; k < 4; ++k) {
            const double diff = sigmoid(raw(t, num_classes + k)) - targets.box_targets(t, k);
            sq_sum += diff * diff;
        }
    }

    DetectionLoss loss;
    loss.classification = bce_sum / (static_cast<double>(n) * num_classes);
    loss.regression = targets.num_positive > 0 ? sq_sum / (4.0 * targets.num_positive) : 0.0;
    loss.total = loss.classification + lambda_reg * loss.regression;
    return loss;
}

Matrix detection_loss_backward(const Matrix& raw, const TokenTargets& targets, double lambda_reg) {
    const int n = static_cast<int>(raw.rows());
    const int num_classes = static_cast<int>(targets.class_targets.cols());
    Matrix d_raw = Matrix::Zero(n, num_classes + 4);

    const double inv_cls = 1.0 / (static_cast<double>(n) * num_classes);
    for (int t = 0; t < n; ++t)
        for (int c = 0; c < num_classes; ++c)
            d_raw(t, c) = (sigmoid(raw(t, c)) - targets.class_targets(t, c)) * inv_cls;

    if (targets.num_positive > 0) {
        const double scale = lambda_reg * 2.0 / (4.0 * targets.num_positive);
        for (int t = 0; t < n; ++t) {
            if (!targets.positive[static_cast<std::size_t>(t)]) continue;
            for (int k = 0; k < 4; ++k) {
                const double s = sigmoid(raw(t, num_classes + k));
                d_raw(t, num_classes + k) = scale * (s - targets.box_targets(t, k)) * s * (1.0 - s);
            }
        }
    }
    return d_raw;
}

std::vector<BoundingBox> nms(std::vector<BoundingBox> boxes, double iou_threshold) {
    std::stable_sort(boxes.begin(), boxes.end(),
                     [](const BoundingBox& a, const BoundingBox& b) { return a.score > b.score; });
    std::vector<BoundingBox> kept;
    for (const BoundingBox& candidate : boxes) {
        bool suppressed = false;
        for (const BoundingBox& keeper : kept) {
            if (keeper.class_id == candidate.class_id && iou(keeper, candidate) > iou_threshold) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(candidate);
    }
    return kept;
}

void write_prediction_dump(const std::string& path, const std::vector<DetectionSet>& sets) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write prediction dump " + path);
    char line[200];
    for (const DetectionSet& set : sets)
        for (const BoundingBox& box : set.boxes) {
            std::snprintf(line, sizeof(line), "%lld %d %.17g %.17g %.17g %.17g %.17g\n",
                          static_cast<long long>(set.image_id), box.class_id, box.score, box.cx,
                          box.cy, box.w, box.h);
            out << line;
        }
}

std::vector<DetectionSet> read_prediction_dump(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read prediction dump " + path);
    std::vector<DetectionSet> sets;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream fields(line);
        long long image_id = 0;
        BoundingBox box;
        if (!(fields >> image_id >> box.class_id >> box.score >> box.cx >> box.cy >> box.w >> box.h))
            throw std::runtime_error("malformed prediction dump line: " + line);
        if (sets.empty() || sets.back().image_id != image_id) {
            DetectionSet set;
            set.image_id = image_id;
            sets.push_back(set);
        }
        sets.back().boxes.push_back(box);
    }
    return sets;
}

DetectionSet predict(const Matrix& raw, int num_classes, double score_threshold,
                     double nms_iou, std::int64_t image_id) {
    std::vector<BoundingBox> candidates;
    const int n = static_cast<int>(raw.rows());
    for (int t = 0; t < n; ++t) {
        BoundingBox box;
        box.cx = sigmoid(raw(t, num_classes + 0));
        box.cy = sigmoid(raw(t, num_classes + 1));
        box.w = sigmoid(raw(t, num_classes + 2));
        box.h = sigmoid(raw(t, num_classes + 3));
        for (int c = 0; c < num_classes; ++c) {
            const double score = sigmoid(raw(t, c));
            if (score < score_threshold) continue;
            BoundingBox scored = box;
            scored.class_id = c;
            scored.score = score;
            candidates.push_back(scored);
        }
    }
    DetectionSet result;
    result.image_id = image_id;
    result.boxes = nms(std::move(candidates), nms_iou);
    return result;
}

} // namespace mipa

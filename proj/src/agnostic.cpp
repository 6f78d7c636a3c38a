#include "mipa/agnostic.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mipa {

double lambda_schedule(double gamma, double s) {
    if (!(gamma > 0.0))
        throw std::invalid_argument("lambda_schedule: gamma must be positive, got " + std::to_string(gamma));
    return 2.0 / (1.0 + std::exp(-gamma * s)) - 1.0;
}

Matrix grl_forward(const Matrix& features, const GrlGate&) {
    return features;
}

Matrix grl_backward_contract(const Matrix& upstream_grad, const GrlGate& gate) {
    return (-gate.lambda_ma) * upstream_grad;
}

ModalityClassifier::ModalityClassifier(int feature_dim) : feature_dim_(feature_dim) {
    head.setup("ma.cls", feature_dim, 1);
}

void ModalityClassifier::init(std::uint64_t seed, double stddev) {
    head.init(seed, stddev);
}

ModalityMapPrediction ModalityClassifier::forward(const nn::TokenMap& stage_features) {
    if (stage_features.tokens.cols() != feature_dim_)
        throw std::invalid_argument("modality classifier: feature dim " +
                                    std::to_string(stage_features.tokens.cols()) +
                                    " does not match configured " + std::to_string(feature_dim_));
    if (stage_features.tokens.rows() != static_cast<long>(stage_features.grid_h) * stage_features.grid_w)
        throw std::invalid_argument("modality classifier: token count does not match grid dims");

    Matrix logits_col = head.forward(stage_features.tokens); // n x 1

    ModalityMapPrediction pred;
    pred.grid_h = stage_features.grid_h;
    pred.grid_w = stage_features.grid_w;
    pred.logits.resize(pred.grid_h, pred.grid_w);
    for (int r = 0; r < pred.grid_h; ++r)
        for (int c = 0; c < pred.grid_w; ++c)
            pred.logits(r, c) = logits_col(r * pred.grid_w + c, 0);
    pred.probabilities = pred.logits.unaryExpr([](double z) { return 1.0 / (1.0 + std::exp(-z)); });
    return pred;
}

Matrix ModalityClassifier::backward(const Matrix& d_logits) {
    Matrix d_col(d_logits.rows() * d_logits.cols(), 1);
    for (int r = 0; r < d_logits.rows(); ++r)
        for (int c = 0; c < d_logits.cols(); ++c)
            d_col(r * d_logits.cols() + c, 0) = d_logits(r, c);
    return head.backward(d_col);
}

void ModalityClassifier::collect(nn::ParamRefs& out) {
    head.collect(out);
}

BinaryMap pool_map_majority(const BinaryMap& map, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0 || map.h % out_h != 0 || map.w % out_w != 0)
        throw std::invalid_argument("pool_map_majority: map " + std::to_string(map.h) + "x" +
                                    std::to_string(map.w) + " not divisible into " +
                                    std::to_string(out_h) + "x" + std::to_string(out_w));
    const int cell_h = map.h / out_h;
    const int cell_w = map.w / out_w;
    const int cell = cell_h * cell_w;

    BinaryMap out;
    out.h = out_h;
    out.w = out_w;
    out.values.assign(static_cast<std::size_t>(out_h) * out_w, 0);
    for (int r = 0; r < out_h; ++r) {
        for (int c = 0; c < out_w; ++c) {
            int ones = 0;
            for (int dy = 0; dy < cell_h; ++dy)
                for (int dx = 0; dx < cell_w; ++dx)
                    ones += map.at(r * cell_h + dy, c * cell_w + dx);
            out.values[static_cast<std::size_t>(r) * out_w + c] = (2 * ones >= cell) ? 1 : 0;
        }
    }
    return out;
}

namespace {

void check_bce_shapes(const ModalityMapPrediction& prediction, const BinaryMap& target) {
    if (prediction.grid_h != target.h || prediction.grid_w != target.w)
        throw std::invalid_argument("modality_bce: prediction " + std::to_string(prediction.grid_h) +
                                    "x" + std::to_string(prediction.grid_w) + " vs target " +
                                    std::to_string(target.h) + "x" + std::to_string(target.w));
}

} // namespace

double modality_bce(const ModalityMapPrediction& prediction, const BinaryMap& target) {
    check_bce_shapes(prediction, target);
    const int n = target.count();
    double sum = 0.0;
    for (int r = 0; r < target.h; ++r) {
        for (int c = 0; c < target.w; ++c) {
            const double p = std::clamp(prediction.probabilities(r, c), kBceClamp, 1.0 - kBceClamp);
            const double m = static_cast<double>(target.at(r, c));
            sum += -(m * std::log(p) + (1.0 - m) * std::log(1.0 - p));
        }
    }
    return sum / n;
}

Matrix modality_bce_backward(const ModalityMapPrediction& prediction, const BinaryMap& target) {
    check_bce_shapes(prediction, target);
    const double inv_n = 1.0 / target.count();
    Matrix d_logits(target.h, target.w);
    for (int r = 0; r < target.h; ++r)
        for (int c = 0; c < target.w; ++c)
            d_logits(r, c) = (prediction.probabilities(r, c) - static_cast<double>(target.at(r, c))) * inv_n;
    return d_logits;
}

double total_loss(double l_det, double l_ma, double lambda_ma) {
    if (!std::isfinite(l_det) || !std::isfinite(l_ma) || !std::isfinite(lambda_ma))
        throw std::invalid_argument("total_loss: non-finite input");
    return l_det + lambda_ma * l_ma;
}

} // namespace mipa

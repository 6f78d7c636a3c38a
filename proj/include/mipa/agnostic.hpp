#pragma once

#include "mipa/mosaic.hpp"
#include "mipa/nn/encoder.hpp"
#include "mipa/nn/layers.hpp"

namespace mipa {

// Ramp weight for the reversed gradients: lambda = 2 / (1 + exp(-gamma*s)) - 1
// with s the normalized training progress in [0, 1].
double lambda_schedule(double gamma, double s);

// Gradient reversal gate. Forward is the identity; backward multiplies the
// upstream gradient by -lambda_ma. Driving the gate from the schedule keeps
// lambda_ma == lambda_schedule(gamma, step_fraction).
struct GrlGate {
    double lambda_ma = 0.0;
    double gamma = 1.0;
    double step_fraction = 0.0;

    void update(double s) {
        step_fraction = s;
        lambda_ma = lambda_schedule(gamma, s);
    }
};

Matrix grl_forward(const Matrix& features, const GrlGate& gate);
Matrix grl_backward_contract(const Matrix& upstream_grad, const GrlGate& gate);

// Per-location logits over a token map plus their sigmoid probabilities.
struct ModalityMapPrediction {
    Matrix logits;        // grid_h x grid_w
    Matrix probabilities; // sigmoid(logits)
    int grid_h = 0;
    int grid_w = 0;
};

// Single per-location linear projection of stage features to one logit.
// No cross-location mixing: each spatial position is classified on its own.
class ModalityClassifier {
public:
    ModalityClassifier() = default;
    explicit ModalityClassifier(int feature_dim);

    void init(std::uint64_t seed, double stddev = 0.02);

    ModalityMapPrediction forward(const nn::TokenMap& stage_features);
    // d_logits laid out like the prediction map; returns the gradient with
    // respect to the stage feature tokens (before any reversal).
    Matrix backward(const Matrix& d_logits);
    void collect(nn::ParamRefs& out);

    nn::Linear head;

private:
    int feature_dim_ = 0;
};

// Majority-pool a binary map down to (out_h, out_w); exact ties go to 1 (IR).
// Used when the classifier operates at a coarser resolution than the patch
// grid. Requires integer cell sizes.
BinaryMap pool_map_majority(const BinaryMap& map, int out_h, int out_w);

// Mean binary cross-entropy between the predicted map and the binary target,
// probabilities clamped to [eps, 1-eps] before the log.
double modality_bce(const ModalityMapPrediction& prediction, const BinaryMap& target);
// Gradient of modality_bce with respect to the logits.
Matrix modality_bce_backward(const ModalityMapPrediction& prediction, const BinaryMap& target);

constexpr double kBceClamp = 1e-7;

// l_det + lambda_ma * l_ma; rejects non-finite inputs.
double total_loss(double l_det, double l_ma, double lambda_ma);

} // namespace mipa

#pragma once

#include <cstdint>

#include "mipa/agnostic.hpp"
#include "mipa/det_head.hpp"
#include "mipa/nn/encoder.hpp"

namespace mipa {

struct ModelConfig {
    nn::EncoderConfig encoder;
    int image_h = 24;
    int image_w = 24;
    int channels = 3;
    int num_classes = 2;
    double class_bias_prior = -2.0;

    int grid_h() const { return image_h / encoder.patch_size; }
    int grid_w() const { return image_w / encoder.patch_size; }
    void validate() const;
};

// The shared vision encoder with its two heads. The same parameter set
// processes pure-RGB, pure-IR and mosaic inputs; nothing in the forward path
// branches on modality.
class Model {
public:
    Model() = default;
    explicit Model(const ModelConfig& config);

    void init(std::uint64_t seed);

    struct StepLosses {
        DetectionLoss det;
        double l_ma = 0.0;
        bool has_ma = false;
    };

    // Forward + backward for one image at batch-mean scale `loss_scale`
    // (1/batch). `modality_target` enables the adversarial branch;
    // `grl_scale` is the factor applied to the classifier's feature gradient
    // before it joins the encoder (normally -lambda_ma; exactly 0 skips the
    // branch gradient entirely).
    StepLosses train_step(const PatchGrid& input, const TokenTargets& targets,
                          const BinaryMap* modality_target, double lambda_reg,
                          double grl_scale, double loss_scale);

    // Backward only the modality branch (no detection gradient). Returns the
    // BCE loss; used by the gradient-identity checks.
    double modality_only_step(const PatchGrid& input, const BinaryMap& modality_target,
                              double grl_scale, double loss_scale = 1.0);

    DetectionSet infer(const Image& image, double score_threshold, double nms_iou,
                       std::int64_t image_id);
    DetectionSet infer(const PatchGrid& grid, double score_threshold, double nms_iou,
                       std::int64_t image_id);

    nn::ParamRefs params();
    void zero_grad();

    const ModelConfig& config() const { return config_; }
    nn::Encoder& encoder() { return encoder_; }
    DetHead& det_head() { return det_; }
    ModalityClassifier& classifier() { return cls_; }

private:
    ModelConfig config_;
    nn::Encoder encoder_;
    DetHead det_;
    ModalityClassifier cls_;
};

} // namespace mipa

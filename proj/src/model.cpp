#include "mipa/model.hpp"

#include <stdexcept>
#include <string>

namespace mipa {

void ModelConfig::validate() const {
    encoder.validate();
    if (channels != 3)
        throw std::invalid_argument("model: both modalities are presented as 3-channel images");
    if (num_classes < 1)
        throw std::invalid_argument("model: need at least one class");
    if (image_h % encoder.patch_size != 0 || image_w % encoder.patch_size != 0)
        throw std::invalid_argument("model: image " + std::to_string(image_h) + "x" +
                                    std::to_string(image_w) + " not divisible by patch size " +
                                    std::to_string(encoder.patch_size));
}

Model::Model(const ModelConfig& config) : config_(config) {
    config_.validate();
    encoder_ = nn::Encoder(config_.encoder, config_.grid_h(), config_.grid_w(), config_.channels);
    det_ = DetHead(config_.encoder.embed_dim, config_.num_classes);
    cls_ = ModalityClassifier(config_.encoder.embed_dim);
}

void Model::init(std::uint64_t seed) {
    encoder_.init(seed);
    det_.init(seed, 0.02, config_.class_bias_prior);
    cls_.init(seed);
}

Model::StepLosses Model::train_step(const PatchGrid& input, const TokenTargets& targets,
                                    const BinaryMap* modality_target, double lambda_reg,
                                    double grl_scale, double loss_scale) {
    auto [stage1, final_map] = encoder_.encode(input);
    const Matrix raw = det_.forward(final_map);

    StepLosses losses;
    losses.det = detection_loss(raw, targets, lambda_reg);
    const Matrix d_raw = loss_scale * detection_loss_backward(raw, targets, lambda_reg);
    const Matrix d_final = det_.backward(d_raw);

    Matrix d_stage1;
    if (modality_target) {
        losses.has_ma = true;
        ModalityMapPrediction pred = cls_.forward(stage1);
        losses.l_ma = modality_bce(pred, *modality_target);
        const Matrix d_logits = loss_scale * modality_bce_backward(pred, *modality_target);
        const Matrix d_features = cls_.backward(d_logits);
        if (grl_scale != 0.0) d_stage1 = grl_scale * d_features;
    }
    encoder_.backward(d_final, d_stage1);
    return losses;
}

double Model::modality_only_step(const PatchGrid& input, const BinaryMap& modality_target,
                                 double grl_scale, double loss_scale) {
    auto [stage1, final_map] = encoder_.encode(input);
    ModalityMapPrediction pred = cls_.forward(stage1);
    const double l_ma = modality_bce(pred, modality_target);

    const Matrix d_logits = loss_scale * modality_bce_backward(pred, modality_target);
    const Matrix d_features = cls_.backward(d_logits);
    const Matrix d_stage1 = grl_scale * d_features;
    const Matrix d_final = Matrix::Zero(final_map.tokens.rows(), final_map.tokens.cols());
    encoder_.backward(d_final, d_stage1);
    return l_ma;
}

DetectionSet Model::infer(const Image& image, double score_threshold, double nms_iou,
                          std::int64_t image_id) {
    return infer(patchify(image, config_.encoder.patch_size), score_threshold, nms_iou, image_id);
}

DetectionSet Model::infer(const PatchGrid& grid, double score_threshold, double nms_iou,
                          std::int64_t image_id) {
    auto [stage1, final_map] = encoder_.encode(grid);
    const Matrix raw = det_.forward(final_map);
    return predict(raw, config_.num_classes, score_threshold, nms_iou, image_id);
}

nn::ParamRefs Model::params() {
    nn::ParamRefs refs;
    encoder_.collect(refs);
    det_.collect(refs);
    cls_.collect(refs);
    return refs;
}

void Model::zero_grad() {
    for (nn::Parameter* p : params()) p->zero_grad();
}

} // namespace mipa

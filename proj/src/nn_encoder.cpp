#include "mipa/nn/encoder.hpp"

#include <stdexcept>
#include <string>

namespace mipa::nn {

void EncoderConfig::validate() const {
    if (patch_size <= 0) throw std::invalid_argument("encoder: patch_size must be positive");
    if (embed_dim <= 0) throw std::invalid_argument("encoder: embed_dim must be positive");
    if (num_heads <= 0 || embed_dim % num_heads != 0)
        throw std::invalid_argument("encoder: embed_dim must be divisible by num_heads");
    if (stage_depths.empty())
        throw std::invalid_argument("encoder: stage_depths must be non-empty");
    for (int d : stage_depths)
        if (d < 1) throw std::invalid_argument("encoder: every stage depth must be >= 1");
    if (mlp_ratio <= 0.0) throw std::invalid_argument("encoder: mlp_ratio must be positive");
}

Encoder::Encoder(const EncoderConfig& config, int grid_h, int grid_w, int channels)
    : config_(config), grid_h_(grid_h), grid_w_(grid_w) {
    config_.validate();
    if (grid_h <= 0 || grid_w <= 0)
        throw std::invalid_argument("encoder: patch grid must be non-empty");
    if (config_.downsample_between_stages && config_.stage_depths.size() > 1 &&
        (grid_h % 2 != 0 || grid_w % 2 != 0))
        throw std::invalid_argument("encoder: grid " + std::to_string(grid_h) + "x" +
                                    std::to_string(grid_w) + " must have even axes to downsample");

    const int patch_dim = config_.patch_size * config_.patch_size * channels;
    embed_.setup("enc.embed", patch_dim, config_.embed_dim, grid_h, grid_w);

    pre_.resize(static_cast<std::size_t>(config_.stage_depths[0]));
    for (std::size_t i = 0; i < pre_.size(); ++i)
        pre_[i].setup("enc.pre" + std::to_string(i), config_.embed_dim, config_.num_heads, config_.mlp_ratio);

    int post_depth = 0;
    for (std::size_t s = 1; s < config_.stage_depths.size(); ++s) post_depth += config_.stage_depths[s];
    post_.resize(static_cast<std::size_t>(post_depth));
    for (std::size_t i = 0; i < post_.size(); ++i)
        post_[i].setup("enc.post" + std::to_string(i), config_.embed_dim, config_.num_heads, config_.mlp_ratio);

    const bool merges = config_.downsample_between_stages && !post_.empty();
    if (merges) merge_.setup("enc.merge", config_.embed_dim);
    final_grid_h_ = merges ? grid_h / 2 : grid_h;
    final_grid_w_ = merges ? grid_w / 2 : grid_w;

    norm_final_.setup("enc.norm", config_.embed_dim);
}

void Encoder::init(std::uint64_t seed, double stddev) {
    embed_.init(seed, stddev);
    for (auto& b : pre_) b.init(seed, stddev);
    if (final_grid_h_ != grid_h_) merge_.init(seed, stddev);
    for (auto& b : post_) b.init(seed, stddev);
}

std::pair<TokenMap, TokenMap> Encoder::encode(const PatchGrid& grid) {
    if (grid.grid_h != grid_h_ || grid.grid_w != grid_w_)
        throw std::invalid_argument("encoder: grid " + std::to_string(grid.grid_h) + "x" +
                                    std::to_string(grid.grid_w) + " does not match configured " +
                                    std::to_string(grid_h_) + "x" + std::to_string(grid_w_));

    Matrix x = embed_.forward(grid.patches);
    for (auto& b : pre_) x = b.forward(x);

    TokenMap stage1{x, grid_h_, grid_w_, 1};
    if (!stage1.tokens.allFinite())
        throw std::runtime_error("encoder: non-finite stage-1 activations");

    if (final_grid_h_ != grid_h_) x = merge_.forward(x, grid_h_, grid_w_);
    for (auto& b : post_) x = b.forward(x);
    x = norm_final_.forward(x);

    TokenMap final_map{std::move(x), final_grid_h_, final_grid_w_, 2};
    if (!final_map.tokens.allFinite())
        throw std::runtime_error("encoder: non-finite final activations");
    return {std::move(stage1), std::move(final_map)};
}

void Encoder::backward(const Matrix& d_final, const Matrix& d_stage1) {
    Matrix d = norm_final_.backward(d_final);
    for (auto it = post_.rbegin(); it != post_.rend(); ++it) d = it->backward(d);
    if (final_grid_h_ != grid_h_) d = merge_.backward(d);
    if (d_stage1.size() > 0) d += d_stage1;
    for (auto it = pre_.rbegin(); it != pre_.rend(); ++it) d = it->backward(d);
    embed_.backward(d);
}

void Encoder::collect(ParamRefs& out) {
    embed_.collect(out);
    for (auto& b : pre_) b.collect(out);
    if (final_grid_h_ != grid_h_) merge_.collect(out);
    for (auto& b : post_) b.collect(out);
    norm_final_.collect(out);
}

} // namespace mipa::nn

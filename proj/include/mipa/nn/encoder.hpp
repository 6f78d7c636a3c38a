#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "mipa/nn/layers.hpp"

namespace mipa::nn {

struct EncoderConfig {
    int patch_size = 4;
    int embed_dim = 64;
    std::vector<int> stage_depths = {2, 2};
    int num_heads = 4;
    double mlp_ratio = 2.0;
    bool downsample_between_stages = true;

    void validate() const;
};

// Token grid at some stage of the encoder. Rows of `tokens` are laid out
// row-major over (grid_h, grid_w).
struct TokenMap {
    Matrix tokens;
    int grid_h = 0;
    int grid_w = 0;
    int stage_index = 0;
};

// Two-stage patch-transformer encoder, shared across modalities. Stage-1
// output (before the optional merge) feeds the modality classifier; the
// final normalized tokens feed the detection head.
class Encoder {
public:
    Encoder() = default;
    Encoder(const EncoderConfig& config, int grid_h, int grid_w, int channels);

    void init(std::uint64_t seed, double stddev = 0.02);

    std::pair<TokenMap, TokenMap> encode(const PatchGrid& grid);

    // d_stage1 may be empty (no modality branch). Accumulates parameter
    // gradients for the whole encoder including the patch embedding.
    void backward(const Matrix& d_final, const Matrix& d_stage1);

    void collect(ParamRefs& out);

    const EncoderConfig& config() const { return config_; }
    int grid_h() const { return grid_h_; }
    int grid_w() const { return grid_w_; }
    int final_grid_h() const { return final_grid_h_; }
    int final_grid_w() const { return final_grid_w_; }

    // Test access.
    PatchEmbed& embed() { return embed_; }
    std::vector<Block>& stage1_blocks() { return pre_; }
    std::vector<Block>& stage2_blocks() { return post_; }

private:
    EncoderConfig config_;
    int grid_h_ = 0;
    int grid_w_ = 0;
    int final_grid_h_ = 0;
    int final_grid_w_ = 0;

    PatchEmbed embed_;
    std::vector<Block> pre_;
    PatchMerge merge_;
    std::vector<Block> post_;
    LayerNorm norm_final_;
};

} // namespace mipa::nn

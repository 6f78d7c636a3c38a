#pragma once

#include <string>
#include <vector>

#include "mipa/nn/param.hpp"

namespace mipa::nn {

// All layers follow the same contract: forward caches whatever backward
// needs, backward accumulates into Parameter::grad and returns the gradient
// with respect to the layer input. Rows are tokens, columns are features.

class Linear {
public:
    void setup(const std::string& name, int in_dim, int out_dim);
    void init(std::uint64_t seed, double stddev);
    Matrix forward(const Matrix& x);
    Matrix backward(const Matrix& d_out);
    void collect(ParamRefs& out);

    Parameter weight; // in_dim x out_dim
    Parameter bias;   // 1 x out_dim

private:
    Matrix x_;
};

class LayerNorm {
public:
    void setup(const std::string& name, int dim);
    Matrix forward(const Matrix& x);
    Matrix backward(const Matrix& d_out);
    void collect(ParamRefs& out);

    Parameter gain; // 1 x dim
    Parameter bias; // 1 x dim
    static constexpr double kEps = 1e-5;

private:
    Matrix x_hat_;
    Eigen::VectorXd inv_std_;
};

// Pre-norm multi-head self-attention with a fused QKV projection.
class SelfAttention {
public:
    void setup(const std::string& name, int dim, int num_heads);
    void init(std::uint64_t seed, double stddev);
    Matrix forward(const Matrix& x);
    Matrix backward(const Matrix& d_out);
    void collect(ParamRefs& out);

    // Softmax rows of the most recent forward, one matrix per head.
    const std::vector<Matrix>& attention_weights() const { return probs_; }

    Linear qkv;
    Linear out;

private:
    int dim_ = 0;
    int num_heads_ = 0;
    int head_dim_ = 0;
    Matrix qkv_;
    std::vector<Matrix> probs_;
};

class Mlp {
public:
    void setup(const std::string& name, int dim, int hidden_dim);
    void init(std::uint64_t seed, double stddev);
    Matrix forward(const Matrix& x);
    Matrix backward(const Matrix& d_out);
    void collect(ParamRefs& out);

    Linear fc1;
    Linear fc2;

private:
    Matrix pre_act_;
};

// Pre-norm transformer block: x + SA(LN(x)), then a + MLP(LN(a)).
class Block {
public:
    void setup(const std::string& name, int dim, int num_heads, double mlp_ratio);
    void init(std::uint64_t seed, double stddev);
    Matrix forward(const Matrix& x);
    Matrix backward(const Matrix& d_out);
    void collect(ParamRefs& out);

    LayerNorm ln1;
    SelfAttention attn;
    LayerNorm ln2;
    Mlp mlp;
};

// 2x2 patch merging: concatenates each 2x2 token neighbourhood, normalizes,
// and projects back to the embedding dim. Halves both grid axes.
class PatchMerge {
public:
    void setup(const std::string& name, int dim);
    void init(std::uint64_t seed, double stddev);
    Matrix forward(const Matrix& x, int grid_h, int grid_w);
    Matrix backward(const Matrix& d_out);
    void collect(ParamRefs& out);

    LayerNorm norm; // over 4*dim
    Linear reduce;  // 4*dim -> dim

private:
    int grid_h_ = 0;
    int grid_w_ = 0;
    int dim_ = 0;
};

// Per-patch linear projection plus a learned 2-D positional term.
class PatchEmbed {
public:
    void setup(const std::string& name, int patch_dim, int embed_dim, int grid_h, int grid_w);
    void init(std::uint64_t seed, double stddev);
    // Projection only, before the positional term is added.
    Matrix project(const Matrix& patches);
    Matrix forward(const Matrix& patches);
    Matrix backward(const Matrix& d_out);
    void collect(ParamRefs& out);

    Linear proj;
    Parameter pos; // (grid_h * grid_w) x embed_dim
};

} // namespace mipa::nn

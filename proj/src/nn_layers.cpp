#include "mipa/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace mipa::nn {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
    return cdf + x * pdf;
}

} // namespace

// ---------------------------------------------------------------- Linear

void Linear::setup(const std::string& name, int in_dim, int out_dim) {
    weight.setup(name + ".w", in_dim, out_dim);
    bias.setup(name + ".b", 1, out_dim);
}

void Linear::init(std::uint64_t seed, double stddev) {
    weight.fill_normal(seed, stddev);
    bias.value.setZero();
}

Matrix Linear::forward(const Matrix& x) {
    x_ = x;
    Matrix y = x * weight.value;
    y.rowwise() += bias.value.row(0);
    return y;
}

Matrix Linear::backward(const Matrix& d_out) {
    weight.grad.noalias() += x_.transpose() * d_out;
    bias.grad.row(0) += d_out.colwise().sum();
    return d_out * weight.value.transpose();
}

void Linear::collect(ParamRefs& out) {
    out.push_back(&weight);
    out.push_back(&bias);
}

// -------------------------------------------------------------- LayerNorm

void LayerNorm::setup(const std::string& name, int dim) {
    gain.setup(name + ".g", 1, dim);
    bias.setup(name + ".b", 1, dim);
    gain.value.setOnes();
}

Matrix LayerNorm::forward(const Matrix& x) {
    const int rows = static_cast<int>(x.rows());
    const int dim = static_cast<int>(x.cols());
    x_hat_.resize(rows, dim);
    inv_std_.resize(rows);
    for (int r = 0; r < rows; ++r) {
        const double mean = x.row(r).mean();
        const double var = (x.row(r).array() - mean).square().mean();
        const double inv = 1.0 / std::sqrt(var + kEps);
        inv_std_(r) = inv;
        x_hat_.row(r) = (x.row(r).array() - mean) * inv;
    }
    Matrix y = x_hat_.array().rowwise() * gain.value.row(0).array();
    y.rowwise() += bias.value.row(0);
    return y;
}

Matrix LayerNorm::backward(const Matrix& d_out) {
    const int rows = static_cast<int>(d_out.rows());
    Matrix d_x(rows, d_out.cols());
    for (int r = 0; r < rows; ++r) {
        auto d_hat = (d_out.row(r).array() * gain.value.row(0).array()).eval();
        const double mean_d = d_hat.mean();
        const double mean_dx = (d_hat * x_hat_.row(r).array()).mean();
        d_x.row(r) = inv_std_(r) * (d_hat - mean_d - x_hat_.row(r).array() * mean_dx);
        gain.grad.row(0).array() += d_out.row(r).array() * x_hat_.row(r).array();
        bias.grad.row(0) += d_out.row(r);
    }
    return d_x;
}

void LayerNorm::collect(ParamRefs& out) {
    out.push_back(&gain);
    out.push_back(&bias);
}

// --------------------------------------------------------- SelfAttention

void SelfAttention::setup(const std::string& name, int dim, int num_heads) {
    if (num_heads <= 0 || dim % num_heads != 0)
        throw std::invalid_argument("attention: embed dim " + std::to_string(dim) +
                                    " not divisible by head count " + std::to_string(num_heads));
    dim_ = dim;
    num_heads_ = num_heads;
    head_dim_ = dim / num_heads;
    qkv.setup(name + ".qkv", dim, 3 * dim);
    out.setup(name + ".out", dim, dim);
}

void SelfAttention::init(std::uint64_t seed, double stddev) {
    qkv.init(seed, stddev);
    out.init(seed, stddev);
}

Matrix SelfAttention::forward(const Matrix& x) {
    const int n = static_cast<int>(x.rows());
    qkv_ = qkv.forward(x);
    probs_.assign(static_cast<std::size_t>(num_heads_), Matrix());

    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));
    Matrix concat(n, dim_);
    for (int h = 0; h < num_heads_; ++h) {
        auto q = qkv_.block(0, h * head_dim_, n, head_dim_);
        auto k = qkv_.block(0, dim_ + h * head_dim_, n, head_dim_);
        auto v = qkv_.block(0, 2 * dim_ + h * head_dim_, n, head_dim_);

        Matrix scores = (q * k.transpose()) * scale;
        Matrix& p = probs_[static_cast<std::size_t>(h)];
        p.resize(n, n);
        for (int r = 0; r < n; ++r) {
            const double row_max = scores.row(r).maxCoeff();
            p.row(r) = (scores.row(r).array() - row_max).exp();
            p.row(r) /= p.row(r).sum();
        }
        concat.block(0, h * head_dim_, n, head_dim_).noalias() = p * v;
    }
    return out.forward(concat);
}

Matrix SelfAttention::backward(const Matrix& d_out) {
    const int n = static_cast<int>(d_out.rows());
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));

    Matrix d_concat = out.backward(d_out);
    Matrix d_qkv = Matrix::Zero(n, 3 * dim_);
    for (int h = 0; h < num_heads_; ++h) {
        auto q = qkv_.block(0, h * head_dim_, n, head_dim_);
        auto k = qkv_.block(0, dim_ + h * head_dim_, n, head_dim_);
        auto v = qkv_.block(0, 2 * dim_ + h * head_dim_, n, head_dim_);
        const Matrix& p = probs_[static_cast<std::size_t>(h)];
        auto d_o = d_concat.block(0, h * head_dim_, n, head_dim_);

        Matrix d_p = d_o * v.transpose();
        Matrix d_scores(n, n);
        for (int r = 0; r < n; ++r) {
            const double dot = p.row(r).dot(d_p.row(r));
            d_scores.row(r) = p.row(r).array() * (d_p.row(r).array() - dot);
        }
        d_scores *= scale;

        d_qkv.block(0, h * head_dim_, n, head_dim_).noalias() = d_scores * k;
        d_qkv.block(0, dim_ + h * head_dim_, n, head_dim_).noalias() = d_scores.transpose() * q;
        d_qkv.block(0, 2 * dim_ + h * head_dim_, n, head_dim_).noalias() = p.transpose() * d_o;
    }
    return qkv.backward(d_qkv);
}

void SelfAttention::collect(ParamRefs& o) {
    qkv.collect(o);
    out.collect(o);
}

// -------------------------------------------------------------------- Mlp

void Mlp::setup(const std::string& name, int dim, int hidden_dim) {
    fc1.setup(name + ".fc1", dim, hidden_dim);
    fc2.setup(name + ".fc2", hidden_dim, dim);
}

void Mlp::init(std::uint64_t seed, double stddev) {
    fc1.init(seed, stddev);
    fc2.init(seed, stddev);
}

Matrix Mlp::forward(const Matrix& x) {
    pre_act_ = fc1.forward(x);
    Matrix h = pre_act_.unaryExpr([](double v) { return gelu(v); });
    return fc2.forward(h);
}

Matrix Mlp::backward(const Matrix& d_out) {
    Matrix d_h = fc2.backward(d_out);
    Matrix d_pre = d_h.array() * pre_act_.unaryExpr([](double v) { return gelu_grad(v); }).array();
    return fc1.backward(d_pre);
}

void Mlp::collect(ParamRefs& out) {
    fc1.collect(out);
    fc2.collect(out);
}

// ------------------------------------------------------------------ Block

void Block::setup(const std::string& name, int dim, int num_heads, double mlp_ratio) {
    const int hidden = std::max(1, static_cast<int>(std::lround(dim * mlp_ratio)));
    ln1.setup(name + ".ln1", dim);
    attn.setup(name + ".attn", dim, num_heads);
    ln2.setup(name + ".ln2", dim);
    mlp.setup(name + ".mlp", dim, hidden);
}

void Block::init(std::uint64_t seed, double stddev) {
    attn.init(seed, stddev);
    mlp.init(seed, stddev);
}

Matrix Block::forward(const Matrix& x) {
    Matrix a = x + attn.forward(ln1.forward(x));
    return a + mlp.forward(ln2.forward(a));
}

Matrix Block::backward(const Matrix& d_out) {
    Matrix d_a = d_out + ln2.backward(mlp.backward(d_out));
    return d_a + ln1.backward(attn.backward(d_a));
}

void Block::collect(ParamRefs& out) {
    ln1.collect(out);
    attn.collect(out);
    ln2.collect(out);
    mlp.collect(out);
}

// ------------------------------------------------------------- PatchMerge

void PatchMerge::setup(const std::string& name, int dim) {
    dim_ = dim;
    norm.setup(name + ".ln", 4 * dim);
    reduce.setup(name + ".reduce", 4 * dim, dim);
}

void PatchMerge::init(std::uint64_t seed, double stddev) {
    reduce.init(seed, stddev);
}

Matrix PatchMerge::forward(const Matrix& x, int grid_h, int grid_w) {
    if (grid_h % 2 != 0 || grid_w % 2 != 0)
        throw std::invalid_argument("patch merge: grid " + std::to_string(grid_h) + "x" +
                                    std::to_string(grid_w) + " must have even axes");
    grid_h_ = grid_h;
    grid_w_ = grid_w;

    const int out_h = grid_h / 2;
    const int out_w = grid_w / 2;
    Matrix concat(out_h * out_w, 4 * dim_);
    for (int oy = 0; oy < out_h; ++oy) {
        for (int ox = 0; ox < out_w; ++ox) {
            const int row = oy * out_w + ox;
            const int base_y = 2 * oy;
            const int base_x = 2 * ox;
            concat.block(row, 0, 1, dim_) = x.row(base_y * grid_w + base_x);
            concat.block(row, dim_, 1, dim_) = x.row(base_y * grid_w + base_x + 1);
            concat.block(row, 2 * dim_, 1, dim_) = x.row((base_y + 1) * grid_w + base_x);
            concat.block(row, 3 * dim_, 1, dim_) = x.row((base_y + 1) * grid_w + base_x + 1);
        }
    }
    return reduce.forward(norm.forward(concat));
}

Matrix PatchMerge::backward(const Matrix& d_out) {
    Matrix d_concat = norm.backward(reduce.backward(d_out));
    const int out_h = grid_h_ / 2;
    const int out_w = grid_w_ / 2;
    Matrix d_x = Matrix::Zero(grid_h_ * grid_w_, dim_);
    for (int oy = 0; oy < out_h; ++oy) {
        for (int ox = 0; ox < out_w; ++ox) {
            const int row = oy * out_w + ox;
            const int base_y = 2 * oy;
            const int base_x = 2 * ox;
            d_x.row(base_y * grid_w_ + base_x) = d_concat.block(row, 0, 1, dim_);
            d_x.row(base_y * grid_w_ + base_x + 1) = d_concat.block(row, dim_, 1, dim_);
            d_x.row((base_y + 1) * grid_w_ + base_x) = d_concat.block(row, 2 * dim_, 1, dim_);
            d_x.row((base_y + 1) * grid_w_ + base_x + 1) = d_concat.block(row, 3 * dim_, 1, dim_);
        }
    }
    return d_x;
}

void PatchMerge::collect(ParamRefs& out) {
    norm.collect(out);
    reduce.collect(out);
}

// ------------------------------------------------------------- PatchEmbed

void PatchEmbed::setup(const std::string& name, int patch_dim, int embed_dim, int grid_h, int grid_w) {
    proj.setup(name + ".proj", patch_dim, embed_dim);
    pos.setup(name + ".pos", grid_h * grid_w, embed_dim);
}

void PatchEmbed::init(std::uint64_t seed, double stddev) {
    proj.init(seed, stddev);
    pos.fill_normal(seed, stddev);
}

Matrix PatchEmbed::project(const Matrix& patches) {
    if (patches.cols() != proj.weight.value.rows())
        throw std::invalid_argument("patch embed: patch dim " + std::to_string(patches.cols()) +
                                    " does not match projection input " +
                                    std::to_string(proj.weight.value.rows()));
    return proj.forward(patches);
}

Matrix PatchEmbed::forward(const Matrix& patches) {
    if (patches.rows() != pos.value.rows())
        throw std::invalid_argument("patch embed: token count " + std::to_string(patches.rows()) +
                                    " does not match positional table " + std::to_string(pos.value.rows()));
    return project(patches) + pos.value;
}

Matrix PatchEmbed::backward(const Matrix& d_out) {
    pos.grad += d_out;
    return proj.backward(d_out);
}

void PatchEmbed::collect(ParamRefs& out) {
    proj.collect(out);
    out.push_back(&pos);
}

} // namespace mipa::nn

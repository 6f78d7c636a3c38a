#include "mipa/nn/adamw.hpp"

#include <cmath>

namespace mipa::nn {

AdamW::AdamW(ParamRefs params, double lr_, double weight_decay_,
             double beta1_, double beta2_, double eps_)
    : lr(lr_), weight_decay(weight_decay_), beta1(beta1_), beta2(beta2_), eps(eps_),
      params_(std::move(params)) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Parameter* p : params_) {
        m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
}

void AdamW::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Parameter& p = *params_[i];
        m_[i] = beta1 * m_[i] + (1.0 - beta1) * p.grad;
        v_[i] = beta2 * v_[i].array() + (1.0 - beta2) * p.grad.array().square();
        const auto m_hat = m_[i].array() / bc1;
        const auto v_hat = v_[i].array() / bc2;
        p.value.array() -= lr * (m_hat / (v_hat.sqrt() + eps) + weight_decay * p.value.array());
    }
}

void AdamW::zero_grad() {
    for (Parameter* p : params_) p->zero_grad();
}

} // namespace mipa::nn

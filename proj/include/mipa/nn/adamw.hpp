#pragma once

#include "mipa/nn/param.hpp"

namespace mipa::nn {

// Adam with decoupled weight decay.
class AdamW {
public:
    AdamW(ParamRefs params, double lr, double weight_decay,
          double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step();
    void zero_grad();

    double lr = 1e-4;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

private:
    ParamRefs params_;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
    long t_ = 0;
};

} // namespace mipa::nn

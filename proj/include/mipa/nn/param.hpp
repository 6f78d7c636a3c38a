#pragma once

#include <string>
#include <vector>

#include "mipa/mosaic.hpp"
#include "mipa/rng.hpp"

namespace mipa::nn {

using mipa::Matrix;

// A named trainable tensor with its gradient accumulator. Biases and norm
// gains are stored as 1 x N rows.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;

    void setup(std::string param_name, int rows, int cols) {
        name = std::move(param_name);
        value = Matrix::Zero(rows, cols);
        grad = Matrix::Zero(rows, cols);
    }

    void fill_normal(std::uint64_t seed, double stddev) {
        Rng rng = Rng::stream(seed, name);
        for (int r = 0; r < value.rows(); ++r)
            for (int c = 0; c < value.cols(); ++c)
                value(r, c) = rng.normal(0.0, stddev);
    }

    void zero_grad() { grad.setZero(); }
    long count() const { return static_cast<long>(value.size()); }
};

using ParamRefs = std::vector<Parameter*>;

inline long total_param_count(const ParamRefs& params) {
    long n = 0;
    for (const Parameter* p : params) n += p->count();
    return n;
}

} // namespace mipa::nn

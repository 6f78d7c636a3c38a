#pragma once

#include <cstdint>
#include <string>

#include "mipa/rng.hpp"

namespace mipa {

enum class RhoKind { fixed, curriculum, variable };

std::string to_string(RhoKind kind);
RhoKind rho_kind_from_string(const std::string& name);

// Per-batch IR patch ratio sampler. rho is the fraction of patches taken from
// modality f (IR).
//
//   fixed      every draw returns fixed_value
//   variable   i.i.d. Uniform(0, 1)
//   curriculum warmup_value while epoch < warmup_epochs, Uniform(0, 1) after
//
// Warmup draws do not consume the RNG, so a curriculum policy's post-warmup
// sequence equals a variable policy's sequence from its start under the same
// seed.
class RhoPolicy {
public:
    static RhoPolicy make_fixed(double value);
    static RhoPolicy make_variable(std::uint64_t seed);
    static RhoPolicy make_curriculum(double warmup_value, int warmup_epochs, std::uint64_t seed);

    double next_rho();
    void advance_epoch() { ++epoch_; }

    RhoKind kind() const { return kind_; }
    int epoch() const { return epoch_; }
    int step() const { return step_; }
    double fixed_value() const { return fixed_value_; }
    double warmup_value() const { return warmup_value_; }
    int warmup_epochs() const { return warmup_epochs_; }

private:
    RhoPolicy(RhoKind kind, std::uint64_t seed) : kind_(kind), rng_(seed) {}

    RhoKind kind_;
    double fixed_value_ = 0.5;
    double warmup_value_ = 0.25;
    int warmup_epochs_ = 0;
    int epoch_ = 0;
    int step_ = 0;
    Rng rng_;
};

} // namespace mipa

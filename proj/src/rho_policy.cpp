#include "mipa/rho_policy.hpp"

#include <stdexcept>

namespace mipa {

std::string to_string(RhoKind kind) {
    switch (kind) {
        case RhoKind::fixed: return "fixed";
        case RhoKind::curriculum: return "curriculum";
        case RhoKind::variable: return "variable";
    }
    return "?";
}

RhoKind rho_kind_from_string(const std::string& name) {
    if (name == "fixed") return RhoKind::fixed;
    if (name == "curriculum") return RhoKind::curriculum;
    if (name == "variable") return RhoKind::variable;
    throw std::invalid_argument("unknown rho policy kind: " + name);
}

RhoPolicy RhoPolicy::make_fixed(double value) {
    if (!(value >= 0.0 && value <= 1.0))
        throw std::invalid_argument("fixed rho must lie in [0, 1]");
    RhoPolicy policy(RhoKind::fixed, 0);
    policy.fixed_value_ = value;
    return policy;
}

RhoPolicy RhoPolicy::make_variable(std::uint64_t seed) {
    return RhoPolicy(RhoKind::variable, seed);
}

RhoPolicy RhoPolicy::make_curriculum(double warmup_value, int warmup_epochs, std::uint64_t seed) {
    if (!(warmup_value >= 0.0 && warmup_value <= 1.0))
        throw std::invalid_argument("curriculum warmup value must lie in [0, 1]");
    if (warmup_epochs < 0)
        throw std::invalid_argument("curriculum warmup epochs must be >= 0");
    RhoPolicy policy(RhoKind::curriculum, seed);
    policy.warmup_value_ = warmup_value;
    policy.warmup_epochs_ = warmup_epochs;
    return policy;
}

double RhoPolicy::next_rho() {
    ++step_;
    switch (kind_) {
        case RhoKind::fixed:
            return fixed_value_;
        case RhoKind::variable:
            return rng_.uniform();
        case RhoKind::curriculum:
            return epoch_ < warmup_epochs_ ? warmup_value_ : rng_.uniform();
    }
    return 0.5;
}

} // namespace mipa

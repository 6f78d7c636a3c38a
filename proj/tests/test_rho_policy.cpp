#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mipa/rho_policy.hpp"

using namespace mipa;

namespace {

// One-sample Kolmogorov-Smirnov p-value against U(0,1), asymptotic series.
double ks_uniform_p_value(std::vector<double> draws) {
    std::sort(draws.begin(), draws.end());
    const double n = static_cast<double>(draws.size());
    double d = 0.0;
    for (std::size_t i = 0; i < draws.size(); ++i) {
        const double cdf = draws[i]; // U(0,1) CDF
        const double hi = (i + 1) / n - cdf;
        const double lo = cdf - i / n;
        d = std::max({d, hi, lo});
    }
    const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
    double p = 0.0;
    for (int k = 1; k <= 100; ++k)
        p += 2.0 * ((k % 2 == 1) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    return std::clamp(p, 0.0, 1.0);
}

} // namespace

TEST_CASE("fixed policy returns the configured value forever") {
    RhoPolicy policy = RhoPolicy::make_fixed(0.25);
    for (int i = 0; i < 100; ++i) CHECK(policy.next_rho() == 0.25);
    CHECK(policy.step() == 100);
}

TEST_CASE("fixed policy rejects out-of-range values") {
    CHECK_THROWS_AS(RhoPolicy::make_fixed(-0.1), std::invalid_argument);
    CHECK_THROWS_AS(RhoPolicy::make_fixed(1.1), std::invalid_argument);
}

TEST_CASE("curriculum holds the warmup value then goes uniform") {
    RhoPolicy policy = RhoPolicy::make_curriculum(0.25, 8, 99);
    for (int epoch = 0; epoch < 8; ++epoch) {
        for (int step = 0; step < 5; ++step) CHECK(policy.next_rho() == 0.25);
        policy.advance_epoch();
    }
    CHECK(policy.epoch() == 8);
    // Post-warmup draws equal a variable policy's sequence from its start
    // (warmup draws do not consume the RNG).
    RhoPolicy variable = RhoPolicy::make_variable(99);
    for (int step = 0; step < 200; ++step) {
        const double draw = policy.next_rho();
        CHECK(draw == variable.next_rho());
        CHECK(draw >= 0.0);
        CHECK(draw < 1.0);
    }
}

TEST_CASE("curriculum boundary: epoch 7 to 8 flips the regime on the next draw") {
    RhoPolicy policy = RhoPolicy::make_curriculum(0.25, 8, 5);
    for (int epoch = 0; epoch < 7; ++epoch) policy.advance_epoch();
    CHECK(policy.next_rho() == 0.25); // epoch 7, still warmup
    policy.advance_epoch();           // 7 -> 8
    RhoPolicy variable = RhoPolicy::make_variable(5);
    CHECK(policy.next_rho() == variable.next_rho());
}

TEST_CASE("advance_epoch counts epochs without touching steps") {
    RhoPolicy policy = RhoPolicy::make_variable(1);
    CHECK(policy.epoch() == 0);
    policy.advance_epoch();
    CHECK(policy.epoch() == 1);
    for (int i = 0; i < 11; ++i) policy.advance_epoch();
    CHECK(policy.epoch() == 12); // the full DINO-style epoch budget
    CHECK(policy.step() == 0);
}

TEST_CASE("variable policy passes a KS test against U(0,1)") {
    RhoPolicy policy = RhoPolicy::make_variable(2024);
    std::vector<double> draws;
    draws.reserve(10000);
    for (int i = 0; i < 10000; ++i) draws.push_back(policy.next_rho());
    CHECK(ks_uniform_p_value(draws) > 0.01);
}

TEST_CASE("variable policy mean and variance match U(0,1)") {
    RhoPolicy policy = RhoPolicy::make_variable(7);
    const int n = 20000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double draw = policy.next_rho();
        sum += draw;
        sum_sq += draw * draw;
    }
    const double mean = sum / n;
    const double variance = sum_sq / n - mean * mean;
    CHECK(mean >= 0.48);
    CHECK(mean <= 0.52);
    CHECK(std::abs(variance - 1.0 / 12.0) <= 0.005);
}

TEST_CASE("equal seeds replay bitwise-equal sequences") {
    RhoPolicy a = RhoPolicy::make_variable(31337);
    RhoPolicy b = RhoPolicy::make_variable(31337);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_rho() == b.next_rho());
}

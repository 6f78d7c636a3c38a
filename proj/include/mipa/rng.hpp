#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mipa {

// Deterministic random source. All distributions are derived from the raw
// 64-bit stream by hand so that a (seed, call sequence) pair reproduces the
// same values on every platform and compiler; the std:: distribution objects
// are implementation-defined and therefore avoided.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Independent substream for a named purpose (shuffle, masks, init, ...).
    // Streams must not be aliased by accident, hence the tag hash.
    static Rng stream(std::uint64_t seed, std::string_view tag);

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), unbiased via rejection.
    std::uint64_t uniform_int(std::uint64_t n);

    // Standard normal via Box-Muller; the second value is cached.
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// FNV-1a, used to derive stream tags and per-sample seeds.
std::uint64_t hash64(std::string_view text);
std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b);

} // namespace mipa

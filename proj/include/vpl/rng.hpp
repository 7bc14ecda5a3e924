#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace vpl {

/// Mixes a base seed with a string key (e.g. an image id) into a sub-seed.
/// Stable across platforms and runs.
std::uint64_t derive_seed(std::uint64_t base, std::string_view key);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t key);

/// mt19937_64 with hand-rolled distributions: the std:: distributions are
/// implementation-defined, which would break cross-platform reproducibility.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n).
    std::uint64_t index(std::uint64_t n);
    bool bernoulli(double p) { return uniform() < p; }
    /// Standard normal via Box-Muller.
    double normal();

private:
    std::mt19937_64 engine_;
};

}  // namespace vpl

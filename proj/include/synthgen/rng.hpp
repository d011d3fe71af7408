#pragma once

#include <cstdint>
#include <vector>

namespace synthgen {

// Deterministic seedable generator. Core is splitmix64 (Steele et al.):
// one 64-bit word of state, each call advances by a fixed odd constant and
// mixes. Identical seed gives an identical sequence within one build; no
// cross-compiler bit-equality is promised.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    // Independent stream for (seed, stream index). Used so per-sample /
    // per-epoch work is order-independent.
    static Rng derive(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t next_u64();

    // Uniform in [0,1), 53-bit resolution.
    double uniform();

    // Uniform in [lo,hi).
    double uniform(double lo, double hi);

    // Standard normal via Box-Muller on fresh uniforms (no cached spare,
    // keeps the state a single word).
    double normal();

    // Uniform integer in [0,n), rejection sampled (no modulo bias). n >= 1.
    std::size_t uniform_index(std::size_t n);

    // Uniformly random m-subset, ascending order. Throws if m > set size.
    std::vector<int> choose_subset(const std::vector<int>& set, std::size_t m);

private:
    std::uint64_t state_;
};

}  // namespace synthgen

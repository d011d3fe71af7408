#include "synthgen/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace synthgen {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}
}  // namespace

Rng Rng::derive(std::uint64_t seed, std::uint64_t stream) {
    return Rng(mix64(seed + kGolden * (stream + 1)));
}

std::uint64_t Rng::next_u64() {
    state_ += kGolden;
    return mix64(state_);
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
    double u1 = 1.0 - uniform();  // (0,1], keeps log finite
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::size_t Rng::uniform_index(std::size_t n) {
    if (n == 0) throw std::runtime_error("uniform_index: n must be >= 1");
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return static_cast<std::size_t>(x % n);
}

std::vector<int> Rng::choose_subset(const std::vector<int>& set, std::size_t m) {
    if (m > set.size()) throw std::runtime_error("choose_subset: m exceeds set size");
    std::vector<int> pool = set;
    // Partial Fisher-Yates: first m slots are a uniform m-subset.
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t j = i + uniform_index(pool.size() - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(m);
    std::sort(pool.begin(), pool.end());
    return pool;
}

}  // namespace synthgen

#include "cipt/seed.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace cipt {

namespace {

// SplitMix64 finalizer; full-avalanche mix of a 64-bit word.
std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace

SeedTree::SeedTree(std::uint64_t master)
    : master_(master), state_(mix64(master)), path_() {}

SeedTree::SeedTree(std::uint64_t master, std::uint64_t state, std::vector<std::uint64_t> path)
    : master_(master), state_(state), path_(std::move(path)) {}

SeedTree SeedTree::child(std::uint64_t index) const {
    std::uint64_t derived = mix64(state_ ^ mix64(index ^ 0xa5a5a5a5a5a5a5a5ull));
    std::vector<std::uint64_t> path = path_;
    path.push_back(index);
    return SeedTree(master_, derived, std::move(path));
}

double Rng::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::uniform_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_below: n must be positive");
    if (n == 1) return 0;
    std::uint64_t mask = std::bit_ceil(n) - 1;
    for (;;) {
        std::uint64_t v = next_u64() & mask;
        if (v < n) return v;
    }
}

std::size_t Rng::categorical(std::span<const double> pmf) {
    double u = uniform01();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < pmf.size(); ++i) {
        acc += pmf[i];
        if (u < acc) return i;
    }
    return pmf.empty() ? 0 : pmf.size() - 1;
}

std::int64_t Rng::poisson(double mean) {
    if (!(mean >= 0.0)) throw std::invalid_argument("poisson: mean must be nonnegative");
    std::int64_t total = 0;
    // Knuth's multiplication method on chunks of at most 16 so exp(-chunk)
    // stays comfortably inside double range.
    while (mean > 0.0) {
        double chunk = mean > 16.0 ? 16.0 : mean;
        mean -= chunk;
        double limit = std::exp(-chunk);
        double prod = 1.0;
        std::int64_t k = -1;
        do {
            prod *= uniform01();
            ++k;
        } while (prod > limit);
        total += k;
    }
    return total;
}

}  // namespace cipt

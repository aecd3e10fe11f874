#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace cipt {

// Counter-based seed derivation. Every unit of randomized work (a repetition,
// a permutation draw, a split) takes its own child seed derived from
// (master, path), so scheduling and worker count can never change a result.
class SeedTree {
public:
    explicit SeedTree(std::uint64_t master);

    // Deterministic child: same (state, index) always yields the same child.
    [[nodiscard]] SeedTree child(std::uint64_t index) const;

    [[nodiscard]] std::uint64_t state() const noexcept { return state_; }
    [[nodiscard]] std::uint64_t master() const noexcept { return master_; }
    [[nodiscard]] const std::vector<std::uint64_t>& path() const noexcept { return path_; }

private:
    SeedTree(std::uint64_t master, std::uint64_t state, std::vector<std::uint64_t> path);

    std::uint64_t master_;
    std::uint64_t state_;
    std::vector<std::uint64_t> path_;
};

// Random draws used across the library. The distribution helpers are written
// out by hand so the streams do not depend on standard-library internals.
class Rng {
public:
    explicit Rng(const SeedTree& tree) : engine_(tree.state()) {}
    explicit Rng(std::uint64_t raw_seed) : engine_(raw_seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform01();

    // Uniform integer in [0, n); n must be positive.
    std::uint64_t uniform_below(std::uint64_t n);

    bool bernoulli(double p) { return uniform01() < p; }

    // Index into a probability vector; the final cell absorbs rounding slack.
    std::size_t categorical(std::span<const double> pmf);

    // Exact Poisson draw by product-of-uniforms, chunked so that large means
    // never underflow.
    std::int64_t poisson(double mean);

    // Fisher-Yates shuffle of the whole span.
    template <typename T>
    void shuffle(std::span<T> values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_below(i));
            std::swap(values[i - 1], values[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace cipt

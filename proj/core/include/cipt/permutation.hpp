#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "cipt/binning.hpp"
#include "cipt/seed.hpp"
#include "cipt/statistics.hpp"
#include "cipt/types.hpp"

namespace cipt {

using BigInt = boost::multiprecision::cpp_int;

enum class PermKind { full, half, cyclic };

// full   permutes Y freely within each bin,
// half   permutes Y only at the retained-pair positions of a weighted split,
// cyclic shifts Y within each fine sub-cell of a double-binned dataset.
struct PermutationMode {
    PermKind kind = PermKind::full;
    // Per bin, the positions whose Y labels take part in a half permutation.
    std::vector<std::vector<std::uint32_t>> half_targets;

    static PermutationMode full();
    static PermutationMode half(const std::vector<SplitBins>& splits);
    static PermutationMode cyclic();
};

// Gather form: within bin m, new_y[i] = old_y[per_bin[m][i]].
struct LocalPermutation {
    std::vector<std::vector<std::uint32_t>> per_bin;
};

LocalPermutation identity_permutation(const BinnedDataset& binned);

// Permutation equivalent to applying `first`, then `second`.
LocalPermutation compose(const LocalPermutation& first, const LocalPermutation& second);

LocalPermutation sample_local_permutation(const BinnedDataset& binned,
                                          const PermutationMode& mode, Rng& rng);

// Group size: full = prod sigma_m!, half = prod |targets_m|!,
// cyclic = prod over fine sub-cells of max{sigma_mk, 1}.
BigInt count_permutations(const BinnedDataset& binned, const PermutationMode& mode);

BinnedDataset apply_permutation(const BinnedDataset& binned, const LocalPermutation& perm);

using StatisticFn = std::function<double(const BinnedDataset&)>;

struct CalibrationResult {
    double observed = 0.0;
    // Sampled values (Monte Carlo) or one value per group member (exhaustive).
    std::vector<double> permuted;
    int B = 0;               // Monte Carlo draws; 0 in exhaustive mode
    BigInt group_size = 0;   // full group cardinality in exhaustive mode
    bool exhaustive = false;
    double p_value = 1.0;
};

// p = (1/(B+1)) (#{T^pi >= T} + 1). Cyclic draws are made without
// replacement; if B covers the whole cyclic group the result is exhaustive.
CalibrationResult mc_pvalue(const StatisticFn& statistic, const BinnedDataset& binned,
                            const PermutationMode& mode, int B, Rng& rng);

// p = (1/K) sum 1{T^pi >= T} over the whole group, enumerated exhaustively.
// Throws when the group cardinality exceeds `cap`.
CalibrationResult exact_pvalue(const StatisticFn& statistic, const BinnedDataset& binned,
                               const PermutationMode& mode,
                               std::uint64_t cap = 1'000'000);

struct RandomizedDecision {
    bool reject = false;
    double a = 0.0;          // rejection probability used at the threshold
    double threshold = 0.0;  // order statistic T^{(k)}, k = K - floor(K alpha)
};

// Exact-size test: reject when T exceeds T^{(k)}; on a tie reject with
// probability a = (K alpha - K+) / K0 where K+ and K0 count strictly larger
// and tied values. A Monte Carlo result is treated as its own group of
// size B+1 (sampled values plus the observed one).
RandomizedDecision randomized_decision(const CalibrationResult& result, double alpha, Rng& rng);

struct PoissonSample {
    Dataset data;
    std::size_t drawn = 0;   // the Poisson variate N
    bool truncated = false;  // N > n; the caller should auto-accept
};

// Draw N ~ Poisson(rate_multiplier * n) and keep a uniformly random N-subset
// of the first n rows. rate_multiplier must be 1/2 or 1.
PoissonSample poissonize(const Dataset& ds, std::size_t n, double rate_multiplier, Rng& rng);

enum class StatKind { plain, weighted };
enum class CalibKind { mc, exact };
enum class PoissonOption { none, half, full };

struct TestConfig {
    int bins = 0;              // M; 0 selects categorical-Z binning by label
    int sub_bins = 0;          // b; > 0 builds the double partition
    bool overflow = false;     // route out-of-range Z to an overflow bin
    double holder_s = 1.0;     // smoothness used when discretizing real X/Y
    StatKind stat = StatKind::plain;
    WeightedNorm norm = WeightedNorm::pair_count;
    PermKind perm = PermKind::full;
    CalibKind calibration = CalibKind::mc;
    int B = 100;
    double alpha = 0.05;
    PoissonOption poisson = PoissonOption::none;
    bool randomized = false;   // randomized exact decision instead of p <= alpha
    std::uint64_t seed = 0;
};

struct TestOutcome {
    double statistic = 0.0;
    double p_value = 1.0;
    bool reject = false;
    bool truncated = false;    // Poissonization overshot n
    std::size_t n_used = 0;
    CalibrationResult calibration;
    TestConfig config;
};

TestOutcome run_test(const Dataset& ds, const TestConfig& config);

}  // namespace cipt

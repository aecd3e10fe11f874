#pragma once

#include <span>
#include <vector>

#include "cipt/seed.hpp"
#include "cipt/types.hpp"

namespace cipt {

// One term of the dependence kernel: for the ordered pair of observations
// (i, j), psi(i, j; x, y) = 1{x_i = x, y_i = y} - 1{x_i = x} 1{y_j = y}.
int psi(const CatPair& pair_i, std::int32_t y_j, std::int32_t x, std::int32_t y);

// Symmetric order-4 kernel: the average over all 4! orderings (a,b,c,d) of
// the four pairs of sum_{x,y} psi_ab(x,y) psi_cd(x,y). Bounded by 2 in
// absolute value because each psi has at most two nonzero cells.
double h_kernel(const CatPair pairs[4], int ell1, int ell2);

// U-statistic of a bin: the average of h_kernel over all 4-subsets.
// Computed from contingency counts in O(sigma + ell1*ell2); requires
// sigma >= 4. u_stat_naive enumerates the 4-subsets directly and serves as
// the reference implementation.
double u_stat(std::span<const CatPair> bin, int ell1, int ell2);
double u_stat_naive(std::span<const CatPair> bin, int ell1, int ell2);

// Aggregate statistic: sum over bins of sigma_m * U(W_m), skipping bins with
// fewer than 4 observations.
double t_ci(const BinnedDataset& binned);

// Random three-way split of a bin used by the weighted statistic. With
// t = floor((sigma - 4) / 4), the x-part holds min(t, ell1) observations, the
// y-part min(t, ell2), and everything else stays in the pair part.
struct SplitBins {
    std::vector<std::int32_t> xs;          // x values of the x-only part
    std::vector<std::int32_t> ys;          // y values of the y-only part
    std::vector<CatPair> xy;               // retained pairs
    std::vector<std::uint32_t> x_idx;      // positions of each part within the source bin
    std::vector<std::uint32_t> y_idx;
    std::vector<std::uint32_t> xy_idx;
};

SplitBins split_for_weights(std::span<const CatPair> bin, int ell1, int ell2, Rng& rng);

// Occurrence counts of the held-out parts; the joint weight of a cell (x,y)
// is (1 + ax[x-1]) * (1 + ay[y-1]).
struct WeightTable {
    std::vector<double> ax;
    std::vector<double> ay;
};

WeightTable compute_weights(const SplitBins& split, int ell1, int ell2);

// Normalization of the weighted U-statistic. pair_count divides the kernel
// sum by C(2t+4, 2); mean4 divides by the number of 4-subsets, making the
// weighted statistic a plain average like u_stat.
enum class WeightedNorm { pair_count, mean4 };

double u_stat_weighted(std::span<const CatPair> wxy, const WeightTable& weights,
                       WeightedNorm norm = WeightedNorm::pair_count);
double u_stat_weighted_naive(std::span<const CatPair> wxy, const WeightTable& weights,
                             WeightedNorm norm = WeightedNorm::pair_count);

// Weighted aggregate with scale factor omega_m = sqrt(min(sigma_m, ell1) *
// min(sigma_m, ell2)) per bin. Splits (and the weights derived from them) are
// returned so half-permutation calibration can hold them fixed.
struct WeightedStatistic {
    double value = 0.0;
    std::vector<SplitBins> splits;      // aligned with bins; empty parts when sigma < 4
    std::vector<WeightTable> weights;
};

WeightedStatistic t_ci_weighted(const BinnedDataset& binned, Rng& rng,
                                WeightedNorm norm = WeightedNorm::pair_count);

// Recomputes the weighted aggregate on (possibly Y-permuted) data reusing
// frozen split positions. Weights are re-derived from the current values at
// those positions; under half permutations they coincide with the originals.
double t_ci_weighted_frozen(const BinnedDataset& binned, const std::vector<SplitBins>& splits,
                            WeightedNorm norm = WeightedNorm::pair_count);

}  // namespace cipt

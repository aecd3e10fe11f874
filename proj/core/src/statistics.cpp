#include "cipt/statistics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace cipt {

namespace {

using I128 = __int128;

// All 24 orderings of {0,1,2,3}.
const std::array<std::array<int, 4>, 24>& orderings4() {
    static const auto table = [] {
        std::array<std::array<int, 4>, 24> t{};
        std::array<int, 4> idx{0, 1, 2, 3};
        std::size_t pos = 0;
        do {
            t[pos++] = idx;
        } while (std::next_permutation(idx.begin(), idx.end()));
        return t;
    }();
    return table;
}

struct Counts {
    std::vector<std::int64_t> cell;  // ell1 x ell2, row-major
    std::vector<std::int64_t> row;
    std::vector<std::int64_t> col;
};

void tally(std::span<const CatPair> bin, int ell1, int ell2, Counts& c) {
    c.cell.assign(static_cast<std::size_t>(ell1) * ell2, 0);
    c.row.assign(static_cast<std::size_t>(ell1), 0);
    c.col.assign(static_cast<std::size_t>(ell2), 0);
    for (const CatPair& p : bin) {
        std::size_t xi = static_cast<std::size_t>(p.x - 1);
        std::size_t yi = static_cast<std::size_t>(p.y - 1);
        ++c.cell[xi * ell2 + yi];
        ++c.row[xi];
        ++c.col[yi];
    }
}

std::int64_t binom2(std::int64_t n) { return n * (n - 1) / 2; }

double omega_scale(std::int64_t sigma, int ell1, int ell2) {
    double a = static_cast<double>(std::min<std::int64_t>(sigma, ell1));
    double b = static_cast<double>(std::min<std::int64_t>(sigma, ell2));
    return std::sqrt(a * b);
}

}  // namespace

int psi(const CatPair& pair_i, std::int32_t y_j, std::int32_t x, std::int32_t y) {
    int joint = (pair_i.x == x && pair_i.y == y) ? 1 : 0;
    int split = (pair_i.x == x && y_j == y) ? 1 : 0;
    return joint - split;
}

double h_kernel(const CatPair pairs[4], int ell1, int ell2) {
    double total = 0.0;
    for (const auto& ord : orderings4()) {
        const CatPair& a = pairs[ord[0]];
        const CatPair& b = pairs[ord[1]];
        const CatPair& c = pairs[ord[2]];
        const CatPair& d = pairs[ord[3]];
        for (std::int32_t x = 1; x <= ell1; ++x) {
            for (std::int32_t y = 1; y <= ell2; ++y) {
                total += psi(a, b.y, x, y) * psi(c, d.y, x, y);
            }
        }
    }
    return total / 24.0;
}

// Expanding psi_ab(x,y) psi_cd(x,y) over the category grid and summing over
// ordered distinct index 4-tuples (a,b,c,d) collapses the U-statistic to
// contingency counts. With N = cell counts, R = row counts, C = column
// counts, P2 = sum N(N-1), PX = sum R(R-1), PY = sum C(C-1),
// V = sum N(R-1)(C-1), and sigma the bin size:
//
//   sum_g = P2 (sigma-2)(sigma-3) - 2 (V - P2)(sigma-3) + PX*PY - 4V + 2 P2
//   U     = sum_g / (sigma (sigma-1) (sigma-2) (sigma-3))
//
// which is the average of h_kernel over all 4-subsets.
double u_stat(std::span<const CatPair> bin, int ell1, int ell2) {
    std::int64_t sigma = static_cast<std::int64_t>(bin.size());
    if (sigma < 4) throw ConfigError("u_stat needs at least 4 observations");

    thread_local Counts c;
    tally(bin, ell1, ell2, c);

    std::int64_t p2 = 0;
    std::int64_t v = 0;
    for (int xi = 0; xi < ell1; ++xi) {
        for (int yi = 0; yi < ell2; ++yi) {
            std::int64_t n = c.cell[static_cast<std::size_t>(xi) * ell2 + yi];
            p2 += n * (n - 1);
            v += n * (c.row[static_cast<std::size_t>(xi)] - 1) *
                 (c.col[static_cast<std::size_t>(yi)] - 1);
        }
    }
    std::int64_t px = 0;
    for (int xi = 0; xi < ell1; ++xi) px += c.row[static_cast<std::size_t>(xi)] * (c.row[static_cast<std::size_t>(xi)] - 1);
    std::int64_t py = 0;
    for (int yi = 0; yi < ell2; ++yi) py += c.col[static_cast<std::size_t>(yi)] * (c.col[static_cast<std::size_t>(yi)] - 1);

    I128 sum_g = I128(p2) * (sigma - 2) * (sigma - 3)
               - I128(2) * (v - p2) * (sigma - 3)
               + I128(px) * py - I128(4) * v + I128(2) * p2;
    I128 tuples = I128(sigma) * (sigma - 1) * (sigma - 2) * (sigma - 3);
    return static_cast<double>(sum_g) / static_cast<double>(tuples);
}

double u_stat_naive(std::span<const CatPair> bin, int ell1, int ell2) {
    std::size_t sigma = bin.size();
    if (sigma < 4) throw ConfigError("u_stat needs at least 4 observations");
    double total = 0.0;
    std::size_t subsets = 0;
    CatPair four[4];
    for (std::size_t i = 0; i < sigma; ++i) {
        for (std::size_t j = i + 1; j < sigma; ++j) {
            for (std::size_t k = j + 1; k < sigma; ++k) {
                for (std::size_t l = k + 1; l < sigma; ++l) {
                    four[0] = bin[i];
                    four[1] = bin[j];
                    four[2] = bin[k];
                    four[3] = bin[l];
                    total += h_kernel(four, ell1, ell2);
                    ++subsets;
                }
            }
        }
    }
    return total / static_cast<double>(subsets);
}

double t_ci(const BinnedDataset& binned) {
    double total = 0.0;
    for (const auto& bin : binned.bins) {
        if (bin.size() < 4) continue;
        total += static_cast<double>(bin.size()) * u_stat(bin, binned.ell1, binned.ell2);
    }
    return total;
}

SplitBins split_for_weights(std::span<const CatPair> bin, int ell1, int ell2, Rng& rng) {
    std::int64_t sigma = static_cast<std::int64_t>(bin.size());
    if (sigma < 4) throw ConfigError("split_for_weights needs at least 4 observations");
    std::int64_t t = (sigma - 4) / 4;
    std::size_t t1 = static_cast<std::size_t>(std::min<std::int64_t>(t, ell1));
    std::size_t t2 = static_cast<std::size_t>(std::min<std::int64_t>(t, ell2));

    std::vector<std::uint32_t> order(bin.size());
    std::iota(order.begin(), order.end(), 0u);
    rng.shuffle(std::span<std::uint32_t>(order));

    SplitBins split;
    split.x_idx.assign(order.begin(), order.begin() + t1);
    split.y_idx.assign(order.begin() + t1, order.begin() + t1 + t2);
    split.xy_idx.assign(order.begin() + t1 + t2, order.end());
    std::sort(split.x_idx.begin(), split.x_idx.end());
    std::sort(split.y_idx.begin(), split.y_idx.end());
    std::sort(split.xy_idx.begin(), split.xy_idx.end());

    for (std::uint32_t i : split.x_idx) split.xs.push_back(bin[i].x);
    for (std::uint32_t i : split.y_idx) split.ys.push_back(bin[i].y);
    for (std::uint32_t i : split.xy_idx) split.xy.push_back(bin[i]);
    return split;
}

WeightTable compute_weights(const SplitBins& split, int ell1, int ell2) {
    WeightTable w;
    w.ax.assign(static_cast<std::size_t>(ell1), 0.0);
    w.ay.assign(static_cast<std::size_t>(ell2), 0.0);
    for (std::int32_t x : split.xs) w.ax[static_cast<std::size_t>(x - 1)] += 1.0;
    for (std::int32_t y : split.ys) w.ay[static_cast<std::size_t>(y - 1)] += 1.0;
    return w;
}

namespace {

// Shared tail of the weighted fast path. The kernel expansion is the same as
// in u_stat except every cell (x,y) carries a factor
// 1/((1+ax)(1+ay)), which factorizes across the x and y margins.
double u_stat_weighted_counts(std::span<const CatPair> wxy, const WeightTable& weights,
                              WeightedNorm norm) {
    std::int64_t s = static_cast<std::int64_t>(wxy.size());
    if (s < 4) throw ConfigError("u_stat_weighted needs at least 4 retained pairs");
    int ell1 = static_cast<int>(weights.ax.size());
    int ell2 = static_cast<int>(weights.ay.size());

    thread_local Counts c;
    tally(wxy, ell1, ell2, c);

    double p2w = 0.0;
    double vw = 0.0;
    for (int xi = 0; xi < ell1; ++xi) {
        double u = 1.0 / (1.0 + weights.ax[static_cast<std::size_t>(xi)]);
        for (int yi = 0; yi < ell2; ++yi) {
            std::int64_t n = c.cell[static_cast<std::size_t>(xi) * ell2 + yi];
            if (n == 0) continue;
            double w = u / (1.0 + weights.ay[static_cast<std::size_t>(yi)]);
            p2w += w * static_cast<double>(n * (n - 1));
            vw += w * static_cast<double>(n * (c.row[static_cast<std::size_t>(xi)] - 1) *
                                          (c.col[static_cast<std::size_t>(yi)] - 1));
        }
    }
    double pxu = 0.0;
    for (int xi = 0; xi < ell1; ++xi) {
        pxu += c.row[static_cast<std::size_t>(xi)] * (c.row[static_cast<std::size_t>(xi)] - 1) /
               (1.0 + weights.ax[static_cast<std::size_t>(xi)]);
    }
    double pyv = 0.0;
    for (int yi = 0; yi < ell2; ++yi) {
        pyv += c.col[static_cast<std::size_t>(yi)] * (c.col[static_cast<std::size_t>(yi)] - 1) /
               (1.0 + weights.ay[static_cast<std::size_t>(yi)]);
    }

    double sum_g = p2w * static_cast<double>((s - 2) * (s - 3))
                 - 2.0 * (vw - p2w) * static_cast<double>(s - 3)
                 + pxu * pyv - 4.0 * vw + 2.0 * p2w;

    if (norm == WeightedNorm::mean4) {
        double tuples = static_cast<double>(s) * static_cast<double>(s - 1) *
                        static_cast<double>(s - 2) * static_cast<double>(s - 3);
        return sum_g / tuples;
    }
    double held_out = std::accumulate(weights.ax.begin(), weights.ax.end(), 0.0) +
                      std::accumulate(weights.ay.begin(), weights.ay.end(), 0.0);
    std::int64_t sigma = s + static_cast<std::int64_t>(held_out);
    std::int64_t t = (sigma - 4) / 4;
    return sum_g / 24.0 / static_cast<double>(binom2(2 * t + 4));
}

double weighted_h_kernel(const CatPair pairs[4], const WeightTable& weights) {
    int ell1 = static_cast<int>(weights.ax.size());
    int ell2 = static_cast<int>(weights.ay.size());
    double total = 0.0;
    for (const auto& ord : orderings4()) {
        const CatPair& a = pairs[ord[0]];
        const CatPair& b = pairs[ord[1]];
        const CatPair& c = pairs[ord[2]];
        const CatPair& d = pairs[ord[3]];
        for (std::int32_t x = 1; x <= ell1; ++x) {
            for (std::int32_t y = 1; y <= ell2; ++y) {
                double w = (1.0 + weights.ax[static_cast<std::size_t>(x - 1)]) *
                           (1.0 + weights.ay[static_cast<std::size_t>(y - 1)]);
                total += psi(a, b.y, x, y) * psi(c, d.y, x, y) / w;
            }
        }
    }
    return total / 24.0;
}

}  // namespace

double u_stat_weighted(std::span<const CatPair> wxy, const WeightTable& weights,
                       WeightedNorm norm) {
    return u_stat_weighted_counts(wxy, weights, norm);
}

double u_stat_weighted_naive(std::span<const CatPair> wxy, const WeightTable& weights,
                             WeightedNorm norm) {
    std::size_t s = wxy.size();
    if (s < 4) throw ConfigError("u_stat_weighted needs at least 4 retained pairs");
    double total = 0.0;
    CatPair four[4];
    for (std::size_t i = 0; i < s; ++i) {
        for (std::size_t j = i + 1; j < s; ++j) {
            for (std::size_t k = j + 1; k < s; ++k) {
                for (std::size_t l = k + 1; l < s; ++l) {
                    four[0] = wxy[i];
                    four[1] = wxy[j];
                    four[2] = wxy[k];
                    four[3] = wxy[l];
                    total += weighted_h_kernel(four, weights);
                }
            }
        }
    }
    if (norm == WeightedNorm::mean4) {
        double subsets = static_cast<double>(s) * (s - 1) * (s - 2) * (s - 3) / 24.0;
        return total / subsets;
    }
    double held_out = std::accumulate(weights.ax.begin(), weights.ax.end(), 0.0) +
                      std::accumulate(weights.ay.begin(), weights.ay.end(), 0.0);
    std::int64_t sigma = static_cast<std::int64_t>(s) + static_cast<std::int64_t>(held_out);
    std::int64_t t = (sigma - 4) / 4;
    return total / static_cast<double>(binom2(2 * t + 4));
}

WeightedStatistic t_ci_weighted(const BinnedDataset& binned, Rng& rng, WeightedNorm norm) {
    WeightedStatistic result;
    result.splits.resize(binned.bins.size());
    result.weights.resize(binned.bins.size());
    for (std::size_t m = 0; m < binned.bins.size(); ++m) {
        const auto& bin = binned.bins[m];
        if (bin.size() < 4) continue;
        result.splits[m] = split_for_weights(bin, binned.ell1, binned.ell2, rng);
        result.weights[m] = compute_weights(result.splits[m], binned.ell1, binned.ell2);
        double u = u_stat_weighted(result.splits[m].xy, result.weights[m], norm);
        double sigma = static_cast<double>(bin.size());
        result.value += sigma * omega_scale(static_cast<std::int64_t>(bin.size()),
                                            binned.ell1, binned.ell2) * u;
    }
    return result;
}

double t_ci_weighted_frozen(const BinnedDataset& binned, const std::vector<SplitBins>& splits,
                            WeightedNorm norm) {
    if (splits.size() != binned.bins.size()) {
        throw ConfigError("split table does not match bin structure");
    }
    double total = 0.0;
    thread_local SplitBins scratch;
    for (std::size_t m = 0; m < binned.bins.size(); ++m) {
        const auto& bin = binned.bins[m];
        if (bin.size() < 4) continue;
        const SplitBins& frozen = splits[m];

        scratch.xs.clear();
        scratch.ys.clear();
        scratch.xy.clear();
        for (std::uint32_t i : frozen.x_idx) scratch.xs.push_back(bin[i].x);
        for (std::uint32_t i : frozen.y_idx) scratch.ys.push_back(bin[i].y);
        for (std::uint32_t i : frozen.xy_idx) scratch.xy.push_back(bin[i]);

        WeightTable w = compute_weights(scratch, binned.ell1, binned.ell2);
        double u = u_stat_weighted(scratch.xy, w, norm);
        total += static_cast<double>(bin.size()) *
                 omega_scale(static_cast<std::int64_t>(bin.size()), binned.ell1, binned.ell2) * u;
    }
    return total;
}

}  // namespace cipt

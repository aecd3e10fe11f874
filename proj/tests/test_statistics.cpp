#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "cipt/seed.hpp"
#include "cipt/statistics.hpp"
#include "doctest.h"

using namespace cipt;

namespace {

std::vector<CatPair> random_bin(Rng& rng, std::size_t size, int ell1, int ell2) {
    std::vector<CatPair> bin(size);
    for (auto& p : bin) {
        p.x = 1 + static_cast<std::int32_t>(rng.uniform_below(static_cast<std::uint64_t>(ell1)));
        p.y = 1 + static_cast<std::int32_t>(rng.uniform_below(static_cast<std::uint64_t>(ell2)));
    }
    return bin;
}

int psi_ref(const CatPair& pi, std::int32_t yj, int x, int y) {
    int joint = (pi.x == x && pi.y == y) ? 1 : 0;
    int cross = (pi.x == x && yj == y) ? 1 : 0;
    return joint - cross;
}

// Straight from the definition: the mean over ordered distinct 4-tuples
// (i,j,k,l) of sum_{x,y} psi(i,j;x,y) psi(k,l;x,y). Shares nothing with the
// library's counting identity or its 4-subset enumeration.
double u_ref(std::span<const CatPair> bin, int ell1, int ell2) {
    std::size_t s = bin.size();
    double total = 0.0;
    std::size_t tuples = 0;
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = 0; j < s; ++j) {
            if (j == i) continue;
            for (std::size_t k = 0; k < s; ++k) {
                if (k == i || k == j) continue;
                for (std::size_t l = 0; l < s; ++l) {
                    if (l == i || l == j || l == k) continue;
                    double g = 0.0;
                    for (int x = 1; x <= ell1; ++x)
                        for (int y = 1; y <= ell2; ++y)
                            g += psi_ref(bin[i], bin[j].y, x, y) * psi_ref(bin[k], bin[l].y, x, y);
                    total += g;
                    ++tuples;
                }
            }
        }
    return total / static_cast<double>(tuples);
}

// Weighted variant of u_ref: each (x,y) term is divided by the joint weight.
double u_weighted_ref(std::span<const CatPair> wxy, const WeightTable& wt, WeightedNorm norm) {
    std::size_t s = wxy.size();
    int ell1 = static_cast<int>(wt.ax.size());
    int ell2 = static_cast<int>(wt.ay.size());
    double total = 0.0;
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = 0; j < s; ++j) {
            if (j == i) continue;
            for (std::size_t k = 0; k < s; ++k) {
                if (k == i || k == j) continue;
                for (std::size_t l = 0; l < s; ++l) {
                    if (l == i || l == j || l == k) continue;
                    for (int x = 1; x <= ell1; ++x)
                        for (int y = 1; y <= ell2; ++y)
                            total += psi_ref(wxy[i], wxy[j].y, x, y) *
                                     psi_ref(wxy[k], wxy[l].y, x, y) /
                                     ((1.0 + wt.ax[static_cast<std::size_t>(x - 1)]) *
                                      (1.0 + wt.ay[static_cast<std::size_t>(y - 1)]));
                }
            }
        }
    if (norm == WeightedNorm::mean4) {
        double tuples = static_cast<double>(s) * static_cast<double>(s - 1) *
                        static_cast<double>(s - 2) * static_cast<double>(s - 3);
        return total / tuples;
    }
    auto held = static_cast<std::int64_t>(
        std::llround(std::accumulate(wt.ax.begin(), wt.ax.end(), 0.0) +
                     std::accumulate(wt.ay.begin(), wt.ay.end(), 0.0)));
    std::int64_t sigma = static_cast<std::int64_t>(s) + held;
    std::int64_t t = (sigma - 4) / 4;
    std::int64_t pairs = (2 * t + 4) * (2 * t + 3) / 2;
    return total / 24.0 / static_cast<double>(pairs);
}

bool close_rel(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

TEST_SUITE("statistics") {

TEST_CASE("psi truth table") {
    CatPair p{1, 2};
    CHECK(psi(p, 1, 1, 2) == 1);   // joint hit, cross miss
    CHECK(psi(p, 2, 1, 2) == 0);   // both hit
    CHECK(psi(p, 2, 1, 1) == 0);   // neither
    CHECK(psi(p, 1, 1, 1) == -1);  // cross hit only
    CHECK(psi(p, 1, 2, 1) == 0);   // wrong x kills both terms
    CHECK(psi(p, 1, 2, 2) == 0);
}

TEST_CASE("kernel is bounded by 2") {
    Rng rng(101);
    for (int trial = 0; trial < 300; ++trial) {
        int ell1 = 2 + static_cast<int>(rng.uniform_below(3));
        int ell2 = 2 + static_cast<int>(rng.uniform_below(3));
        auto bin = random_bin(rng, 4, ell1, ell2);
        CatPair quad[4] = {bin[0], bin[1], bin[2], bin[3]};
        CHECK(std::abs(h_kernel(quad, ell1, ell2)) <= 2.0 + 1e-12);
    }
}

TEST_CASE("hand worked four point bin") {
    // One observation in each cell of a 2x2 table.
    std::vector<CatPair> bin{{1, 1}, {1, 2}, {2, 1}, {2, 2}};
    CHECK(u_stat(bin, 2, 2) == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
    CHECK(u_stat_naive(bin, 2, 2) == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
    CHECK(u_ref(bin, 2, 2) == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("u_stat needs four observations") {
    std::vector<CatPair> bin{{1, 1}, {1, 2}, {2, 1}};
    CHECK_THROWS_AS(u_stat(bin, 2, 2), ConfigError);
    CHECK_THROWS_AS(u_stat_naive(bin, 2, 2), ConfigError);
}

TEST_CASE("counting path equals naive path equals the definition") {
    Rng rng(202);
    for (int trial = 0; trial < 150; ++trial) {
        int ell1 = 2 + static_cast<int>(rng.uniform_below(3));
        int ell2 = 2 + static_cast<int>(rng.uniform_below(3));
        std::size_t sigma = 4 + rng.uniform_below(5);
        auto bin = random_bin(rng, sigma, ell1, ell2);
        double fast = u_stat(bin, ell1, ell2);
        double naive = u_stat_naive(bin, ell1, ell2);
        double ref = u_ref(bin, ell1, ell2);
        CHECK(close_rel(fast, naive, 1e-10));
        CHECK(close_rel(fast, ref, 1e-10));
        CHECK(std::abs(fast) <= 2.0 + 1e-12);
    }
}

TEST_CASE("u_stat averages to zero over all y permutations") {
    Rng rng(303);
    for (std::size_t sigma : {4, 5, 6, 7}) {
        auto bin = random_bin(rng, sigma, 2, 3);
        std::vector<std::size_t> idx(sigma);
        std::iota(idx.begin(), idx.end(), 0u);
        double sum = 0.0;
        std::size_t count = 0;
        std::vector<CatPair> permuted = bin;
        do {
            for (std::size_t i = 0; i < sigma; ++i) permuted[i].y = bin[idx[i]].y;
            sum += u_stat(permuted, 2, 3);
            ++count;
        } while (std::next_permutation(idx.begin(), idx.end()));
        CHECK(std::abs(sum / static_cast<double>(count)) < 1e-10);
    }
}

TEST_CASE("category relabeling leaves u_stat unchanged") {
    Rng rng(404);
    for (int trial = 0; trial < 50; ++trial) {
        auto bin = random_bin(rng, 4 + rng.uniform_below(8), 3, 2);
        auto relabeled = bin;
        // Bijection 1->3, 2->1, 3->2 on x; swap on y.
        const std::int32_t xmap[4] = {0, 3, 1, 2};
        const std::int32_t ymap[3] = {0, 2, 1};
        for (auto& p : relabeled) {
            p.x = xmap[p.x];
            p.y = ymap[p.y];
        }
        CHECK(close_rel(u_stat(bin, 3, 2), u_stat(relabeled, 3, 2), 1e-12));
    }
}

TEST_CASE("t_ci sums sigma weighted u_stats and skips small bins") {
    Rng rng(505);
    BinnedDataset binned;
    binned.ell1 = 2;
    binned.ell2 = 2;
    binned.bins.push_back(random_bin(rng, 3, 2, 2));  // ignored
    binned.bins.push_back(random_bin(rng, 5, 2, 2));
    binned.bins.push_back(random_bin(rng, 8, 2, 2));
    double expected = 5.0 * u_stat(binned.bins[1], 2, 2) + 8.0 * u_stat(binned.bins[2], 2, 2);
    CHECK(t_ci(binned) == doctest::Approx(expected).epsilon(1e-12));

    // Adding another degenerate bin changes nothing.
    binned.bins.push_back(random_bin(rng, 2, 2, 2));
    CHECK(t_ci(binned) == doctest::Approx(expected).epsilon(1e-12));

    BinnedDataset empty;
    empty.ell1 = empty.ell2 = 2;
    CHECK(t_ci(empty) == 0.0);
}

TEST_CASE("weight split sizes follow the quarter rule") {
    Rng rng(606);

    auto check_split = [&](std::size_t sigma, int ell1, int ell2) {
        auto bin = random_bin(rng, sigma, ell1, ell2);
        SplitBins split = split_for_weights(bin, ell1, ell2, rng);
        std::size_t t = sigma >= 4 ? (sigma - 4) / 4 : 0;
        std::size_t t1 = std::min(t, static_cast<std::size_t>(ell1));
        std::size_t t2 = std::min(t, static_cast<std::size_t>(ell2));
        CHECK(split.x_idx.size() == t1);
        CHECK(split.y_idx.size() == t2);
        CHECK(split.xy_idx.size() == sigma - t1 - t2);
        CHECK(split.xy.size() >= sigma / 2 + 2);

        // The three index sets partition the bin.
        std::vector<std::uint32_t> all;
        all.insert(all.end(), split.x_idx.begin(), split.x_idx.end());
        all.insert(all.end(), split.y_idx.begin(), split.y_idx.end());
        all.insert(all.end(), split.xy_idx.begin(), split.xy_idx.end());
        std::sort(all.begin(), all.end());
        for (std::size_t i = 0; i < all.size(); ++i) REQUIRE(all[i] == i);

        // Values match the stored positions.
        for (std::size_t i = 0; i < split.x_idx.size(); ++i)
            CHECK(split.xs[i] == bin[split.x_idx[i]].x);
        for (std::size_t i = 0; i < split.y_idx.size(); ++i)
            CHECK(split.ys[i] == bin[split.y_idx[i]].y);
        for (std::size_t i = 0; i < split.xy_idx.size(); ++i)
            CHECK(split.xy[i] == bin[split.xy_idx[i]]);
    };

    check_split(4, 2, 2);    // t = 0, nothing held out
    check_split(11, 2, 2);   // t = 1
    check_split(20, 2, 2);   // t = 4 capped at 2
    check_split(20, 5, 3);   // t = 4 capped at 4 and 3
    check_split(40, 9, 9);   // t = 9 uncapped
}

TEST_CASE("weights count held out occurrences") {
    SplitBins split;
    split.xs = {1, 1, 2};
    split.ys = {2};
    WeightTable wt = compute_weights(split, 2, 3);
    REQUIRE(wt.ax.size() == 2);
    REQUIRE(wt.ay.size() == 3);
    CHECK(wt.ax[0] == 2.0);
    CHECK(wt.ax[1] == 1.0);
    CHECK(wt.ay[0] == 0.0);
    CHECK(wt.ay[1] == 1.0);
    CHECK(wt.ay[2] == 0.0);
}

TEST_CASE("weighted counting path equals naive path equals the definition") {
    Rng rng(707);
    for (int trial = 0; trial < 60; ++trial) {
        int ell1 = 2 + static_cast<int>(rng.uniform_below(3));
        int ell2 = 2 + static_cast<int>(rng.uniform_below(2));
        std::size_t sigma = 8 + rng.uniform_below(10);
        auto bin = random_bin(rng, sigma, ell1, ell2);
        SplitBins split = split_for_weights(bin, ell1, ell2, rng);
        WeightTable wt = compute_weights(split, ell1, ell2);
        if (split.xy.size() < 4) continue;
        for (WeightedNorm norm : {WeightedNorm::pair_count, WeightedNorm::mean4}) {
            double fast = u_stat_weighted(split.xy, wt, norm);
            double naive = u_stat_weighted_naive(split.xy, wt, norm);
            double ref = u_weighted_ref(split.xy, wt, norm);
            CHECK(close_rel(fast, naive, 1e-10));
            CHECK(close_rel(fast, ref, 1e-10));
        }
        CHECK(std::abs(u_stat_weighted(split.xy, wt, WeightedNorm::mean4)) <= 2.0 + 1e-12);
    }
}

TEST_CASE("weighted aggregate recomputes from its own parts") {
    Rng rng(808);
    BinnedDataset binned;
    binned.ell1 = 2;
    binned.ell2 = 2;
    binned.bins.push_back(random_bin(rng, 12, 2, 2));
    binned.bins.push_back(random_bin(rng, 3, 2, 2));  // skipped
    binned.bins.push_back(random_bin(rng, 9, 2, 2));

    Rng stat_rng(909);
    WeightedStatistic ws = t_ci_weighted(binned, stat_rng);
    REQUIRE(ws.splits.size() == 3);
    REQUIRE(ws.weights.size() == 3);
    CHECK(ws.splits[1].xy.empty());

    double manual = 0.0;
    for (std::size_t m : {std::size_t{0}, std::size_t{2}}) {
        auto sigma = static_cast<double>(binned.bins[m].size());
        double omega = std::sqrt(std::min(sigma, 2.0) * std::min(sigma, 2.0));
        manual += sigma * omega * u_stat_weighted(ws.splits[m].xy, ws.weights[m]);
    }
    CHECK(ws.value == doctest::Approx(manual).epsilon(1e-12));

    // Frozen recomputation on untouched data reproduces the same value.
    CHECK(t_ci_weighted_frozen(binned, ws.splits) == ws.value);
}

TEST_CASE("frozen recomputation rejects mismatched splits") {
    Rng rng(111);
    BinnedDataset binned;
    binned.ell1 = binned.ell2 = 2;
    binned.bins.push_back(random_bin(rng, 8, 2, 2));
    std::vector<SplitBins> splits(2);  // wrong bin count
    CHECK_THROWS_AS(t_ci_weighted_frozen(binned, splits), ConfigError);
}

TEST_CASE("relabeling with recomputed weights leaves the weighted aggregate unchanged") {
    Rng rng(212);
    BinnedDataset binned;
    binned.ell1 = 3;
    binned.ell2 = 2;
    binned.bins.push_back(random_bin(rng, 14, 3, 2));
    binned.bins.push_back(random_bin(rng, 10, 3, 2));

    BinnedDataset relabeled = binned;
    const std::int32_t xmap[4] = {0, 2, 3, 1};
    for (auto& bin : relabeled.bins)
        for (auto& p : bin) p.x = xmap[p.x];

    // Identical split rng: the same positions are held out on both sides, so
    // the weights are the relabeled counts and the values must agree.
    Rng r1(4242);
    Rng r2(4242);
    WeightedStatistic a = t_ci_weighted(binned, r1);
    WeightedStatistic b = t_ci_weighted(relabeled, r2);
    CHECK(close_rel(a.value, b.value, 1e-12));
}

}  // TEST_SUITE

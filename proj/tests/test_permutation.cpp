#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <vector>

#include "cipt/binning.hpp"
#include "cipt/permutation.hpp"
#include "cipt/seed.hpp"
#include "cipt/statistics.hpp"
#include "doctest.h"

using namespace cipt;

namespace {

std::vector<CatPair> random_bin(Rng& rng, std::size_t size, int ell1 = 2, int ell2 = 2) {
    std::vector<CatPair> bin(size);
    for (auto& p : bin) {
        p.x = 1 + static_cast<std::int32_t>(rng.uniform_below(static_cast<std::uint64_t>(ell1)));
        p.y = 1 + static_cast<std::int32_t>(rng.uniform_below(static_cast<std::uint64_t>(ell2)));
    }
    return bin;
}

BinnedDataset make_binned(Rng& rng, std::vector<std::size_t> sizes, int ell1 = 2, int ell2 = 2) {
    BinnedDataset binned;
    binned.ell1 = ell1;
    binned.ell2 = ell2;
    for (std::size_t s : sizes) binned.bins.push_back(random_bin(rng, s, ell1, ell2));
    return binned;
}

// A statistic that separates arrangements: position-weighted sum of y labels.
double order_stat(const BinnedDataset& b) {
    double t = 0.0;
    for (std::size_t m = 0; m < b.bins.size(); ++m)
        for (std::size_t i = 0; i < b.bins[m].size(); ++i)
            t += (static_cast<double>(m) + 1.0) * (static_cast<double>(i) + 1.0) *
                 static_cast<double>(b.bins[m][i].y);
    return t;
}

// Test-local full-group enumeration, one next_permutation odometer per bin.
void enum_full_rec(const BinnedDataset& base, std::vector<std::vector<std::uint32_t>>& perms,
                   std::size_t m, const StatisticFn& stat, std::vector<double>& out) {
    if (m == perms.size()) {
        BinnedDataset tmp = base;
        for (std::size_t q = 0; q < perms.size(); ++q)
            for (std::size_t i = 0; i < perms[q].size(); ++i)
                tmp.bins[q][i].y = base.bins[q][perms[q][i]].y;
        out.push_back(stat(tmp));
        return;
    }
    auto& p = perms[m];
    do {
        enum_full_rec(base, perms, m + 1, stat, out);
    } while (std::next_permutation(p.begin(), p.end()));
}

std::vector<double> enum_full(const BinnedDataset& base, const StatisticFn& stat) {
    std::vector<std::vector<std::uint32_t>> perms(base.bin_count());
    for (std::size_t m = 0; m < base.bin_count(); ++m) {
        perms[m].resize(base.bins[m].size());
        std::iota(perms[m].begin(), perms[m].end(), 0u);
    }
    std::vector<double> out;
    enum_full_rec(base, perms, 0, stat, out);
    return out;
}

struct Cell {
    std::size_t bin;
    std::size_t begin;
    std::size_t size;
};

std::vector<Cell> cells_of(const BinnedDataset& binned) {
    std::vector<Cell> cells;
    for (std::size_t m = 0; m < binned.bin_count(); ++m) {
        const auto& off = binned.sub_offsets[m];
        for (std::size_t k = 0; k + 1 < off.size(); ++k)
            cells.push_back({m, off[k], static_cast<std::size_t>(off[k + 1] - off[k])});
    }
    return cells;
}

// Test-local cyclic enumeration: one shift counter per nonempty sub-cell.
std::vector<double> enum_cyclic(const BinnedDataset& base, const StatisticFn& stat) {
    auto cells = cells_of(base);
    std::vector<std::size_t> shift(cells.size(), 0);
    std::vector<double> out;
    for (;;) {
        BinnedDataset tmp = base;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const Cell& cell = cells[c];
            for (std::size_t i = 0; i < cell.size; ++i)
                tmp.bins[cell.bin][cell.begin + i].y =
                    base.bins[cell.bin][cell.begin + (i + shift[c]) % cell.size].y;
        }
        out.push_back(stat(tmp));
        std::size_t c = 0;
        for (; c < cells.size(); ++c) {
            if (cells[c].size == 0) continue;
            if (++shift[c] < cells[c].size) break;
            shift[c] = 0;
        }
        if (c == cells.size()) break;
    }
    return out;
}

bool is_rotation(const std::vector<std::uint32_t>& perm, std::size_t begin, std::size_t size) {
    if (size == 0) return true;
    std::size_t k = perm[begin] - begin;
    if (k >= size) return false;
    for (std::size_t i = 0; i < size; ++i)
        if (perm[begin + i] != begin + (i + k) % size) return false;
    return true;
}

}  // namespace

TEST_SUITE("permutation") {

TEST_CASE("group sizes") {
    Rng rng(1);
    CHECK(count_permutations(make_binned(rng, {3, 2}), PermutationMode::full()) == 12);
    CHECK(count_permutations(make_binned(rng, {4}), PermutationMode::full()) == 24);
    CHECK(count_permutations(make_binned(rng, {1, 1}), PermutationMode::full()) == 1);

    // Fine cells of sizes 3, 0, 2: empty cells count as 1.
    BinnedDataset db = make_binned(rng, {5});
    db.sub_offsets = {{0, 3, 3, 5}};
    CHECK(count_permutations(db, PermutationMode::cyclic()) == 6);

    BinnedDataset wide = make_binned(rng, {20, 20});
    BigInt k = count_permutations(wide, PermutationMode::full());
    BigInt fact20 = 1;
    for (int i = 2; i <= 20; ++i) fact20 *= i;
    CHECK(k == fact20 * fact20);
}

TEST_CASE("half mode counts only the retained pair part") {
    Rng rng(2);
    BinnedDataset binned = make_binned(rng, {12, 9});
    Rng stat_rng(3);
    WeightedStatistic ws = t_ci_weighted(binned, stat_rng);
    PermutationMode mode = PermutationMode::half(ws.splits);
    BigInt expect = 1;
    for (const auto& split : ws.splits) {
        for (std::size_t i = 2; i <= split.xy_idx.size(); ++i) expect *= static_cast<int>(i);
    }
    CHECK(count_permutations(binned, mode) == expect);
}

TEST_CASE("identity and composition behave like a group action") {
    Rng rng(4);
    BinnedDataset binned = make_binned(rng, {5, 3, 4});
    LocalPermutation id = identity_permutation(binned);
    BinnedDataset same = apply_permutation(binned, id);
    for (std::size_t m = 0; m < binned.bin_count(); ++m) CHECK(same.bins[m] == binned.bins[m]);

    LocalPermutation p1 = sample_local_permutation(binned, PermutationMode::full(), rng);
    LocalPermutation p2 = sample_local_permutation(binned, PermutationMode::full(), rng);
    BinnedDataset stepwise = apply_permutation(apply_permutation(binned, p1), p2);
    BinnedDataset composed = apply_permutation(binned, compose(p1, p2));
    for (std::size_t m = 0; m < binned.bin_count(); ++m)
        CHECK(stepwise.bins[m] == composed.bins[m]);
}

TEST_CASE("full permutations fix x and permute y within bins") {
    Rng rng(5);
    BinnedDataset binned = make_binned(rng, {6, 5}, 3, 3);
    for (int trial = 0; trial < 50; ++trial) {
        LocalPermutation perm = sample_local_permutation(binned, PermutationMode::full(), rng);
        BinnedDataset out = apply_permutation(binned, perm);
        for (std::size_t m = 0; m < binned.bin_count(); ++m) {
            std::vector<std::int32_t> y0, y1;
            for (std::size_t i = 0; i < binned.bins[m].size(); ++i) {
                CHECK(out.bins[m][i].x == binned.bins[m][i].x);
                y0.push_back(binned.bins[m][i].y);
                y1.push_back(out.bins[m][i].y);
            }
            std::sort(y0.begin(), y0.end());
            std::sort(y1.begin(), y1.end());
            CHECK(y0 == y1);
            // per_bin really is a permutation of 0..sigma-1
            auto sorted = perm.per_bin[m];
            std::sort(sorted.begin(), sorted.end());
            for (std::size_t i = 0; i < sorted.size(); ++i) REQUIRE(sorted[i] == i);
        }
    }
}

TEST_CASE("half permutations leave non target positions alone") {
    Rng rng(6);
    BinnedDataset binned = make_binned(rng, {14, 11});
    Rng stat_rng(7);
    WeightedStatistic ws = t_ci_weighted(binned, stat_rng);
    PermutationMode mode = PermutationMode::half(ws.splits);
    for (int trial = 0; trial < 30; ++trial) {
        LocalPermutation perm = sample_local_permutation(binned, mode, rng);
        for (std::size_t m = 0; m < binned.bin_count(); ++m) {
            std::set<std::uint32_t> targets(ws.splits[m].xy_idx.begin(),
                                            ws.splits[m].xy_idx.end());
            std::vector<std::uint32_t> moved_from, moved_to;
            for (std::uint32_t i = 0; i < perm.per_bin[m].size(); ++i) {
                if (targets.count(i) == 0) {
                    CHECK(perm.per_bin[m][i] == i);
                } else {
                    moved_to.push_back(i);
                    moved_from.push_back(perm.per_bin[m][i]);
                }
            }
            std::sort(moved_from.begin(), moved_from.end());
            CHECK(moved_from == std::vector<std::uint32_t>(targets.begin(), targets.end()));
        }
    }
}

TEST_CASE("cyclic permutations are per cell rotations") {
    Rng rng(8);
    BinnedDataset binned = make_binned(rng, {7, 4});
    binned.sub_offsets = {{0, 4, 7}, {0, 1, 4}};
    for (int trial = 0; trial < 40; ++trial) {
        LocalPermutation perm = sample_local_permutation(binned, PermutationMode::cyclic(), rng);
        for (const Cell& cell : cells_of(binned))
            CHECK(is_rotation(perm.per_bin[cell.bin], cell.begin, cell.size));
    }
    // Composing with a fixed cyclic shift stays cyclic.
    LocalPermutation a = sample_local_permutation(binned, PermutationMode::cyclic(), rng);
    LocalPermutation b = sample_local_permutation(binned, PermutationMode::cyclic(), rng);
    LocalPermutation c = compose(a, b);
    for (const Cell& cell : cells_of(binned))
        CHECK(is_rotation(c.per_bin[cell.bin], cell.begin, cell.size));
}

TEST_CASE("a four cell admits exactly four shifts") {
    Rng rng(9);
    BinnedDataset binned = make_binned(rng, {4});
    binned.sub_offsets = {{0, 4}};
    std::set<std::vector<std::uint32_t>> seen;
    for (int trial = 0; trial < 400; ++trial)
        seen.insert(sample_local_permutation(binned, PermutationMode::cyclic(), rng).per_bin[0]);
    REQUIRE(seen.size() == 4);
    for (const auto& perm : seen) CHECK(is_rotation(perm, 0, 4));
}

TEST_CASE("cyclic mode requires double binned data") {
    Rng rng(10);
    BinnedDataset binned = make_binned(rng, {6});
    CHECK_THROWS_AS(sample_local_permutation(binned, PermutationMode::cyclic(), rng), ConfigError);
    CHECK_THROWS_AS(count_permutations(binned, PermutationMode::cyclic()), ConfigError);
}

TEST_CASE("exhaustive p value matches a test local enumeration") {
    Rng rng(11);
    BinnedDataset binned = make_binned(rng, {3, 4}, 2, 3);
    StatisticFn stat = order_stat;
    std::vector<double> all = enum_full(binned, stat);
    REQUIRE(all.size() == 144);
    double observed = stat(binned);
    double count = 0.0;
    for (double v : all) count += v >= observed ? 1.0 : 0.0;

    CalibrationResult res = exact_pvalue(stat, binned, PermutationMode::full());
    CHECK(res.exhaustive);
    CHECK(res.B == 0);
    CHECK(res.group_size == 144);
    REQUIRE(res.permuted.size() == 144);
    CHECK(res.p_value == count / 144.0);
    CHECK(res.p_value >= 1.0 / 144.0);

    auto lib = res.permuted;
    std::sort(lib.begin(), lib.end());
    std::sort(all.begin(), all.end());
    CHECK(lib == all);
}

TEST_CASE("tiny bins still enumerate their arrangements") {
    Rng rng(12);
    BinnedDataset binned = make_binned(rng, {2, 3, 1});
    StatisticFn stat = order_stat;
    CalibrationResult res = exact_pvalue(stat, binned, PermutationMode::full());
    CHECK(res.group_size == 12);
    CHECK(res.permuted.size() == 12);
    auto all = enum_full(binned, stat);
    std::sort(all.begin(), all.end());
    auto lib = res.permuted;
    std::sort(lib.begin(), lib.end());
    CHECK(lib == all);
}

TEST_CASE("a strict two point maximum gives p one half") {
    BinnedDataset binned;
    binned.ell1 = 1;
    binned.ell2 = 2;
    binned.bins = {{{1, 2}, {1, 1}}};
    StatisticFn first_y = [](const BinnedDataset& b) {
        return static_cast<double>(b.bins[0][0].y);
    };
    CalibrationResult res = exact_pvalue(first_y, binned, PermutationMode::full());
    CHECK(res.group_size == 2);
    CHECK(res.p_value == 0.5);
}

TEST_CASE("constant statistics give p one") {
    Rng rng(13);
    BinnedDataset binned = make_binned(rng, {4, 3});
    StatisticFn constant = [](const BinnedDataset&) { return 1.25; };
    CHECK(exact_pvalue(constant, binned, PermutationMode::full()).p_value == 1.0);
    CalibrationResult mc = mc_pvalue(constant, binned, PermutationMode::full(), 100, rng);
    CHECK(mc.p_value == 1.0);
}

TEST_CASE("the enumeration cap is enforced") {
    Rng rng(14);
    BinnedDataset binned = make_binned(rng, {8, 4});  // 8! * 4! is under the default cap
    CHECK_NOTHROW(exact_pvalue(order_stat, binned, PermutationMode::full()));
    CHECK_THROWS_AS(exact_pvalue(order_stat, binned, PermutationMode::full(), 1000), ConfigError);
    BinnedDataset big = make_binned(rng, {13});  // 13! over the default cap
    CHECK_THROWS_AS(exact_pvalue(order_stat, big, PermutationMode::full()), ConfigError);
}

TEST_CASE("monte carlo p value follows the add one formula") {
    Rng rng(15);
    BinnedDataset binned = make_binned(rng, {5, 4}, 2, 3);
    const int B = 300;
    CalibrationResult res = mc_pvalue(order_stat, binned, PermutationMode::full(), B, rng);
    CHECK_FALSE(res.exhaustive);
    CHECK(res.B == B);
    REQUIRE(res.permuted.size() == B);
    double count = 0.0;
    for (double v : res.permuted) count += v >= res.observed ? 1.0 : 0.0;
    CHECK(res.p_value == (count + 1.0) / (B + 1.0));
    CHECK(res.p_value >= 1.0 / (B + 1.0));
    CHECK(res.p_value <= 1.0);
}

TEST_CASE("monte carlo and exhaustive p values agree within the dkw band") {
    Rng rng(16);
    BinnedDataset binned = make_binned(rng, {5}, 2, 2);
    const int B = 2000;
    double band = std::sqrt(std::log(2.0 / 0.01) / (2.0 * B));
    CalibrationResult ex = exact_pvalue(order_stat, binned, PermutationMode::full());
    CalibrationResult mc = mc_pvalue(order_stat, binned, PermutationMode::full(), B, rng);
    CHECK(std::abs(mc.p_value - ex.p_value) <= band);
}

TEST_CASE("cyclic calibration enumerates when the group is small") {
    Rng rng(17);
    BinnedDataset binned = make_binned(rng, {5, 4}, 2, 3);
    binned.sub_offsets = {{0, 3, 5}, {0, 2, 3, 4}};  // cell sizes 3,2,2,1
    StatisticFn stat = order_stat;

    std::vector<double> all = enum_cyclic(binned, stat);
    REQUIRE(all.size() == 12);
    CalibrationResult ex = exact_pvalue(stat, binned, PermutationMode::cyclic());
    REQUIRE(ex.permuted.size() == 12);
    auto lib = ex.permuted;
    std::sort(lib.begin(), lib.end());
    std::sort(all.begin(), all.end());
    CHECK(lib == all);

    CalibrationResult mc = mc_pvalue(stat, binned, PermutationMode::cyclic(), 100, rng);
    CHECK(mc.exhaustive);
    CHECK(mc.p_value == ex.p_value);
}

TEST_CASE("cyclic sampling without replacement draws distinct shifts") {
    Rng rng(18);
    BinnedDataset binned = make_binned(rng, {16, 11}, 2, 2);
    binned.sub_offsets = {{0, 5, 9, 12, 16}, {0, 4, 8, 11}};  // group 5*4*3*4*4*4*3 = 11520
    const int B = 400;
    CalibrationResult mc = mc_pvalue(order_stat, binned, PermutationMode::cyclic(), B, rng);
    CHECK_FALSE(mc.exhaustive);
    REQUIRE(mc.permuted.size() == B);

    CalibrationResult ex = exact_pvalue(order_stat, binned, PermutationMode::cyclic());
    CHECK(ex.group_size == 11520);
    double band = std::sqrt(std::log(2.0 / 0.01) / (2.0 * B));
    CHECK(std::abs(mc.p_value - ex.p_value) <= band);
}

TEST_CASE("permuting the data leaves the exhaustive list unchanged") {
    Rng rng(19);
    BinnedDataset binned = make_binned(rng, {4, 3, 2}, 2, 3);
    LocalPermutation g = sample_local_permutation(binned, PermutationMode::full(), rng);
    BinnedDataset moved = apply_permutation(binned, g);

    CalibrationResult a = exact_pvalue(order_stat, binned, PermutationMode::full());
    CalibrationResult b = exact_pvalue(order_stat, moved, PermutationMode::full());
    auto va = a.permuted;
    auto vb = b.permuted;
    std::sort(va.begin(), va.end());
    std::sort(vb.begin(), vb.end());
    CHECK(va == vb);
    // The permuted observed value sits somewhere in the shared orbit.
    CHECK(std::binary_search(va.begin(), va.end(), b.observed));
}

TEST_CASE("exact p values are super uniform under an exchangeable null") {
    // Fixed label layout 4/3/3 keeps the group size at 4!3!3! = 864.
    const std::vector<int> labels{1, 1, 1, 1, 2, 2, 2, 3, 3, 3};
    const double px1[3] = {0.5, 0.7, 0.3};
    const double py1[3] = {0.4, 0.5, 0.6};
    const double alphas[3] = {0.01, 0.05, 0.1};
    const int reps = 5000;
    int hits[3] = {0, 0, 0};
    Rng rng(20);
    StatisticFn stat = t_ci;
    for (int r = 0; r < reps; ++r) {
        BinnedDataset binned;
        binned.ell1 = 2;
        binned.ell2 = 2;
        binned.bins.resize(3);
        for (int lab : labels) {
            CatPair p;
            p.x = rng.bernoulli(px1[lab - 1]) ? 1 : 2;
            p.y = rng.bernoulli(py1[lab - 1]) ? 1 : 2;
            binned.bins[static_cast<std::size_t>(lab - 1)].push_back(p);
        }
        double p = exact_pvalue(stat, binned, PermutationMode::full()).p_value;
        for (int a = 0; a < 3; ++a) hits[a] += p <= alphas[a] ? 1 : 0;
    }
    for (int a = 0; a < 3; ++a) {
        double rate = hits[a] / static_cast<double>(reps);
        double se = std::sqrt(alphas[a] * (1.0 - alphas[a]) / reps);
        CHECK(rate <= alphas[a] + 3.0 * se);
    }
}

TEST_CASE("randomized decision handles ties at the threshold") {
    CalibrationResult res;
    res.exhaustive = true;
    res.permuted = {1.0, 1.0, 2.0, 2.0, 3.0};
    res.group_size = 5;
    res.observed = 2.0;
    Rng rng(21);
    RandomizedDecision d = randomized_decision(res, 0.4, rng);
    CHECK(d.threshold == 2.0);
    CHECK(d.a == doctest::Approx(0.5).epsilon(1e-12));

    res.observed = 3.0;
    CHECK(randomized_decision(res, 0.4, rng).reject);
    res.observed = 1.0;
    CHECK_FALSE(randomized_decision(res, 0.4, rng).reject);
}

TEST_CASE("distinct values reject at the unique maximum") {
    CalibrationResult res;
    res.exhaustive = true;
    res.group_size = 100;
    for (int i = 1; i <= 100; ++i) res.permuted.push_back(i);
    res.observed = 100.0;
    Rng rng(22);
    RandomizedDecision d = randomized_decision(res, 0.05, rng);
    CHECK(d.reject);
    CHECK(d.threshold == 95.0);
}

TEST_CASE("constant statistics randomize with probability alpha") {
    CalibrationResult res;
    res.exhaustive = true;
    res.group_size = 24;
    res.permuted.assign(24, 7.5);
    res.observed = 7.5;
    Rng rng(23);
    RandomizedDecision d = randomized_decision(res, 0.05, rng);
    CHECK(d.a == doctest::Approx(0.05).epsilon(1e-12));

    int rejects = 0;
    const int reps = 20000;
    for (int r = 0; r < reps; ++r) rejects += randomized_decision(res, 0.3, rng).reject ? 1 : 0;
    double se = std::sqrt(0.3 * 0.7 / reps);
    CHECK(std::abs(rejects / static_cast<double>(reps) - 0.3) < 5.0 * se);
}

TEST_CASE("monte carlo results count as their own group") {
    CalibrationResult res;
    res.exhaustive = false;
    res.B = 4;
    res.permuted = {1.0, 2.0, 3.0, 4.0};
    res.observed = 5.0;
    Rng rng(24);
    RandomizedDecision d = randomized_decision(res, 0.2, rng);
    CHECK(d.threshold == 4.0);
    CHECK(d.reject);
    CHECK_THROWS_AS(randomized_decision(res, 0.0, rng), ConfigError);
    CHECK_THROWS_AS(randomized_decision(res, 1.0, rng), ConfigError);
}

TEST_CASE("poissonize draws a thinned subsample in original order") {
    Dataset ds;
    ds.x_spec = AxisSpec::categorical(2);
    ds.y_spec = AxisSpec::categorical(2);
    Rng fill(25);
    for (int i = 0; i < 50; ++i) {
        ds.x.push_back(1 + static_cast<double>(fill.uniform_below(2)));
        ds.y.push_back(1 + static_cast<double>(fill.uniform_below(2)));
        ds.z.push_back(i / 50.0);
    }

    Rng rng(26);
    double total = 0.0;
    int rounds = 0;
    for (int trial = 0; trial < 300; ++trial) {
        PoissonSample s = poissonize(ds, 50, 0.5, rng);
        CHECK_FALSE((s.drawn > 50 && !s.truncated));
        if (s.truncated) {
            CHECK(s.data.size() == 0);
            continue;
        }
        REQUIRE(s.data.size() == s.drawn);
        // Rows are original rows, in original order (z was strictly increasing).
        for (std::size_t i = 0; i + 1 < s.data.size(); ++i) CHECK(s.data.z[i] < s.data.z[i + 1]);
        for (std::size_t i = 0; i < s.data.size(); ++i) {
            auto row = static_cast<std::size_t>(s.data.z[i] * 50.0 + 0.5);
            CHECK(s.data.x[i] == ds.x[row]);
            CHECK(s.data.y[i] == ds.y[row]);
        }
        total += static_cast<double>(s.drawn);
        ++rounds;
    }
    double mean = total / rounds;
    CHECK(std::abs(mean - 25.0) < 5.0 * std::sqrt(25.0 / rounds));
}

TEST_CASE("poissonize validates its inputs") {
    Dataset ds;
    ds.x_spec = AxisSpec::categorical(2);
    ds.y_spec = AxisSpec::categorical(2);
    ds.x = {1, 2};
    ds.y = {1, 2};
    ds.z = {0.1, 0.9};
    Rng rng(27);
    CHECK_THROWS_AS(poissonize(ds, 10, 1.0, rng), DataError);
    CHECK_THROWS_AS(poissonize(ds, 2, 0.25, rng), ConfigError);
}

TEST_CASE("run_test composes the full pipeline deterministically") {
    Rng fill(28);
    Dataset ds;
    ds.x_spec = AxisSpec::categorical(2);
    ds.y_spec = AxisSpec::categorical(2);
    for (int i = 0; i < 40; ++i) {
        ds.x.push_back(1 + static_cast<double>(fill.uniform_below(2)));
        ds.y.push_back(1 + static_cast<double>(fill.uniform_below(2)));
        ds.z.push_back(fill.uniform01());
    }
    TestConfig config;
    config.bins = 4;
    config.B = 200;
    config.seed = 99;
    TestOutcome a = run_test(ds, config);
    TestOutcome b = run_test(ds, config);
    CHECK(a.statistic == b.statistic);
    CHECK(a.p_value == b.p_value);
    CHECK(a.reject == b.reject);
    CHECK(a.n_used == 40);
    CHECK(a.config.bins == 4);

    // The statistic is the plain aggregate of the same binning.
    BinnedDataset binned = assign_bins(ds, make_equal_partition(4));
    CHECK(a.statistic == t_ci(binned));
    CHECK(a.p_value >= 1.0 / 201.0);
    CHECK(a.p_value <= 1.0);
}

TEST_CASE("run_test rejects inconsistent configurations") {
    Dataset ds;
    ds.x_spec = AxisSpec::categorical(2);
    ds.y_spec = AxisSpec::categorical(2);
    ds.x = {1, 2, 1, 2};
    ds.y = {1, 1, 2, 2};
    ds.z = {0.1, 0.4, 0.6, 0.9};

    TestConfig bad;
    bad.bins = 2;
    bad.alpha = 1.5;
    CHECK_THROWS_AS(run_test(ds, bad), ConfigError);

    TestConfig cyc;
    cyc.bins = 2;
    cyc.perm = PermKind::cyclic;  // no sub_bins, so no fine structure
    CHECK_THROWS_AS(run_test(ds, cyc), ConfigError);
}

TEST_CASE("large monte carlo budgets reproduce the exhaustive decision") {
    // Single bin of 8, alpha 1/2: the two calibrations may only disagree when
    // the exact p value sits within the Monte Carlo error of 1/2.
    Rng rng(29);
    int agree = 0;
    const int trials = 100;
    for (int t = 0; t < trials; ++t) {
        Dataset ds;
        ds.x_spec = AxisSpec::categorical(2);
        ds.y_spec = AxisSpec::categorical(2);
        for (int i = 0; i < 8; ++i) {
            ds.x.push_back(1 + static_cast<double>(rng.uniform_below(2)));
            ds.y.push_back(1 + static_cast<double>(rng.uniform_below(2)));
            ds.z.push_back(0.3);
        }
        TestConfig mc;
        mc.bins = 1;
        mc.B = 10000;
        mc.alpha = 0.5;
        mc.seed = 1000 + static_cast<std::uint64_t>(t);
        TestConfig ex = mc;
        ex.calibration = CalibKind::exact;
        agree += run_test(ds, mc).reject == run_test(ds, ex).reject ? 1 : 0;
    }
    CHECK(agree >= 99);
}

TEST_CASE("poisson options thin truncate or empty out the sample") {
    Rng fill(30);
    Dataset ds;
    ds.x_spec = AxisSpec::categorical(2);
    ds.y_spec = AxisSpec::categorical(2);
    for (int i = 0; i < 30; ++i) {
        ds.x.push_back(1 + static_cast<double>(fill.uniform_below(2)));
        ds.y.push_back(1 + static_cast<double>(fill.uniform_below(2)));
        ds.z.push_back(fill.uniform01());
    }

    TestConfig config;
    config.bins = 2;
    config.B = 20;
    config.poisson = PoissonOption::full;

    bool saw_truncated = false;
    bool saw_thinned = false;
    for (std::uint64_t seed = 0; seed < 60 && !(saw_truncated && saw_thinned); ++seed) {
        config.seed = seed;
        TestOutcome out = run_test(ds, config);
        if (out.truncated) {
            saw_truncated = true;
            CHECK_FALSE(out.reject);
            CHECK(out.p_value == 1.0);
        } else {
            saw_thinned = true;
            CHECK(out.n_used <= 30);
        }
    }
    CHECK(saw_truncated);
    CHECK(saw_thinned);

    // Hunt a Poisson(n/2) draw of zero: empty data, zero statistic, p = 1.
    Dataset tiny;
    tiny.x_spec = AxisSpec::categorical(2);
    tiny.y_spec = AxisSpec::categorical(2);
    tiny.x = {1, 2, 1, 2};
    tiny.y = {1, 1, 2, 2};
    tiny.z = {0.1, 0.4, 0.6, 0.9};
    TestConfig half;
    half.bins = 2;
    half.B = 10;
    half.poisson = PoissonOption::half;
    bool saw_empty = false;
    for (std::uint64_t seed = 0; seed < 500 && !saw_empty; ++seed) {
        half.seed = seed;
        TestOutcome out = run_test(tiny, half);
        if (out.truncated || out.n_used > 0) continue;
        saw_empty = true;
        CHECK(out.statistic == 0.0);
        CHECK(out.p_value == 1.0);
        CHECK_FALSE(out.reject);
    }
    CHECK(saw_empty);
}

TEST_CASE("weighted half calibration freezes splits across permutations") {
    Rng fill(31);
    Dataset ds;
    ds.x_spec = AxisSpec::categorical(2);
    ds.y_spec = AxisSpec::categorical(2);
    for (int i = 0; i < 60; ++i) {
        ds.x.push_back(1 + static_cast<double>(fill.uniform_below(2)));
        ds.y.push_back(1 + static_cast<double>(fill.uniform_below(2)));
        ds.z.push_back(fill.uniform01());
    }
    TestConfig config;
    config.bins = 3;
    config.stat = StatKind::weighted;
    config.perm = PermKind::half;
    config.B = 150;
    config.seed = 12;
    TestOutcome out = run_test(ds, config);
    CHECK(out.p_value >= 1.0 / 151.0);
    CHECK(out.p_value <= 1.0);
    CHECK(std::isfinite(out.statistic));
    TestOutcome again = run_test(ds, config);
    CHECK(out.statistic == again.statistic);
    CHECK(out.p_value == again.p_value);
}

}  // TEST_SUITE

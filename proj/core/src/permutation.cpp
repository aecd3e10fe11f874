#include "cipt/permutation.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <set>
#include <utility>

#include "cipt/binning.hpp"

namespace cipt {

namespace {

BigInt factorial(std::size_t n) {
    BigInt f = 1;
    for (std::size_t i = 2; i <= n; ++i) f *= static_cast<unsigned>(i);
    return f;
}

// One fine sub-cell, addressed inside its bin.
struct SubCell {
    std::uint32_t bin = 0;
    std::uint32_t begin = 0;
    std::uint32_t size = 0;
};

std::vector<SubCell> sub_cells(const BinnedDataset& binned, std::uint32_t min_size) {
    if (!binned.double_binned()) {
        throw ConfigError("cyclic permutations require a double-binned dataset");
    }
    std::vector<SubCell> cells;
    for (std::size_t m = 0; m < binned.bins.size(); ++m) {
        const auto& off = binned.sub_offsets[m];
        for (std::size_t j = 0; j + 1 < off.size(); ++j) {
            std::uint32_t size = off[j + 1] - off[j];
            if (size >= min_size) {
                cells.push_back({static_cast<std::uint32_t>(m), off[j], size});
            }
        }
    }
    return cells;
}

void check_half_targets(const BinnedDataset& binned, const PermutationMode& mode) {
    if (mode.half_targets.size() != binned.bins.size()) {
        throw ConfigError("split table does not match bin structure");
    }
    for (std::size_t m = 0; m < binned.bins.size(); ++m) {
        for (std::uint32_t i : mode.half_targets[m]) {
            if (i >= binned.bins[m].size()) {
                throw ConfigError("split table does not match bin structure");
            }
        }
    }
}

void fill_identity(const BinnedDataset& binned, LocalPermutation& perm) {
    perm.per_bin.resize(binned.bins.size());
    for (std::size_t m = 0; m < binned.bins.size(); ++m) {
        perm.per_bin[m].resize(binned.bins[m].size());
        std::iota(perm.per_bin[m].begin(), perm.per_bin[m].end(), 0u);
    }
}

void sample_full_into(LocalPermutation& perm, Rng& rng) {
    for (auto& p : perm.per_bin) {
        std::iota(p.begin(), p.end(), 0u);
        rng.shuffle(std::span<std::uint32_t>(p));
    }
}

void sample_half_into(const PermutationMode& mode, LocalPermutation& perm, Rng& rng,
                      std::vector<std::uint32_t>& scratch) {
    for (std::size_t m = 0; m < perm.per_bin.size(); ++m) {
        auto& p = perm.per_bin[m];
        std::iota(p.begin(), p.end(), 0u);
        const auto& targets = mode.half_targets[m];
        if (targets.size() < 2) continue;
        scratch.assign(targets.begin(), targets.end());
        rng.shuffle(std::span<std::uint32_t>(scratch));
        for (std::size_t j = 0; j < targets.size(); ++j) p[targets[j]] = scratch[j];
    }
}

void shifts_into(const std::vector<SubCell>& cells, const std::vector<std::uint32_t>& shifts,
                 LocalPermutation& perm) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const SubCell& cell = cells[c];
        std::uint32_t k = shifts[c];
        auto& p = perm.per_bin[cell.bin];
        for (std::uint32_t i = 0; i < cell.size; ++i) {
            p[cell.begin + i] = cell.begin + (i + k) % cell.size;
        }
    }
}

// dst must share bin shapes with src; rewrites Y labels only.
void gather_y(const BinnedDataset& src, const LocalPermutation& perm, BinnedDataset& dst) {
    for (std::size_t m = 0; m < src.bins.size(); ++m) {
        const auto& from = src.bins[m];
        const auto& p = perm.per_bin[m];
        auto& to = dst.bins[m];
        for (std::size_t i = 0; i < from.size(); ++i) to[i].y = from[p[i]].y;
    }
}

// Units of an exhaustive enumeration: index sets permuted independently.
// Bins and cells with fewer than 2 members only contribute the identity, so
// the units below cover the whole group exactly.
struct EnumUnit {
    std::uint32_t bin = 0;
    std::vector<std::uint32_t> positions;  // bin-local positions being permuted
    std::vector<std::uint32_t> state;      // current gather order of positions
    std::uint32_t shift = 0;               // cyclic mode: current shift
    std::uint32_t size = 0;                // cyclic mode: cell size
    bool cyclic = false;
};

std::vector<EnumUnit> enumeration_units(const BinnedDataset& binned,
                                        const PermutationMode& mode) {
    std::vector<EnumUnit> units;
    switch (mode.kind) {
        case PermKind::full:
            for (std::size_t m = 0; m < binned.bins.size(); ++m) {
                if (binned.bins[m].size() < 2) continue;
                EnumUnit u;
                u.bin = static_cast<std::uint32_t>(m);
                u.positions.resize(binned.bins[m].size());
                std::iota(u.positions.begin(), u.positions.end(), 0u);
                u.state = u.positions;
                units.push_back(std::move(u));
            }
            break;
        case PermKind::half:
            check_half_targets(binned, mode);
            for (std::size_t m = 0; m < binned.bins.size(); ++m) {
                if (mode.half_targets[m].size() < 2) continue;
                EnumUnit u;
                u.bin = static_cast<std::uint32_t>(m);
                u.positions = mode.half_targets[m];
                u.state = u.positions;
                units.push_back(std::move(u));
            }
            break;
        case PermKind::cyclic:
            for (const SubCell& cell : sub_cells(binned, 2)) {
                EnumUnit u;
                u.bin = cell.bin;
                u.cyclic = true;
                u.size = cell.size;
                u.positions.resize(cell.size);
                std::iota(u.positions.begin(), u.positions.end(), cell.begin);
                units.push_back(std::move(u));
            }
            break;
    }
    return units;
}

void unit_into_perm(const EnumUnit& u, LocalPermutation& perm) {
    auto& p = perm.per_bin[u.bin];
    if (u.cyclic) {
        for (std::uint32_t i = 0; i < u.size; ++i) {
            p[u.positions[i]] = u.positions[(i + u.shift) % u.size];
        }
    } else {
        for (std::size_t i = 0; i < u.positions.size(); ++i) p[u.positions[i]] = u.state[i];
    }
}

// Odometer step over all units; false once every unit has wrapped.
bool advance(std::vector<EnumUnit>& units) {
    for (EnumUnit& u : units) {
        if (u.cyclic) {
            if (++u.shift < u.size) return true;
            u.shift = 0;
        } else {
            if (std::next_permutation(u.state.begin(), u.state.end())) return true;
        }
    }
    return false;
}

double mc_formula(const std::vector<double>& permuted, double observed) {
    std::size_t count = 0;
    for (double v : permuted) {
        if (v >= observed) ++count;
    }
    return static_cast<double>(count + 1) / static_cast<double>(permuted.size() + 1);
}

CalibrationResult mc_cyclic(const StatisticFn& statistic, const BinnedDataset& binned,
                            const PermutationMode& mode, int B, Rng& rng) {
    std::vector<SubCell> cells = sub_cells(binned, 2);
    BigInt group = count_permutations(binned, mode);

    CalibrationResult out;
    out.observed = statistic(binned);

    LocalPermutation perm;
    fill_identity(binned, perm);
    BinnedDataset scratch = binned;
    std::vector<std::uint32_t> shifts(cells.size(), 0);

    if (group <= B) {
        // The whole cyclic group fits in the budget: enumerate it instead of
        // drawing without replacement until exhaustion.
        out.exhaustive = true;
        out.group_size = group;
        while (true) {
            shifts_into(cells, shifts, perm);
            gather_y(binned, perm, scratch);
            out.permuted.push_back(statistic(scratch));
            std::size_t c = 0;
            for (; c < cells.size(); ++c) {
                if (++shifts[c] < cells[c].size) break;
                shifts[c] = 0;
            }
            if (c == cells.size()) break;
        }
        std::size_t count = 0;
        for (double v : out.permuted) {
            if (v >= out.observed) ++count;
        }
        out.p_value = static_cast<double>(count) / static_cast<double>(out.permuted.size());
        return out;
    }

    out.B = B;
    std::set<std::vector<std::uint32_t>> seen;
    while (out.permuted.size() < static_cast<std::size_t>(B)) {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            shifts[c] = static_cast<std::uint32_t>(rng.uniform_below(cells[c].size));
        }
        if (!seen.insert(shifts).second) continue;  // drawn before; redraw
        shifts_into(cells, shifts, perm);
        gather_y(binned, perm, scratch);
        out.permuted.push_back(statistic(scratch));
    }
    out.p_value = mc_formula(out.permuted, out.observed);
    return out;
}

}  // namespace

PermutationMode PermutationMode::full() { return {PermKind::full, {}}; }

PermutationMode PermutationMode::half(const std::vector<SplitBins>& splits) {
    PermutationMode mode;
    mode.kind = PermKind::half;
    mode.half_targets.reserve(splits.size());
    for (const SplitBins& s : splits) mode.half_targets.push_back(s.xy_idx);
    return mode;
}

PermutationMode PermutationMode::cyclic() { return {PermKind::cyclic, {}}; }

LocalPermutation identity_permutation(const BinnedDataset& binned) {
    LocalPermutation perm;
    fill_identity(binned, perm);
    return perm;
}

LocalPermutation compose(const LocalPermutation& first, const LocalPermutation& second) {
    if (first.per_bin.size() != second.per_bin.size()) {
        throw ConfigError("permutations have mismatched bin structure");
    }
    LocalPermutation out;
    out.per_bin.resize(first.per_bin.size());
    for (std::size_t m = 0; m < first.per_bin.size(); ++m) {
        if (first.per_bin[m].size() != second.per_bin[m].size()) {
            throw ConfigError("permutations have mismatched bin structure");
        }
        out.per_bin[m].resize(first.per_bin[m].size());
        for (std::size_t i = 0; i < first.per_bin[m].size(); ++i) {
            out.per_bin[m][i] = first.per_bin[m][second.per_bin[m][i]];
        }
    }
    return out;
}

LocalPermutation sample_local_permutation(const BinnedDataset& binned,
                                          const PermutationMode& mode, Rng& rng) {
    LocalPermutation perm;
    fill_identity(binned, perm);
    switch (mode.kind) {
        case PermKind::full:
            sample_full_into(perm, rng);
            break;
        case PermKind::half: {
            check_half_targets(binned, mode);
            std::vector<std::uint32_t> scratch;
            sample_half_into(mode, perm, rng, scratch);
            break;
        }
        case PermKind::cyclic: {
            std::vector<SubCell> cells = sub_cells(binned, 2);
            std::vector<std::uint32_t> shifts(cells.size());
            for (std::size_t c = 0; c < cells.size(); ++c) {
                shifts[c] = static_cast<std::uint32_t>(rng.uniform_below(cells[c].size));
            }
            shifts_into(cells, shifts, perm);
            break;
        }
    }
    return perm;
}

BigInt count_permutations(const BinnedDataset& binned, const PermutationMode& mode) {
    BigInt total = 1;
    switch (mode.kind) {
        case PermKind::full:
            for (const auto& bin : binned.bins) total *= factorial(bin.size());
            break;
        case PermKind::half:
            check_half_targets(binned, mode);
            for (const auto& targets : mode.half_targets) total *= factorial(targets.size());
            break;
        case PermKind::cyclic:
            for (const SubCell& cell : sub_cells(binned, 2)) total *= cell.size;
            break;
    }
    return total;
}

BinnedDataset apply_permutation(const BinnedDataset& binned, const LocalPermutation& perm) {
    if (perm.per_bin.size() != binned.bins.size()) {
        throw ConfigError("permutation does not match bin structure");
    }
    for (std::size_t m = 0; m < binned.bins.size(); ++m) {
        if (perm.per_bin[m].size() != binned.bins[m].size()) {
            throw ConfigError("permutation does not match bin structure");
        }
    }
    BinnedDataset out = binned;
    gather_y(binned, perm, out);
    return out;
}

CalibrationResult mc_pvalue(const StatisticFn& statistic, const BinnedDataset& binned,
                            const PermutationMode& mode, int B, Rng& rng) {
    if (B < 1) throw ConfigError("B must be at least 1");
    if (mode.kind == PermKind::cyclic) return mc_cyclic(statistic, binned, mode, B, rng);
    if (mode.kind == PermKind::half) check_half_targets(binned, mode);

    CalibrationResult out;
    out.B = B;
    out.observed = statistic(binned);
    out.permuted.reserve(static_cast<std::size_t>(B));

    LocalPermutation perm;
    fill_identity(binned, perm);
    BinnedDataset scratch = binned;
    std::vector<std::uint32_t> half_scratch;

    // Per-draw seeds, so the B evaluations could be farmed out to workers
    // without changing the stream each one sees.
    SeedTree draws(rng.next_u64());
    for (int i = 0; i < B; ++i) {
        Rng draw_rng(draws.child(static_cast<std::uint64_t>(i)));
        if (mode.kind == PermKind::full) {
            sample_full_into(perm, draw_rng);
        } else {
            sample_half_into(mode, perm, draw_rng, half_scratch);
        }
        gather_y(binned, perm, scratch);
        out.permuted.push_back(statistic(scratch));
    }
    out.p_value = mc_formula(out.permuted, out.observed);
    return out;
}

CalibrationResult exact_pvalue(const StatisticFn& statistic, const BinnedDataset& binned,
                               const PermutationMode& mode, std::uint64_t cap) {
    BigInt group = count_permutations(binned, mode);
    if (group > cap) throw ConfigError("permutation enumeration cap exceeded");

    CalibrationResult out;
    out.exhaustive = true;
    out.group_size = group;
    out.observed = statistic(binned);

    std::vector<EnumUnit> units = enumeration_units(binned, mode);
    LocalPermutation perm;
    fill_identity(binned, perm);
    BinnedDataset scratch = binned;

    while (true) {
        for (const EnumUnit& u : units) unit_into_perm(u, perm);
        gather_y(binned, perm, scratch);
        out.permuted.push_back(statistic(scratch));
        if (!advance(units)) break;
    }

    std::size_t count = 0;
    for (double v : out.permuted) {
        if (v >= out.observed) ++count;
    }
    out.p_value = static_cast<double>(count) / static_cast<double>(out.permuted.size());
    return out;
}

RandomizedDecision randomized_decision(const CalibrationResult& result, double alpha, Rng& rng) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");

    std::vector<double> vals = result.permuted;
    double group;
    double weight;
    if (result.exhaustive) {
        group = result.group_size.convert_to<double>();
        weight = group / static_cast<double>(vals.size());
    } else {
        vals.push_back(result.observed);
        group = static_cast<double>(result.B + 1);
        weight = 1.0;
    }
    std::sort(vals.begin(), vals.end());

    // Rank k = K - floor(K alpha) in the full multiset; entry i of the sorted
    // list covers ranks ((i-1) w, i w]. The nudges keep exact integer ratios
    // from falling on the wrong side of floor/ceil.
    double k_alpha = group * alpha;
    double rank = group - std::floor(k_alpha + 1e-9);
    std::size_t idx = static_cast<std::size_t>(std::ceil(rank / weight - 1e-9));
    idx = std::min(std::max<std::size_t>(idx, 1), vals.size());

    RandomizedDecision decision;
    decision.threshold = vals[idx - 1];
    double greater = static_cast<double>(
        vals.end() - std::upper_bound(vals.begin(), vals.end(), decision.threshold));
    double tied = static_cast<double>(
        std::upper_bound(vals.begin(), vals.end(), decision.threshold) -
        std::lower_bound(vals.begin(), vals.end(), decision.threshold));
    double k_plus = weight * greater;
    double k_zero = weight * tied;

    decision.a = std::clamp((k_alpha - k_plus) / k_zero, 0.0, 1.0);
    if (result.observed > decision.threshold) {
        decision.reject = true;
    } else if (result.observed == decision.threshold) {
        decision.reject = rng.uniform01() < decision.a;
    }
    return decision;
}

PoissonSample poissonize(const Dataset& ds, std::size_t n, double rate_multiplier, Rng& rng) {
    if (ds.size() < n) throw DataError("poissonize needs at least n rows");
    if (rate_multiplier != 0.5 && rate_multiplier != 1.0) {
        throw ConfigError("rate multiplier must be 1/2 or 1");
    }

    PoissonSample out;
    out.data.x_spec = ds.x_spec;
    out.data.y_spec = ds.y_spec;
    out.data.z_kind = ds.z_kind;
    out.drawn = static_cast<std::size_t>(
        rng.poisson(rate_multiplier * static_cast<double>(n)));
    if (out.drawn > n) {
        out.truncated = true;
        return out;
    }

    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    for (std::size_t i = 0; i < out.drawn; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng.uniform_below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(out.drawn);
    std::sort(idx.begin(), idx.end());

    out.data.x.reserve(out.drawn);
    out.data.y.reserve(out.drawn);
    out.data.z.reserve(out.drawn);
    for (std::uint32_t i : idx) {
        out.data.x.push_back(ds.x[i]);
        out.data.y.push_back(ds.y[i]);
        out.data.z.push_back(ds.z[i]);
    }
    return out;
}

TestOutcome run_test(const Dataset& ds, const TestConfig& config) {
    if (!(config.alpha > 0.0 && config.alpha < 1.0)) {
        throw ConfigError("alpha must lie in (0, 1)");
    }

    TestOutcome out;
    out.config = config;
    SeedTree root(config.seed);

    Dataset working;
    const Dataset* data = &ds;
    if (config.poisson != PoissonOption::none) {
        double rate = config.poisson == PoissonOption::half ? 0.5 : 1.0;
        Rng poisson_rng(root.child(0));
        PoissonSample sample = poissonize(ds, ds.size(), rate, poisson_rng);
        out.truncated = sample.truncated;
        if (sample.truncated) return out;  // auto-accept: p stays 1
        working = std::move(sample.data);
        data = &working;
    }
    out.n_used = data->size();

    Dataset discretized;
    if (data->x_spec.kind == AxisKind::real || data->y_spec.kind == AxisKind::real) {
        if (config.bins < 1) throw ConfigError("bins must be at least 1 to discretize real x/y");
        discretized = discretize_xy(*data, config.bins, config.holder_s);
        data = &discretized;
    }

    BinnedDataset binned;
    if (data->z_kind == ZKind::categorical) {
        if (config.perm == PermKind::cyclic) {
            throw ConfigError("cyclic permutations require a double partition");
        }
        binned = assign_bins_by_label(*data);
    } else {
        if (config.bins < 1) throw ConfigError("bins must be at least 1 for real z");
        if (config.sub_bins > 0) {
            binned = assign_bins(*data,
                                 make_double_partition(config.bins, config.sub_bins,
                                                       config.overflow));
        } else {
            if (config.perm == PermKind::cyclic) {
                throw ConfigError("cyclic permutations require a double partition");
            }
            binned = assign_bins(*data, make_equal_partition(config.bins, config.overflow));
        }
    }

    StatisticFn statistic;
    PermutationMode mode;
    if (config.stat == StatKind::plain) {
        if (config.perm == PermKind::half) {
            throw ConfigError("half permutations require the weighted statistic");
        }
        out.statistic = t_ci(binned);
        statistic = [](const BinnedDataset& b) { return t_ci(b); };
        mode = config.perm == PermKind::cyclic ? PermutationMode::cyclic()
                                               : PermutationMode::full();
    } else {
        Rng split_rng(root.child(1));
        WeightedStatistic ws = t_ci_weighted(binned, split_rng, config.norm);
        out.statistic = ws.value;
        auto splits = std::make_shared<std::vector<SplitBins>>(std::move(ws.splits));
        WeightedNorm norm = config.norm;
        statistic = [splits, norm](const BinnedDataset& b) {
            return t_ci_weighted_frozen(b, *splits, norm);
        };
        switch (config.perm) {
            case PermKind::full:
                mode = PermutationMode::full();
                break;
            case PermKind::half:
                mode = PermutationMode::half(*splits);
                break;
            case PermKind::cyclic:
                mode = PermutationMode::cyclic();
                break;
        }
    }

    Rng calib_rng(root.child(2));
    if (config.calibration == CalibKind::exact) {
        out.calibration = exact_pvalue(statistic, binned, mode);
    } else {
        out.calibration = mc_pvalue(statistic, binned, mode, config.B, calib_rng);
    }
    out.p_value = out.calibration.p_value;

    if (config.randomized) {
        Rng decision_rng(root.child(3));
        out.reject = randomized_decision(out.calibration, config.alpha, decision_rng).reject;
    } else {
        out.reject = out.p_value <= config.alpha;
    }
    return out;
}

}  // namespace cipt

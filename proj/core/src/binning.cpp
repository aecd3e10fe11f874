#include "cipt/binning.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace cipt {

namespace {

// First index whose boundary exceeds z, i.e. the half-open cell convention;
// the final boundary is treated as part of the last cell.
int locate_in_boundaries(const std::vector<double>& bounds, double z) {
    int cells = static_cast<int>(bounds.size()) - 1;
    if (z >= bounds.back()) return cells;
    auto it = std::upper_bound(bounds.begin() + 1, bounds.end(), z);
    return static_cast<int>(it - bounds.begin());
}

void require_categorical_xy(const Dataset& ds) {
    if (ds.x_spec.kind != AxisKind::categorical || ds.y_spec.kind != AxisKind::categorical) {
        throw ConfigError("binning needs categorical x and y; discretize real axes first");
    }
}

}  // namespace

Partition make_equal_partition(int M, bool overflow) {
    if (M < 1) throw ConfigError("partition needs at least 1 cell");
    Partition p;
    p.cells = M;
    p.overflow = overflow;
    p.h = 1.0 / M;
    p.boundaries.resize(static_cast<std::size_t>(M) + 1);
    for (int i = 0; i <= M; ++i) {
        p.boundaries[static_cast<std::size_t>(i)] = static_cast<double>(i) / M;
    }
    p.boundaries.front() = 0.0;
    p.boundaries.back() = 1.0;
    return p;
}

DoublePartition make_double_partition(int M, int b, bool overflow) {
    if (b < 1) throw ConfigError("sub-cell factor must be at least 1");
    DoublePartition dp;
    dp.coarse = make_equal_partition(M, overflow);
    dp.sub_cells = b;
    dp.fine_boundaries.resize(static_cast<std::size_t>(M) * b + 1);
    for (int m = 0; m < M; ++m) {
        double a = dp.coarse.boundaries[static_cast<std::size_t>(m)];
        double w = dp.coarse.boundaries[static_cast<std::size_t>(m) + 1] - a;
        for (int k = 0; k < b; ++k) {
            dp.fine_boundaries[static_cast<std::size_t>(m) * b + k] = a + w * k / b;
        }
    }
    dp.fine_boundaries.front() = 0.0;
    dp.fine_boundaries.back() = 1.0;
    return dp;
}

int locate_cell(const Partition& p, double z) {
    if (z < 0.0 || z > 1.0) {
        if (!p.overflow) throw DataError("z out of support");
        return p.cells + 1;
    }
    return locate_in_boundaries(p.boundaries, z);
}

BinnedDataset assign_bins(const Dataset& ds, const Partition& p) {
    require_categorical_xy(ds);
    if (ds.z_kind != ZKind::real) {
        throw ConfigError("categorical z requires label binning");
    }
    BinnedDataset out;
    out.ell1 = ds.x_spec.cardinality;
    out.ell2 = ds.y_spec.cardinality;
    out.has_overflow = p.overflow;
    out.bins.resize(static_cast<std::size_t>(p.cells) + (p.overflow ? 1 : 0));
    for (std::size_t i = 0; i < ds.size(); ++i) {
        int cell = locate_cell(p, ds.z[i]);
        out.bins[static_cast<std::size_t>(cell) - 1].push_back(
            {static_cast<std::int32_t>(ds.x[i]), static_cast<std::int32_t>(ds.y[i])});
    }
    return out;
}

BinnedDataset assign_bins(const Dataset& ds, const DoublePartition& p) {
    require_categorical_xy(ds);
    if (ds.z_kind != ZKind::real) {
        throw ConfigError("categorical z requires label binning");
    }
    int M = p.coarse.cells;
    int b = p.sub_cells;

    // Bucket by fine cell first, then lay each coarse bin out sub-cell by
    // sub-cell so sub-cells are contiguous ranges.
    std::vector<std::vector<CatPair>> fine(static_cast<std::size_t>(M) * b + 1);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        double z = ds.z[i];
        std::size_t fidx;
        if (z < 0.0 || z > 1.0) {
            if (!p.coarse.overflow) throw DataError("z out of support");
            fidx = static_cast<std::size_t>(M) * b;  // single overflow cell
        } else {
            fidx = static_cast<std::size_t>(locate_in_boundaries(p.fine_boundaries, z)) - 1;
        }
        fine[fidx].push_back(
            {static_cast<std::int32_t>(ds.x[i]), static_cast<std::int32_t>(ds.y[i])});
    }

    BinnedDataset out;
    out.ell1 = ds.x_spec.cardinality;
    out.ell2 = ds.y_spec.cardinality;
    out.has_overflow = p.coarse.overflow;
    std::size_t coarse_bins = static_cast<std::size_t>(M) + (p.coarse.overflow ? 1 : 0);
    out.bins.resize(coarse_bins);
    out.sub_offsets.resize(coarse_bins);
    for (int m = 0; m < M; ++m) {
        auto& bin = out.bins[static_cast<std::size_t>(m)];
        auto& offs = out.sub_offsets[static_cast<std::size_t>(m)];
        offs.push_back(0);
        for (int k = 0; k < b; ++k) {
            const auto& cell = fine[static_cast<std::size_t>(m) * b + k];
            bin.insert(bin.end(), cell.begin(), cell.end());
            offs.push_back(static_cast<std::uint32_t>(bin.size()));
        }
    }
    if (p.coarse.overflow) {
        auto& bin = out.bins.back();
        bin = std::move(fine.back());
        out.sub_offsets.back() = {0, static_cast<std::uint32_t>(bin.size())};
    }
    return out;
}

BinnedDataset assign_bins_by_label(const Dataset& ds) {
    require_categorical_xy(ds);
    if (ds.z_kind != ZKind::categorical) {
        throw ConfigError("label binning requires categorical z");
    }
    std::map<std::int64_t, std::vector<CatPair>> groups;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        groups[static_cast<std::int64_t>(ds.z[i])].push_back(
            {static_cast<std::int32_t>(ds.x[i]), static_cast<std::int32_t>(ds.y[i])});
    }
    BinnedDataset out;
    out.ell1 = ds.x_spec.cardinality;
    out.ell2 = ds.y_spec.cardinality;
    out.bins.reserve(groups.size());
    for (auto& [label, pairs] : groups) out.bins.push_back(std::move(pairs));
    return out;
}

int discretize_cells(int M, double s) {
    if (!(s > 0.0)) throw ConfigError("smoothness s must be positive");
    if (M < 1) throw ConfigError("M must be at least 1");
    double raw = std::pow(static_cast<double>(M), 1.0 / s);
    double rounded = std::round(raw);
    // Guard against pow returning 3.0000000000000004 for an exact power.
    if (std::abs(raw - rounded) < 1e-9) return static_cast<int>(rounded);
    return static_cast<int>(std::ceil(raw));
}

Dataset discretize_xy(const Dataset& ds, int M, double s) {
    int cells = discretize_cells(M, s);
    if (cells < 2) {
        throw ConfigError("discretization yields a single category; increase M or lower s");
    }
    Partition grid = make_equal_partition(cells, false);

    Dataset out = ds;
    auto discretize_column = [&](std::vector<double>& col, AxisSpec& spec, const char* name) {
        if (spec.kind != AxisKind::real) return;
        for (double& v : col) {
            if (v < 0.0 || v > 1.0) {
                throw DataError(std::string(name) + ": value outside [0,1]");
            }
            v = static_cast<double>(locate_in_boundaries(grid.boundaries, v));
        }
        spec = AxisSpec::categorical(cells);
    };
    discretize_column(out.x, out.x_spec, "x");
    discretize_column(out.y, out.y_spec, "y");
    return out;
}

}  // namespace cipt

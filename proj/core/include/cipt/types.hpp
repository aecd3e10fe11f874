#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cipt {

// Bad input data (values out of range, malformed files).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Inconsistent or unsupported configuration.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class AxisKind { categorical, real };

// Description of one observed axis. Categorical values are 1-based labels in
// [1, cardinality]; real values live in [0, 1].
struct AxisSpec {
    AxisKind kind = AxisKind::categorical;
    int cardinality = 0;  // >= 2 for categorical, ignored for real

    static AxisSpec categorical(int cardinality) { return {AxisKind::categorical, cardinality}; }
    static AxisSpec real() { return {AxisKind::real, 0}; }
};

enum class ZKind { real, categorical };

// Observed triples in column form. Categorical columns hold integral values
// stored as doubles; validate_dataset enforces integrality and range.
struct Dataset {
    AxisSpec x_spec;
    AxisSpec y_spec;
    ZKind z_kind = ZKind::real;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> z;

    [[nodiscard]] std::size_t size() const noexcept { return x.size(); }
};

struct ValidateOptions {
    bool allow_empty = false;       // a Poisson draw of N=0 produces an empty sample
    bool allow_z_outside = false;   // overflow binning accepts real z outside [0,1]
};

// Checks column lengths, category ranges, finiteness and z support.
// Throws DataError with a short reason on the first violation.
void validate_dataset(const Dataset& ds, const ValidateOptions& opts = {});

struct CatPair {
    std::int32_t x = 0;
    std::int32_t y = 0;

    friend bool operator==(const CatPair&, const CatPair&) = default;
};

// Observations grouped by z-cell, x/y reduced to categorical pairs.
//
// bins[m] holds bin m's pairs in arrival order. When sub_offsets is nonempty
// the dataset is double-binned: sub_offsets[m] lists the boundaries of bin m's
// sub-cells as positions into bins[m] (first 0, last sigma_m), and pairs are
// stored grouped by sub-cell, arrival order within each sub-cell.
struct BinnedDataset {
    int ell1 = 0;
    int ell2 = 0;
    std::vector<std::vector<CatPair>> bins;
    std::vector<std::vector<std::uint32_t>> sub_offsets;
    bool has_overflow = false;  // the last bin collects z outside [0,1]

    [[nodiscard]] std::size_t bin_count() const noexcept { return bins.size(); }
    [[nodiscard]] std::size_t total() const noexcept;
    [[nodiscard]] bool double_binned() const noexcept { return !sub_offsets.empty(); }

    // Multiset of all pairs, bin by bin; used by round-trip checks.
    [[nodiscard]] std::vector<CatPair> flatten() const;
};

}  // namespace cipt

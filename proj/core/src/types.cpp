#include "cipt/types.hpp"

#include <cmath>

namespace cipt {

namespace {

bool is_integral_value(double v) {
    return std::isfinite(v) && v == std::floor(v);
}

void check_axis_column(const std::vector<double>& col, const AxisSpec& spec, const char* name) {
    if (spec.kind == AxisKind::categorical) {
        if (spec.cardinality < 2) {
            throw DataError(std::string(name) + ": categorical cardinality must be at least 2");
        }
        for (double v : col) {
            if (!is_integral_value(v) || v < 1.0 || v > static_cast<double>(spec.cardinality)) {
                throw DataError(std::string(name) + ": category out of range");
            }
        }
    } else {
        for (double v : col) {
            if (!std::isfinite(v)) throw DataError(std::string(name) + ": non-finite value");
            if (v < 0.0 || v > 1.0) throw DataError(std::string(name) + ": value outside [0,1]");
        }
    }
}

}  // namespace

void validate_dataset(const Dataset& ds, const ValidateOptions& opts) {
    if (ds.x.size() != ds.y.size() || ds.x.size() != ds.z.size()) {
        throw DataError("column lengths differ");
    }
    if (ds.size() == 0 && !opts.allow_empty) {
        throw DataError("empty dataset");
    }
    check_axis_column(ds.x, ds.x_spec, "x");
    check_axis_column(ds.y, ds.y_spec, "y");
    if (ds.z_kind == ZKind::categorical) {
        for (double v : ds.z) {
            if (!is_integral_value(v) || v < 1.0) throw DataError("z: category out of range");
        }
    } else {
        for (double v : ds.z) {
            if (!std::isfinite(v)) throw DataError("z: non-finite value");
            if (!opts.allow_z_outside && (v < 0.0 || v > 1.0)) {
                throw DataError("z out of support");
            }
        }
    }
}

std::size_t BinnedDataset::total() const noexcept {
    std::size_t n = 0;
    for (const auto& bin : bins) n += bin.size();
    return n;
}

std::vector<CatPair> BinnedDataset::flatten() const {
    std::vector<CatPair> out;
    out.reserve(total());
    for (const auto& bin : bins) out.insert(out.end(), bin.begin(), bin.end());
    return out;
}

}  // namespace cipt

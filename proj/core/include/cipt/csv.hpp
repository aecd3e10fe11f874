#pragma once

#include <iosfwd>
#include <string>

#include "cipt/types.hpp"

namespace cipt {

// Reads a dataset from a `x,y,z` CSV. Categorical columns accept positive
// integers (used as labels directly) or arbitrary tokens, which are mapped to
// 1..L in sorted order. Real columns require decimal values.
Dataset load_dataset_csv(std::istream& in, AxisKind x_kind, AxisKind y_kind, ZKind z_kind);
Dataset load_dataset_csv(const std::string& path, AxisKind x_kind, AxisKind y_kind, ZKind z_kind);

void save_dataset_csv(std::ostream& out, const Dataset& ds);

}  // namespace cipt

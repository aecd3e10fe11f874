#pragma once

#include <vector>

#include "cipt/types.hpp"

namespace cipt {

// Equal-width cells over [0,1]. Cells are half-open [a,b) except the last,
// which is closed, so every value gets exactly one cell. With overflow set,
// an extra trailing cell collects z outside [0,1].
struct Partition {
    int cells = 0;                    // M
    std::vector<double> boundaries;   // cells+1 ascending values, 0 and 1 at the ends
    bool overflow = false;
    double h = 0.0;                   // maximum cell width, 1/M for equal cells
};

Partition make_equal_partition(int M, bool overflow = false);

// Each coarse cell split into sub_cells equal sub-cells; fine boundaries
// contain the coarse ones, so the fine partition refines the coarse exactly.
struct DoublePartition {
    Partition coarse;
    int sub_cells = 1;                  // b
    std::vector<double> fine_boundaries;
};

DoublePartition make_double_partition(int M, int b, bool overflow = false);

// 1-based cell index for z; cells+1 denotes the overflow cell.
// Throws DataError when z is outside [0,1] and overflow is off.
int locate_cell(const Partition& p, double z);

// Groups observations by z-cell. Requires categorical x and y (run
// discretize_xy first for real axes) and real z.
BinnedDataset assign_bins(const Dataset& ds, const Partition& p);
BinnedDataset assign_bins(const Dataset& ds, const DoublePartition& p);

// Categorical z: one bin per observed label, bins ordered by label.
BinnedDataset assign_bins_by_label(const Dataset& ds);

// Number of discretization cells for real x/y given the test's bin count M
// and smoothness s: ceil(M^(1/s)).
int discretize_cells(int M, double s);

// Maps real x/y axes onto categorical axes with discretize_cells(M, s)
// categories via the equal partition cell index. Categorical axes pass
// through unchanged.
Dataset discretize_xy(const Dataset& ds, int M, double s);

}  // namespace cipt

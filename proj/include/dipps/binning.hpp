#pragma once

// Fixed-width m/z binning. Bin i covers [(i-0.5)w + offset, (i+0.5)w + offset)
// and is centred at i*w + offset; a peak on an exact boundary rounds half-up
// into the higher bin. The binary matrix records presence only: x_ij = 1 iff
// spectrum j has at least one peak in bin i.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "dipps/bit_matrix.hpp"
#include "dipps/error.hpp"
#include "dipps/text.hpp"
#include "dipps/types.hpp"

namespace dipps {

struct BinGrid {
  double width = 0.25;
  double offset = 0.0;
  double mz_min = 0.0;  // acquisition range, inclusive
  double mz_max = 0.0;
};

inline std::int64_t bin_index(double mz, const BinGrid& grid) {
  if (!(grid.width > 0)) throw ContractViolation("bin width must be positive");
  if (mz < grid.mz_min || mz > grid.mz_max)
    throw RangeError("m/z " + format_double(mz) + " outside acquisition range [" +
                     format_double(grid.mz_min) + ", " + format_double(grid.mz_max) + "]");
  return static_cast<std::int64_t>(std::floor((mz - grid.offset) / grid.width + 0.5));
}

inline double bin_center(std::int64_t index, const BinGrid& grid) {
  return static_cast<double>(index) * grid.width + grid.offset;
}

// d x n binary matrix: rows are occupied m/z bins (ascending centers),
// columns are spectra in dataset order.
struct BinaryDataMatrix {
  BitMatrix values;
  std::vector<double> bin_centers;  // strictly increasing, one per row
  std::vector<GridPoint> coords;    // one per column
  double bin_width = 0.25;
  double bin_offset = 0.0;
  std::string source;  // dataset name
};

inline BinaryDataMatrix build_binary_matrix(const Dataset& ds, const BinGrid& grid) {
  if (ds.spectra.empty()) throw ValidationError("dataset has no spectra");

  const std::size_t n = ds.spectra.size();
  std::vector<std::vector<std::int64_t>> per_column(n);
  std::vector<std::int64_t> occupied;
  for (std::size_t j = 0; j < n; ++j) {
    auto& bins = per_column[j];
    bins.reserve(ds.spectra[j].peaks.size());
    for (const Peak& p : ds.spectra[j].peaks) bins.push_back(bin_index(p.mz, grid));
    std::sort(bins.begin(), bins.end());
    bins.erase(std::unique(bins.begin(), bins.end()), bins.end());
    occupied.insert(occupied.end(), bins.begin(), bins.end());
  }
  std::sort(occupied.begin(), occupied.end());
  occupied.erase(std::unique(occupied.begin(), occupied.end()), occupied.end());
  if (occupied.empty())
    throw ValidationError("dataset has no peaks; the matrix would have no rows");

  std::unordered_map<std::int64_t, std::size_t> row_of;
  row_of.reserve(occupied.size());
  for (std::size_t r = 0; r < occupied.size(); ++r) row_of.emplace(occupied[r], r);

  BinaryDataMatrix X;
  X.values = BitMatrix(occupied.size(), n);
  X.bin_centers.reserve(occupied.size());
  for (std::int64_t idx : occupied) X.bin_centers.push_back(bin_center(idx, grid));
  X.coords.reserve(n);
  for (const Spectrum& s : ds.spectra) X.coords.push_back(s.pos);
  for (std::size_t j = 0; j < n; ++j)
    for (std::int64_t idx : per_column[j]) X.values.set(row_of.at(idx), j, true);
  X.bin_width = grid.width;
  X.bin_offset = grid.offset;
  X.source = ds.name;
  return X;
}

// The half-width-shifted grid used to catch peaks that straddle bin edges.
// Only defined for the unshifted grid; shifting twice is a caller error.
inline BinGrid tandem_grid(const BinGrid& grid) {
  if (grid.offset != 0.0)
    throw ContractViolation("tandem_grid requires the unshifted (offset 0) grid");
  BinGrid shifted = grid;
  shifted.offset = grid.width / 2.0;
  return shifted;
}

// Half-open m/z interval [lo, hi).
struct MzInterval {
  double lo = 0;
  double hi = 0;
  friend bool operator==(const MzInterval&, const MzInterval&) = default;
};

// Union of the bin intervals behind two feature sets, one from the offset-0
// grid and one from the half-shifted grid, with overlapping or abutting
// intervals coalesced. Sorted by lo.
inline std::vector<MzInterval> merge_feature_intervals(const FeatureSet& a,
                                                       const FeatureSet& b) {
  if (a.grid_offset != 0.0)
    throw ContractViolation("first feature set must come from the offset-0 grid");
  // An empty set with no grid attached (width 0) is compatible with anything.
  if (!b.centers.empty() || b.grid_width != 0.0) {
    if (a.grid_width != b.grid_width)
      throw ContractViolation("feature sets use different bin widths");
    if (b.grid_offset != b.grid_width / 2.0)
      throw ContractViolation("second feature set must come from the half-shifted grid");
  }

  const double w = a.grid_width;
  std::vector<MzInterval> intervals;
  intervals.reserve(a.centers.size() + b.centers.size());
  for (double c : a.centers) intervals.push_back({c - w / 2.0, c + w / 2.0});
  for (double c : b.centers) intervals.push_back({c - w / 2.0, c + w / 2.0});
  std::sort(intervals.begin(), intervals.end(),
            [](const MzInterval& p, const MzInterval& q) { return p.lo < q.lo; });

  std::vector<MzInterval> merged;
  for (const MzInterval& iv : intervals) {
    if (!merged.empty() && iv.lo <= merged.back().hi)
      merged.back().hi = std::max(merged.back().hi, iv.hi);
    else
      merged.push_back(iv);
  }
  return merged;
}

}  // namespace dipps

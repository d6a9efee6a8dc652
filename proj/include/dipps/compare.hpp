#pragma once

// Jaccard distance between feature sets: 1 - |intersection| / |union|.
// Sets must come from the same bin grid so that centers are comparable by
// exact identity.

#include <span>
#include <string>
#include <vector>

#include "dipps/error.hpp"
#include "dipps/types.hpp"

namespace dipps {

inline double jaccard_distance(const FeatureSet& a, const FeatureSet& b) {
  if (a.grid_width != b.grid_width || a.grid_offset != b.grid_offset)
    throw ContractViolation("feature sets come from different bin grids");

  std::size_t inter = 0;
  std::size_t i = 0, j = 0;
  while (i < a.centers.size() && j < b.centers.size()) {
    if (a.centers[i] < b.centers[j])
      ++i;
    else if (b.centers[j] < a.centers[i])
      ++j;
    else {
      ++inter;
      ++i;
      ++j;
    }
  }
  const std::size_t uni = a.centers.size() + b.centers.size() - inter;
  if (uni == 0) return 0.0;  // two empty sets are identical
  return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

struct JaccardMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> values;  // symmetric, zero diagonal
};

inline JaccardMatrix pairwise_jaccard(std::span<const FeatureSet> sets) {
  if (sets.size() < 2)
    throw ContractViolation("pairwise comparison needs at least two feature sets");
  JaccardMatrix m;
  m.labels.reserve(sets.size());
  for (const FeatureSet& s : sets) m.labels.push_back(s.source);
  m.values.assign(sets.size(), std::vector<double>(sets.size(), 0.0));
  for (std::size_t i = 0; i < sets.size(); ++i)
    for (std::size_t j = i + 1; j < sets.size(); ++j) {
      const double d = jaccard_distance(sets[i], sets[j]);
      m.values[i][j] = d;
      m.values[j][i] = d;
    }
  return m;
}

}  // namespace dipps

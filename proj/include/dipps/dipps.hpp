#pragma once

// Difference in proportions of occurrence. For a subset C of spectra, each
// bin scores p(in C) - p(outside C), which equals sensitivity + specificity
// - 1 of "bin occupied" as a predictor of membership. The feature template
// keeps bins scoring at or above a cutoff; the cutoff is chosen to minimize
// the cosine distance between the template and the subset centroid, with
// ties resolved toward the smaller feature set.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dipps/bit_matrix.hpp"
#include "dipps/binning.hpp"
#include "dipps/clustering.hpp"
#include "dipps/error.hpp"
#include "dipps/types.hpp"

namespace dipps {

namespace dipps_detail {

inline void check_subset(const BitMatrix& X, std::span<const std::size_t> subset,
                         bool proper) {
  if (subset.empty()) throw ContractViolation("subset must not be empty");
  for (std::size_t t = 0; t < subset.size(); ++t) {
    if (subset[t] >= X.cols()) throw ContractViolation("subset index out of range");
    if (t > 0 && subset[t] <= subset[t - 1])
      throw ContractViolation("subset indices must be strictly increasing");
  }
  if (proper && subset.size() == X.cols())
    throw ContractViolation("subset must leave a non-empty complement");
}

}  // namespace dipps_detail

// Per-bin occurrence proportion within the subset.
inline std::vector<double> occurrence_proportions(const BitMatrix& X,
                                                  std::span<const std::size_t> subset) {
  dipps_detail::check_subset(X, subset, false);
  const ColumnMask mask = ColumnMask::from_indices(X.cols(), subset);
  const double size = static_cast<double>(subset.size());
  std::vector<double> p(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i)
    p[i] = static_cast<double>(X.row_and_popcount(i, mask.words())) / size;
  return p;
}

// p(C) - p(complement of C) per bin, in [-1, 1].
inline std::vector<double> dipps_vector(const BitMatrix& X,
                                        std::span<const std::size_t> subset) {
  dipps_detail::check_subset(X, subset, true);
  const ColumnMask mask = ColumnMask::from_indices(X.cols(), subset);
  const std::int64_t in_size = static_cast<std::int64_t>(subset.size());
  const std::int64_t out_size = static_cast<std::int64_t>(X.cols() - subset.size());
  std::vector<double> d(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const auto in_ones = static_cast<std::int64_t>(X.row_and_popcount(i, mask.words()));
    const auto all_ones = static_cast<std::int64_t>(X.row_popcount(i));
    // Evaluated as one exact integer rational with a single rounding so that
    // bins with equal scores get identical doubles; the distinct positive
    // values then are true breakpoints for the cutoff scan.
    const std::int64_t num = in_ones * out_size - (all_ones - in_ones) * in_size;
    d[i] = static_cast<double>(num) / static_cast<double>(in_size * out_size);
  }
  return d;
}

// Mean of the subset's length-one-normalized columns; all-zero columns
// contribute zero vectors.
inline std::vector<double> subset_centroid(const BitMatrix& X,
                                           std::span<const std::size_t> subset) {
  dipps_detail::check_subset(X, subset, false);
  std::vector<double> inv_norm(X.cols(), 0.0);
  for (std::size_t j : subset) {
    std::size_t ones = 0;
    for (std::size_t i = 0; i < X.rows(); ++i) ones += X.get(i, j);
    if (ones > 0) inv_norm[j] = 1.0 / std::sqrt(static_cast<double>(ones));
  }
  std::vector<double> c(X.rows(), 0.0);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    double s = 0;
    for (std::size_t j : subset) s += X.get(i, j) ? inv_norm[j] : 0.0;
    c[i] = s / static_cast<double>(subset.size());
  }
  return c;
}

struct CutoffResult {
  double cutoff = 0;
  std::vector<std::uint8_t> mask;  // 1 where the bin enters the feature set
  std::size_t n_features = 0;
};

// Scan the distinct positive scores as cutoff candidates and keep the one
// whose template lies closest (cosine) to the subset centroid; on ties the
// largest cutoff (fewest features) wins.
inline CutoffResult optimal_cutoff(const BitMatrix& X,
                                   std::span<const std::size_t> subset) {
  const std::vector<double> d = dipps_vector(X, subset);
  const std::vector<double> c = subset_centroid(X, subset);

  std::vector<double> candidates;
  for (double v : d)
    if (v > 0) candidates.push_back(v);
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());
  if (candidates.empty())
    throw ValidationError("degenerate subset: no bin scores positively");

  CutoffResult best;
  std::vector<double> tmpl(X.rows());
  double best_dist = std::numeric_limits<double>::infinity();
  for (double a : candidates) {  // ascending, so later equal minima win
    std::size_t count = 0;
    for (std::size_t i = 0; i < X.rows(); ++i) {
      tmpl[i] = d[i] >= a ? 1.0 : 0.0;
      count += d[i] >= a;
    }
    const double dist = cosine_distance(c, tmpl);
    if (dist <= best_dist) {
      best_dist = dist;
      best.cutoff = a;
      best.n_features = count;
      best.mask.resize(X.rows());
      for (std::size_t i = 0; i < X.rows(); ++i) best.mask[i] = d[i] >= a;
    }
  }
  return best;
}

// Per-spectrum count of occupied template bins (the map statistic).
inline std::vector<int> dipps_map_values(const BitMatrix& X,
                                         std::span<const std::uint8_t> mask) {
  if (mask.size() != X.rows()) throw ContractViolation("mask length must equal rows");
  std::vector<int> counts(X.cols(), 0);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    if (!mask[i]) continue;
    X.for_each_set_in_row(i, [&](std::size_t j) { ++counts[j]; });
  }
  return counts;
}

struct DippsResult {
  std::vector<double> dipps;               // per bin
  double cutoff = 0;                       // chosen score threshold
  std::vector<std::uint8_t> template_mask;  // 1 where selected
  std::size_t n_features = 0;
  std::vector<int> map_counts;  // per spectrum
  std::size_t subset_size = 0;
};

// Full extraction for one subset: scores, cutoff, template, map counts, and
// the resulting feature set on the matrix's bin grid.
inline std::pair<DippsResult, FeatureSet> extract_features(
    const BinaryDataMatrix& X, std::span<const std::size_t> subset) {
  DippsResult res;
  res.dipps = dipps_vector(X.values, subset);
  CutoffResult cut = optimal_cutoff(X.values, subset);
  res.cutoff = cut.cutoff;
  res.template_mask = std::move(cut.mask);
  res.n_features = cut.n_features;
  res.map_counts = dipps_map_values(X.values, res.template_mask);
  res.subset_size = subset.size();

  FeatureSet fs;
  fs.source = X.source;
  fs.cutoff = res.cutoff;
  fs.grid_width = X.bin_width;
  fs.grid_offset = X.bin_offset;
  for (std::size_t i = 0; i < res.template_mask.size(); ++i)
    if (res.template_mask[i]) fs.centers.push_back(X.bin_centers[i]);
  return {std::move(res), fs};
}

// Column indices of the members of one cluster, ascending.
inline std::vector<std::size_t> cluster_columns(const ClusterResult& clusters,
                                                int cluster_id) {
  if (cluster_id < 0 || cluster_id >= clusters.k)
    throw ContractViolation("cluster id out of range");
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < clusters.assignments.size(); ++j)
    if (clusters.assignments[j] == cluster_id) cols.push_back(j);
  return cols;
}

// Column indices of annotated coordinates, ascending.
inline std::vector<std::size_t> annotation_columns(const AnnotationSubset& ann,
                                                   std::span<const GridPoint> coords) {
  std::unordered_map<std::int64_t, std::size_t> at;
  at.reserve(coords.size() * 2);
  for (std::size_t j = 0; j < coords.size(); ++j)
    at.emplace((static_cast<std::int64_t>(coords[j].x) << 32) ^
                   static_cast<std::int64_t>(static_cast<std::uint32_t>(coords[j].y)),
               j);
  std::vector<std::size_t> cols;
  cols.reserve(ann.coords.size());
  for (const GridPoint& p : ann.coords) {
    auto it = at.find((static_cast<std::int64_t>(p.x) << 32) ^
                      static_cast<std::int64_t>(static_cast<std::uint32_t>(p.y)));
    if (it == at.end())
      throw ValidationError("annotation coordinate (" + std::to_string(p.x) + "," +
                            std::to_string(p.y) + ") has no spectrum");
    cols.push_back(it->second);
  }
  std::sort(cols.begin(), cols.end());
  return cols;
}

}  // namespace dipps

#pragma once

// k-means over the spectra (columns) under cosine distance. Centroids are
// means of the members' length-one-normalized columns; all-zero columns sit
// at distance 1 from everything and contribute zero vectors to centroids.
// Restart r derives its RNG stream from seed ^ r, so runs are reproducible
// and restarts can execute in parallel without changing the result.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <span>
#include <vector>

#include "dipps/binning.hpp"
#include "dipps/bit_matrix.hpp"
#include "dipps/error.hpp"
#include "dipps/rng.hpp"
#include "dipps/types.hpp"

namespace dipps {

// 1 - cos(u, v), clamped to [0, 1]; defined as 1 when either vector is zero.
inline double cosine_distance(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ContractViolation("cosine_distance: length mismatch");
  double dot = 0, uu = 0, vv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0 || vv == 0) return 1.0;
  const double d = 1.0 - dot / std::sqrt(uu * vv);
  return std::clamp(d, 0.0, 1.0);
}

struct ClusterResult {
  int k = 0;
  std::vector<int> assignments;               // per column, in [0, k)
  std::vector<std::vector<double>> centroids;  // k rows of length d
  double objective = 0;  // sum of distances from columns to their centroid
  std::uint64_t seed = 0;
  int restarts = 0;
};

struct KMeansTrace {
  std::vector<double> objectives;  // after every assignment pass
  int reseeds = 0;
  bool forced_assignment = false;
};

namespace kmeans_detail {

// Sparse column view of the bit matrix: support row lists plus norms.
struct Columns {
  std::vector<std::vector<std::int32_t>> support;
  std::vector<double> norm2;     // popcount as double
  std::vector<double> inv_norm;  // 0 for all-zero columns
  std::size_t d = 0;
};

inline Columns column_view(const BitMatrix& X) {
  Columns cols;
  cols.d = X.rows();
  cols.support.resize(X.cols());
  for (std::size_t i = 0; i < X.rows(); ++i)
    X.for_each_set_in_row(i, [&](std::size_t j) {
      cols.support[j].push_back(static_cast<std::int32_t>(i));
    });
  cols.norm2.resize(X.cols());
  cols.inv_norm.resize(X.cols());
  for (std::size_t j = 0; j < X.cols(); ++j) {
    cols.norm2[j] = static_cast<double>(cols.support[j].size());
    cols.inv_norm[j] = cols.norm2[j] > 0 ? 1.0 / std::sqrt(cols.norm2[j]) : 0.0;
  }
  return cols;
}

// Distance from binary column j to a centroid; bit-identical to
// cosine_distance on the dense vectors because zero terms add exactly 0.
inline double column_distance(const Columns& cols, std::size_t j,
                              std::span<const double> centroid, double cnorm2) {
  if (cols.norm2[j] == 0 || cnorm2 == 0) return 1.0;
  double dot = 0;
  for (std::int32_t i : cols.support[j]) dot += centroid[static_cast<std::size_t>(i)];
  const double d = 1.0 - dot / std::sqrt(cols.norm2[j] * cnorm2);
  return std::clamp(d, 0.0, 1.0);
}

inline double squared_norm(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  return s;
}

struct Restart {
  std::vector<int> assignments;
  std::vector<std::vector<double>> centroids;
  double objective = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

inline Restart run_restart(const Columns& cols, int k, std::uint64_t rng_seed,
                           int max_iters, KMeansTrace* trace) {
  const std::size_t n = cols.support.size();
  const std::size_t d = cols.d;
  SplitRng rng(rng_seed);

  // init: k distinct columns, uniformly sampled
  std::vector<std::size_t> pool(n);
  for (std::size_t j = 0; j < n; ++j) pool[j] = j;
  std::vector<std::vector<double>> centroids(static_cast<std::size_t>(k),
                                             std::vector<double>(d, 0.0));
  std::vector<double> cnorm2(static_cast<std::size_t>(k), 0.0);
  auto seed_centroid = [&](std::size_t c, std::size_t j) {
    auto& cent = centroids[c];
    std::fill(cent.begin(), cent.end(), 0.0);
    for (std::int32_t i : cols.support[j])
      cent[static_cast<std::size_t>(i)] = cols.inv_norm[j];
    cnorm2[c] = squared_norm(cent);
  };
  for (int c = 0; c < k; ++c) {
    const std::size_t pick = static_cast<std::size_t>(c) +
                             rng.below(n - static_cast<std::size_t>(c));
    std::swap(pool[static_cast<std::size_t>(c)], pool[pick]);
    seed_centroid(static_cast<std::size_t>(c), pool[static_cast<std::size_t>(c)]);
  }

  std::vector<int> assign(n, 0), prev_assign;
  std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
  auto assign_pass = [&] {
    for (std::size_t j = 0; j < n; ++j) {
      int best = 0;
      double best_d = column_distance(cols, j, centroids[0], cnorm2[0]);
      for (int c = 1; c < k; ++c) {
        const double dc =
            column_distance(cols, j, centroids[static_cast<std::size_t>(c)],
                            cnorm2[static_cast<std::size_t>(c)]);
        if (dc < best_d) {  // ties keep the lowest cluster index
          best_d = dc;
          best = c;
        }
      }
      assign[j] = best;
    }
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t j = 0; j < n; ++j) ++counts[static_cast<std::size_t>(assign[j])];
  };
  auto farthest_from = [&](std::size_t c, bool need_movable) {
    std::size_t best_j = n;
    double best_d = -1.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (need_movable && counts[static_cast<std::size_t>(assign[j])] < 2) continue;
      const double dj = column_distance(cols, j, centroids[c], cnorm2[c]);
      if (dj > best_d) {  // ties keep the lowest column index
        best_d = dj;
        best_j = j;
      }
    }
    return best_j;
  };

  Restart out;
  bool done = false;
  for (int iter = 1; iter <= max_iters && !done; ++iter) {
    assign_pass();
    // Empty clusters reseed from the column farthest from their current
    // centroid. With duplicated columns a reseeded centroid can tie an
    // existing one and lose every tie, so after k fruitless rounds the
    // farthest movable column is moved over explicitly.
    for (int round = 0; round < k; ++round) {
      bool any_empty = false;
      for (int c = 0; c < k; ++c) {
        if (counts[static_cast<std::size_t>(c)] > 0) continue;
        any_empty = true;
        const std::size_t j = farthest_from(static_cast<std::size_t>(c), false);
        seed_centroid(static_cast<std::size_t>(c), j);
        if (trace) ++trace->reseeds;
      }
      if (!any_empty) break;
      assign_pass();
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      const std::size_t j = farthest_from(static_cast<std::size_t>(c), true);
      if (j >= n) throw ContractViolation("cannot populate empty cluster");
      --counts[static_cast<std::size_t>(assign[j])];
      assign[j] = c;
      ++counts[static_cast<std::size_t>(c)];
      if (trace) trace->forced_assignment = true;
    }

    if (trace) {
      double obj = 0;
      for (std::size_t j = 0; j < n; ++j)
        obj += column_distance(cols, j,
                               centroids[static_cast<std::size_t>(assign[j])],
                               cnorm2[static_cast<std::size_t>(assign[j])]);
      trace->objectives.push_back(obj);
    }
    out.iterations = iter;
    if (iter > 1 && assign == prev_assign) {
      done = true;
      break;
    }
    prev_assign = assign;
    if (iter == max_iters) break;

    // update: centroid = mean of members' normalized columns
    for (auto& cent : centroids) std::fill(cent.begin(), cent.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      auto& cent = centroids[static_cast<std::size_t>(assign[j])];
      const double w = cols.inv_norm[j];
      for (std::int32_t i : cols.support[j]) cent[static_cast<std::size_t>(i)] += w;
    }
    for (int c = 0; c < k; ++c) {
      auto& cent = centroids[static_cast<std::size_t>(c)];
      const double m = static_cast<double>(counts[static_cast<std::size_t>(c)]);
      for (double& x : cent) x /= m;
      cnorm2[static_cast<std::size_t>(c)] = squared_norm(cent);
    }
  }

  out.objective = 0;
  for (std::size_t j = 0; j < n; ++j)
    out.objective += column_distance(cols, j,
                                     centroids[static_cast<std::size_t>(assign[j])],
                                     cnorm2[static_cast<std::size_t>(assign[j])]);
  out.assignments = std::move(assign);
  out.centroids = std::move(centroids);
  return out;
}

}  // namespace kmeans_detail

// Single restart with an explicit RNG seed; exposed so tests can watch the
// per-iteration objective.
inline kmeans_detail::Restart kmeans_restart(const BitMatrix& X, int k,
                                             std::uint64_t rng_seed,
                                             int max_iters = 500,
                                             KMeansTrace* trace = nullptr) {
  if (k < 1) throw ContractViolation("k must be at least 1");
  if (static_cast<std::size_t>(k) > X.cols())
    throw ContractViolation("k exceeds the number of spectra");
  const auto cols = kmeans_detail::column_view(X);
  return kmeans_detail::run_restart(cols, k, rng_seed, max_iters, trace);
}

inline ClusterResult kmeans(const BitMatrix& X, std::span<const GridPoint> coords,
                            int k, int restarts, std::uint64_t seed, int threads = 1,
                            int max_iters = 500) {
  if (k < 1) throw ContractViolation("k must be at least 1");
  if (static_cast<std::size_t>(k) > X.cols())
    throw ContractViolation("k exceeds the number of spectra");
  if (restarts < 1) throw ContractViolation("restarts must be at least 1");
  if (!coords.empty() && coords.size() != X.cols())
    throw ContractViolation("coords do not match matrix columns");

  const auto cols = kmeans_detail::column_view(X);
  std::vector<kmeans_detail::Restart> runs(static_cast<std::size_t>(restarts));
  auto run_range = [&](int lo, int hi) {
    for (int r = lo; r < hi; ++r)
      runs[static_cast<std::size_t>(r)] = kmeans_detail::run_restart(
          cols, k, seed ^ static_cast<std::uint64_t>(r), max_iters, nullptr);
  };
  if (threads <= 1 || restarts == 1) {
    run_range(0, restarts);
  } else {
    const int nt = std::min(threads, restarts);
    const int chunk = (restarts + nt - 1) / nt;
    std::vector<std::future<void>> tasks;
    for (int t = 0; t < nt; ++t) {
      const int lo = t * chunk;
      const int hi = std::min(lo + chunk, restarts);
      if (lo >= hi) break;
      tasks.push_back(std::async(std::launch::async, run_range, lo, hi));
    }
    for (auto& t : tasks) t.get();
  }

  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].objective < runs[best].objective) best = r;  // ties keep lowest r

  ClusterResult res;
  res.k = k;
  res.assignments = std::move(runs[best].assignments);
  res.centroids = std::move(runs[best].centroids);
  res.objective = runs[best].objective;
  res.seed = seed;
  res.restarts = restarts;
  return res;
}

inline ClusterResult kmeans(const BinaryDataMatrix& X, int k, int restarts,
                            std::uint64_t seed, int threads = 1, int max_iters = 500) {
  return kmeans(X.values, X.coords, k, restarts, seed, threads, max_iters);
}

// Fraction of annotated coordinates assigned to the given cluster.
inline double annotation_overlap(const ClusterResult& clusters, int cluster_id,
                                 const AnnotationSubset& ann,
                                 std::span<const GridPoint> coords) {
  if (cluster_id < 0 || cluster_id >= clusters.k)
    throw ContractViolation("cluster id out of range");
  if (ann.coords.empty()) throw ContractViolation("annotation subset is empty");
  if (coords.size() != clusters.assignments.size())
    throw ContractViolation("coords do not match assignments");
  std::unordered_map<std::int64_t, std::size_t> at;
  at.reserve(coords.size() * 2);
  for (std::size_t j = 0; j < coords.size(); ++j)
    at.emplace((static_cast<std::int64_t>(coords[j].x) << 32) ^
                   static_cast<std::int64_t>(static_cast<std::uint32_t>(coords[j].y)),
               j);
  std::size_t hits = 0;
  for (const GridPoint& p : ann.coords) {
    auto it = at.find((static_cast<std::int64_t>(p.x) << 32) ^
                      static_cast<std::int64_t>(static_cast<std::uint32_t>(p.y)));
    if (it == at.end())
      throw ValidationError("annotation coordinate (" + std::to_string(p.x) + "," +
                            std::to_string(p.y) + ") has no spectrum");
    if (clusters.assignments[it->second] == cluster_id) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ann.coords.size());
}

}  // namespace dipps

#pragma once

// Spatial denoising of a binary matrix over the measurement grid. Each entry
// is compared with its spatial neighbours (all spectra within Euclidean
// distance delta, self excluded): the agreement proportion T is the fraction
// of neighbours holding the same value, and the entry flips when T <= tau.
// All entries update simultaneously from the previous iterate, and iteration
// stops at the first exact fixed point. The T <= tau comparison is done in
// integer arithmetic, so threshold boundaries are exact.

#include <cmath>
#include <cstdint>
#include <future>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "dipps/binning.hpp"
#include "dipps/bit_matrix.hpp"
#include "dipps/error.hpp"
#include "dipps/text.hpp"
#include "dipps/types.hpp"

namespace dipps {

// Exact non-negative rational in lowest terms.
struct Ratio {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static Ratio of(std::int64_t num, std::int64_t den) {
    if (den <= 0 || num < 0) throw ValidationError("ratio must be non-negative");
    const std::int64_t g = std::gcd(num, den);
    return Ratio{num / (g ? g : 1), den / (g ? g : 1)};
  }

  // Accepts "p/q", a plain integer, or a decimal such as "0.25".
  static Ratio parse(std::string_view text) {
    const std::string what = "not a rational number: \"" + std::string(text) + "\"";
    if (auto slash = text.find('/'); slash != std::string_view::npos) {
      auto p = parse_int(text.substr(0, slash));
      auto q = parse_int(text.substr(slash + 1));
      if (!p || !q || *q <= 0 || *p < 0) throw ValidationError(what);
      return of(*p, *q);
    }
    if (auto dot = text.find('.'); dot != std::string_view::npos) {
      std::string_view frac = text.substr(dot + 1);
      std::string digits = std::string(text.substr(0, dot)) + std::string(frac);
      if (frac.empty() || frac.size() > 15) throw ValidationError(what);
      auto p = parse_int(digits);
      if (!p || *p < 0) throw ValidationError(what);
      std::int64_t q = 1;
      for (std::size_t i = 0; i < frac.size(); ++i) q *= 10;
      return of(*p, q);
    }
    auto p = parse_int(text);
    if (!p || *p < 0) throw ValidationError(what);
    return of(*p, 1);
  }

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }

  friend bool operator==(const Ratio&, const Ratio&) = default;
};

// a <= b by cross multiplication; both reduced and non-negative, so the
// products stay far from overflow for any realistic neighbour count.
inline bool ratio_leq(const Ratio& a, const Ratio& b) {
  return a.num * b.den <= b.num * a.den;
}

struct SmoothingParams {
  Ratio tau{1, 4};
  double delta = 1.4142135623730951;  // sqrt(2): the 8-connected neighbourhood
  int max_iters = 100;
};

inline void validate(const SmoothingParams& p) {
  if (!ratio_leq(Ratio{0, 1}, p.tau) || ratio_leq(Ratio{1, 2}, p.tau))
    throw ValidationError("tau must lie in [0, 1/2)");
  if (!(p.delta >= 0)) throw ValidationError("delta must be non-negative");
  if (p.max_iters < 1) throw ValidationError("max_iters must be at least 1");
}

// Flat adjacency lists: for each spectrum, the indices of all other spectra
// within Euclidean distance delta on the grid.
class NeighborIndex {
 public:
  static NeighborIndex build(std::span<const GridPoint> coords, double delta) {
    if (!(delta >= 0)) throw ValidationError("delta must be non-negative");
    NeighborIndex idx;
    const std::size_t n = coords.size();
    idx.offsets_.assign(n + 1, 0);

    std::unordered_map<std::int64_t, std::int32_t> at;
    at.reserve(n * 2);
    for (std::size_t j = 0; j < n; ++j) {
      auto [it, fresh] = at.emplace(pack(coords[j]), static_cast<std::int32_t>(j));
      if (!fresh) throw ValidationError("duplicate spectrum coordinates");
    }

    const double d2 = delta * delta;
    const int reach = static_cast<int>(std::floor(delta));
    std::vector<std::pair<int, int>> shifts;
    for (int dy = -reach; dy <= reach; ++dy)
      for (int dx = -reach; dx <= reach; ++dx)
        if ((dx || dy) && static_cast<double>(dx) * dx + static_cast<double>(dy) * dy <= d2)
          shifts.emplace_back(dx, dy);

    for (std::size_t j = 0; j < n; ++j) {
      for (auto [dx, dy] : shifts) {
        auto it = at.find(pack(GridPoint{coords[j].x + dx, coords[j].y + dy}));
        if (it != at.end()) idx.items_.push_back(it->second);
      }
      idx.offsets_[j + 1] = static_cast<std::int32_t>(idx.items_.size());
    }
    return idx;
  }

  std::span<const std::int32_t> neighbors(std::size_t j) const {
    return {items_.data() + offsets_[j],
            static_cast<std::size_t>(offsets_[j + 1] - offsets_[j])};
  }

  std::size_t size() const { return offsets_.size() - 1; }

 private:
  static std::int64_t pack(const GridPoint& p) {
    return (static_cast<std::int64_t>(p.x) << 32) ^
           static_cast<std::int64_t>(static_cast<std::uint32_t>(p.y));
  }

  std::vector<std::int32_t> offsets_;
  std::vector<std::int32_t> items_;
};

inline NeighborIndex build_neighbor_index(std::span<const GridPoint> coords,
                                          double delta) {
  return NeighborIndex::build(coords, delta);
}

// T_ij as an exact count ratio: agreeing neighbours over neighbour count.
// Spectra with no neighbours report 1/1, so their values are preserved.
inline Ratio agreement_proportion(const BitMatrix& X, std::size_t i, std::size_t j,
                                  const NeighborIndex& nbr) {
  if (i >= X.rows() || j >= X.cols() || nbr.size() != X.cols())
    throw ContractViolation("agreement_proportion: index out of range");
  const auto ns = nbr.neighbors(j);
  if (ns.empty()) return Ratio{1, 1};
  const bool x = X.get(i, j);
  std::int64_t ones = 0;
  for (std::int32_t q : ns) ones += X.get(i, static_cast<std::size_t>(q));
  const std::int64_t agree = x ? ones : static_cast<std::int64_t>(ns.size()) - ones;
  return Ratio{agree, static_cast<std::int64_t>(ns.size())};
}

namespace smooth_detail {

inline void step_rows(const BitMatrix& X, BitMatrix& out, const SmoothingParams& p,
                      const NeighborIndex& nbr, std::size_t row_begin,
                      std::size_t row_end) {
  const std::size_t n = X.cols();
  for (std::size_t i = row_begin; i < row_end; ++i) {
    const auto prev = X.row(i);
    auto next = out.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      const auto ns = nbr.neighbors(j);
      const bool x = (prev[j / BitMatrix::kWordBits] >> (j % BitMatrix::kWordBits)) & 1u;
      bool keep = true;
      if (!ns.empty()) {
        std::int64_t ones = 0;
        for (std::int32_t q : ns)
          ones += (prev[static_cast<std::size_t>(q) / BitMatrix::kWordBits] >>
                   (static_cast<std::size_t>(q) % BitMatrix::kWordBits)) &
                  1u;
        const std::int64_t agree = x ? ones : static_cast<std::int64_t>(ns.size()) - ones;
        // flip exactly when agree/|N| <= tau
        keep = agree * p.tau.den > p.tau.num * static_cast<std::int64_t>(ns.size());
      }
      if (keep == x)  // out starts zeroed; only set bits need writing
        next[j / BitMatrix::kWordBits] |= BitMatrix::Word{1} << (j % BitMatrix::kWordBits);
    }
  }
}

}  // namespace smooth_detail

// One simultaneous update: every entry is recomputed from the previous
// iterate only.
inline BitMatrix smooth_step(const BitMatrix& X, const SmoothingParams& p,
                             const NeighborIndex& nbr, int threads = 1) {
  validate(p);
  if (nbr.size() != X.cols())
    throw ContractViolation("neighbor index does not match matrix columns");
  BitMatrix out(X.rows(), X.cols());
  if (threads <= 1 || X.rows() < 2) {
    smooth_detail::step_rows(X, out, p, nbr, 0, X.rows());
    return out;
  }
  const std::size_t nt = std::min<std::size_t>(threads, X.rows());
  std::vector<std::future<void>> tasks;
  tasks.reserve(nt);
  const std::size_t chunk = (X.rows() + nt - 1) / nt;
  for (std::size_t t = 0; t < nt; ++t) {
    const std::size_t lo = t * chunk;
    const std::size_t hi = std::min(lo + chunk, X.rows());
    if (lo >= hi) break;
    tasks.push_back(std::async(std::launch::async, [&, lo, hi] {
      smooth_detail::step_rows(X, out, p, nbr, lo, hi);
    }));
  }
  for (auto& t : tasks) t.get();
  return out;
}

struct SmoothResult {
  BinaryDataMatrix matrix;   // rows with both values present, centers/coords kept
  BitMatrix full_matrix;     // final matrix before constant-row removal
  std::vector<std::uint8_t> retained_bins;  // mask over input rows
  int iterations = 0;        // first k with X^(k) == X^(k-1), or steps taken
  bool converged = false;
  bool cycle_detected = false;  // X^(k) == X^(k-2): a two-cycle, not a fixed point
};

inline SmoothResult smooth(const BinaryDataMatrix& X, const SmoothingParams& p,
                           const NeighborIndex& nbr, int threads = 1) {
  validate(p);
  if (X.coords.size() != X.values.cols())
    throw ContractViolation("matrix coords do not match columns");
  if (nbr.size() != X.values.cols())
    throw ContractViolation("neighbor index does not match matrix columns");

  SmoothResult res;
  BitMatrix prev2;  // X^(k-2)
  BitMatrix cur = X.values;
  for (int k = 1; k <= p.max_iters; ++k) {
    BitMatrix next = smooth_step(cur, p, nbr, threads);
    if (next == cur) {
      res.converged = true;
      res.iterations = k;
      cur = std::move(next);
      break;
    }
    if (k >= 2 && next == prev2) {
      res.cycle_detected = true;
      res.iterations = k;
      cur = std::move(next);
      break;
    }
    prev2 = std::move(cur);
    cur = std::move(next);
    res.iterations = k;
  }
  res.full_matrix = std::move(cur);

  const std::size_t n = res.full_matrix.cols();
  res.retained_bins.assign(res.full_matrix.rows(), 0);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < res.full_matrix.rows(); ++i) {
    const std::size_t ones = res.full_matrix.row_popcount(i);
    if (ones > 0 && ones < n) {
      res.retained_bins[i] = 1;
      ++kept;
    }
  }

  res.matrix.values = BitMatrix(kept, n);
  res.matrix.bin_centers.reserve(kept);
  std::size_t r = 0;
  for (std::size_t i = 0; i < res.full_matrix.rows(); ++i) {
    if (!res.retained_bins[i]) continue;
    auto src = res.full_matrix.row(i);
    auto dst = res.matrix.values.row(r);
    std::copy(src.begin(), src.end(), dst.begin());
    res.matrix.bin_centers.push_back(X.bin_centers[i]);
    ++r;
  }
  res.matrix.coords = X.coords;
  res.matrix.bin_width = X.bin_width;
  res.matrix.bin_offset = X.bin_offset;
  res.matrix.source = X.source;
  return res;
}

inline SmoothResult smooth(const BinaryDataMatrix& X, const SmoothingParams& p,
                           int threads = 1) {
  return smooth(X, p, build_neighbor_index(X.coords, p.delta), threads);
}

}  // namespace dipps

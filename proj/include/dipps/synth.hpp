#pragma once

// Synthetic dataset generator: a rectangular grid of spectra split into
// labeled regions, with a set of planted bins that fire with per-region
// probabilities plus a band of sparse noise bins. Peaks land exactly on
// bin centers so recovery tests do not depend on binning round-off.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dipps/error.hpp"
#include "dipps/rng.hpp"
#include "dipps/text.hpp"
#include "dipps/types.hpp"

namespace dipps {

struct SynthRegion {
  std::string label;
  std::function<bool(int x, int y)> contains;
};

struct PlantedBin {
  double center = 0.0;
  std::vector<double> region_prob;  // one probability per region, same order
};

struct SynthSpec {
  int grid_width = 0;
  int grid_height = 0;
  std::vector<SynthRegion> regions;
  std::vector<PlantedBin> bins;
  int noise_bins = 0;
  double noise_prob = 0.0;
  double noise_spacing = 0.25;       // gap between consecutive noise bin centers
  double feature_grid_width = 0.25;  // grid stamped on the ground-truth feature sets
  std::uint64_t seed = 0;
  std::string name = "synthetic";
};

struct SynthResult {
  Dataset dataset;
  std::vector<int> region_of;            // per spectrum, raster order
  std::vector<std::string> region_labels;
  std::vector<FeatureSet> planted;       // per region: bins whose probability peaks there
};

namespace synth_detail {

inline void validate(const SynthSpec& spec) {
  if (spec.grid_width < 1 || spec.grid_height < 1)
    throw ValidationError("grid must be at least 1x1");
  if (spec.regions.empty()) throw ValidationError("at least one region is required");
  if (spec.noise_bins < 0) throw ValidationError("noise bin count must be non-negative");
  if (spec.noise_prob < 0.0 || spec.noise_prob > 1.0)
    throw ValidationError("noise probability outside [0, 1]");
  if (spec.noise_spacing <= 0.0) throw ValidationError("noise spacing must be positive");
  if (spec.bins.empty() && spec.noise_bins == 0)
    throw ValidationError("spec plants no bins at all");
  for (const PlantedBin& b : spec.bins) {
    if (b.center <= 0.0) throw ValidationError("bin centers must be positive");
    if (b.region_prob.size() != spec.regions.size())
      throw ValidationError("bin needs one probability per region");
    for (double p : b.region_prob)
      if (p < 0.0 || p > 1.0) throw ValidationError("occurrence probability outside [0, 1]");
  }
}

// Every grid point must fall in exactly one region.
inline std::vector<int> assign_regions(const SynthSpec& spec) {
  std::vector<int> region_of;
  region_of.reserve(static_cast<std::size_t>(spec.grid_width) * spec.grid_height);
  std::vector<bool> seen(spec.regions.size(), false);
  for (int y = 0; y < spec.grid_height; ++y) {
    for (int x = 0; x < spec.grid_width; ++x) {
      int hit = -1;
      for (std::size_t r = 0; r < spec.regions.size(); ++r) {
        if (spec.regions[r].contains(x, y)) {
          if (hit >= 0)
            throw ValidationError("regions overlap at (" + std::to_string(x) + "," +
                                  std::to_string(y) + ")");
          hit = static_cast<int>(r);
        }
      }
      if (hit < 0)
        throw ValidationError("no region covers (" + std::to_string(x) + "," +
                              std::to_string(y) + ")");
      seen[static_cast<std::size_t>(hit)] = true;
      region_of.push_back(hit);
    }
  }
  for (std::size_t r = 0; r < seen.size(); ++r)
    if (!seen[r]) throw ValidationError("region '" + spec.regions[r].label + "' is empty");
  return region_of;
}

}  // namespace synth_detail

inline SynthResult generate(const SynthSpec& spec) {
  synth_detail::validate(spec);

  SynthResult out;
  out.region_of = synth_detail::assign_regions(spec);
  out.region_labels.reserve(spec.regions.size());
  for (const SynthRegion& r : spec.regions) out.region_labels.push_back(r.label);

  // Full bin roster: planted bins first, then noise bins marching upward in
  // fixed steps from just past the largest planted center.
  struct BinDef {
    double center;
    std::vector<double> prob;  // per region
    bool noise;
  };
  std::vector<BinDef> bins;
  bins.reserve(spec.bins.size() + static_cast<std::size_t>(spec.noise_bins));
  double max_center = 0.0;
  for (const PlantedBin& b : spec.bins) {
    bins.push_back({b.center, b.region_prob, false});
    max_center = std::max(max_center, b.center);
  }
  if (max_center == 0.0) max_center = spec.noise_spacing * 3.0;
  for (int i = 0; i < spec.noise_bins; ++i) {
    const double c = max_center + spec.noise_spacing * static_cast<double>(i + 1);
    bins.push_back({c, std::vector<double>(spec.regions.size(), spec.noise_prob), true});
  }

  Dataset& ds = out.dataset;
  ds.name = spec.name;
  double lo = bins.front().center, hi = bins.front().center;
  for (const BinDef& b : bins) {
    lo = std::min(lo, b.center);
    hi = std::max(hi, b.center);
  }
  ds.mz_min = std::max(lo - spec.noise_spacing, lo * 0.5);
  ds.mz_max = hi + spec.noise_spacing;

  // One uniform draw per (spectrum, bin), always consumed, so the stream of
  // random numbers does not depend on the probabilities involved.
  SplitRng rng(spec.seed);
  ds.spectra.reserve(out.region_of.size());
  std::size_t j = 0;
  for (int y = 0; y < spec.grid_height; ++y) {
    for (int x = 0; x < spec.grid_width; ++x, ++j) {
      const int region = out.region_of[j];
      Spectrum s;
      s.pos = GridPoint{x, y};
      for (const BinDef& b : bins) {
        const double u = rng.unit();
        if (u < b.prob[static_cast<std::size_t>(region)])
          s.peaks.push_back(Peak{b.center, 1.0});
      }
      ds.spectra.push_back(std::move(s));
    }
  }

  // Ground truth per region: the planted bins whose probability there is
  // strictly higher than in every other region.
  out.planted.resize(spec.regions.size());
  for (std::size_t r = 0; r < spec.regions.size(); ++r) {
    FeatureSet& fs = out.planted[r];
    fs.source = spec.name + ":" + spec.regions[r].label;
    fs.grid_width = spec.feature_grid_width;
    fs.grid_offset = 0.0;
    for (const PlantedBin& b : spec.bins) {
      bool dominant = true;
      for (std::size_t q = 0; q < spec.regions.size(); ++q)
        if (q != r && b.region_prob[q] >= b.region_prob[r]) dominant = false;
      if (dominant) fs.centers.push_back(b.center);
    }
    std::sort(fs.centers.begin(), fs.centers.end());
  }
  return out;
}

// Coordinates of every spectrum in the named region, raster order. Used to
// emit the annotation file alongside a generated dataset.
inline std::vector<GridPoint> region_coordinates(const SynthResult& r,
                                                 const std::string& label) {
  int idx = -1;
  for (std::size_t i = 0; i < r.region_labels.size(); ++i)
    if (r.region_labels[i] == label) idx = static_cast<int>(i);
  if (idx < 0) throw ContractViolation("unknown region label: " + label);
  std::vector<GridPoint> coords;
  for (std::size_t j = 0; j < r.dataset.spectra.size(); ++j)
    if (r.region_of[j] == idx) coords.push_back(r.dataset.spectra[j].pos);
  return coords;
}

}  // namespace dipps

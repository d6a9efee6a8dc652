#pragma once

#include <compare>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dipps {

struct Peak {
  double mz = 0;         // Daltons, > 0
  double intensity = 0;  // detector units, >= 0; unused after binarization
};

struct GridPoint {
  int x = 0;
  int y = 0;
  friend constexpr auto operator<=>(const GridPoint&, const GridPoint&) = default;
};

// Raster order: y first, then x. All spectrum enumerations use it so that
// parsing is insensitive to input row order.
inline bool raster_less(const GridPoint& a, const GridPoint& b) {
  if (a.y != b.y) return a.y < b.y;
  return a.x < b.x;
}

struct Spectrum {
  GridPoint pos;
  std::vector<Peak> peaks;  // ascending m/z, unique m/z values
};

struct Dataset {
  std::string name;
  double mz_min = 0;
  double mz_max = 0;
  std::vector<Spectrum> spectra;  // raster order, unique positions
  // Resolved path of an annotation file named by the manifest, if any.
  std::optional<std::filesystem::path> annotation_file;
};

// Expert-labelled in-region coordinates.
struct AnnotationSubset {
  std::vector<GridPoint> coords;  // raster order, unique
};

// Bins selected as characteristic of a spectral subset; the unit of
// cross-dataset comparison.
struct FeatureSet {
  std::vector<double> centers;  // m/z bin centers, ascending, unique
  std::string source;           // dataset name
  double cutoff = 0;            // score threshold the set was taken at
  double grid_width = 0;        // bin grid the centers live on
  double grid_offset = 0;
};

}  // namespace dipps

#pragma once

// Shared fixtures: literal matrix construction, rectangular grids, random
// instances, and self-cleaning temporary directories for I/O tests.

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "dipps/bit_matrix.hpp"
#include "dipps/binning.hpp"
#include "dipps/types.hpp"

namespace test {

// Rows given as strings of '0'/'1', one string per bin row.
inline dipps::BitMatrix bits(const std::vector<std::string>& rows) {
  const std::size_t d = rows.size();
  const std::size_t n = d ? rows[0].size() : 0;
  dipps::BitMatrix m(d, n);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (rows[i][j] == '1') m.set(i, j, true);
  return m;
}

// Full w x h rectangle in raster order (y outer, x inner).
inline std::vector<dipps::GridPoint> grid(int w, int h) {
  std::vector<dipps::GridPoint> coords;
  coords.reserve(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) coords.push_back({x, y});
  return coords;
}

inline dipps::BitMatrix random_bits(std::mt19937& rng, std::size_t d, std::size_t n,
                                    double density = 0.5) {
  dipps::BitMatrix m(d, n);
  std::bernoulli_distribution coin(density);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (coin(rng)) m.set(i, j, true);
  return m;
}

// Wraps a BitMatrix in a BinaryDataMatrix on a full grid with synthetic
// centers spaced one bin apart.
inline dipps::BinaryDataMatrix on_grid(dipps::BitMatrix values, int w, int h,
                                       double bin_width = 0.25) {
  dipps::BinaryDataMatrix m;
  m.coords = grid(w, h);
  if (m.coords.size() != values.cols())
    throw std::logic_error("grid size does not match columns");
  for (std::size_t i = 0; i < values.rows(); ++i)
    m.bin_centers.push_back(1000.0 + bin_width * static_cast<double>(i));
  m.values = std::move(values);
  m.bin_width = bin_width;
  m.source = "test";
  return m;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    auto base = std::filesystem::temp_directory_path();
    for (int i = 0; i < 10000; ++i) {
      auto candidate = base / (tag + "-" + std::to_string(i));
      std::error_code ec;
      if (std::filesystem::create_directories(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("cannot create temp dir for " + tag);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

}  // namespace test

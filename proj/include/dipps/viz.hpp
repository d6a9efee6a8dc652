#pragma once

// Raster rendering of the spatial results. Images are plain RGB buffers
// written as binary PPM (P6), which keeps the byte stream exactly
// reproducible; PNG export can be compiled in as an extra output format.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <vector>

#include "dipps/compare.hpp"
#include "dipps/error.hpp"
#include "dipps/types.hpp"

#ifdef DIPPS_ENABLE_PNG
#include <png.h>
#endif

namespace dipps {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct RasterImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB, row 0 at the top

  Rgb at(int x, int y) const {
    const std::size_t o =
        3 * (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
             static_cast<std::size_t>(x));
    return Rgb{pixels[o], pixels[o + 1], pixels[o + 2]};
  }

  void put(int x, int y, Rgb c) {
    const std::size_t o =
        3 * (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
             static_cast<std::size_t>(x));
    pixels[o] = c.r;
    pixels[o + 1] = c.g;
    pixels[o + 2] = c.b;
  }
};

// High-contrast cluster colors; index = cluster id.
inline constexpr std::array<Rgb, 8> kClusterPalette = {{
    {230, 25, 75},    // red
    {60, 180, 75},    // green
    {0, 130, 200},    // blue
    {255, 225, 25},   // yellow
    {145, 30, 180},   // purple
    {70, 240, 240},   // cyan
    {245, 130, 48},   // orange
    {128, 128, 128},  // gray
}};

inline constexpr Rgb kBackground{255, 255, 255};

namespace viz_detail {

struct Canvas {
  int min_x = 0, min_y = 0;
  RasterImage img;
};

inline Canvas make_canvas(std::span<const GridPoint> coords, int scale) {
  if (coords.empty()) throw ContractViolation("cannot render an empty coordinate set");
  if (scale < 1) throw ContractViolation("scale must be at least 1");
  int min_x = coords[0].x, max_x = coords[0].x;
  int min_y = coords[0].y, max_y = coords[0].y;
  for (const GridPoint& p : coords) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  Canvas c;
  c.min_x = min_x;
  c.min_y = min_y;
  c.img.width = (max_x - min_x + 1) * scale;
  c.img.height = (max_y - min_y + 1) * scale;
  c.img.pixels.assign(
      static_cast<std::size_t>(c.img.width) * static_cast<std::size_t>(c.img.height) * 3,
      0);
  for (int y = 0; y < c.img.height; ++y)
    for (int x = 0; x < c.img.width; ++x) c.img.put(x, y, kBackground);
  return c;
}

inline void fill_block(Canvas& c, const GridPoint& p, int scale, Rgb color) {
  const int bx = (p.x - c.min_x) * scale;
  const int by = (p.y - c.min_y) * scale;
  for (int dy = 0; dy < scale; ++dy)
    for (int dx = 0; dx < scale; ++dx) c.img.put(bx + dx, by + dy, color);
}

}  // namespace viz_detail

inline RasterImage render_cluster_map(std::span<const int> assignments,
                                      std::span<const GridPoint> coords,
                                      std::span<const Rgb> palette, int scale = 1) {
  if (assignments.size() != coords.size())
    throw ContractViolation("assignments do not match coordinates");
  auto canvas = viz_detail::make_canvas(coords, scale);
  for (std::size_t j = 0; j < coords.size(); ++j) {
    const int a = assignments[j];
    if (a < 0 || static_cast<std::size_t>(a) >= palette.size())
      throw ContractViolation("palette has no color for cluster " + std::to_string(a));
    viz_detail::fill_block(canvas, coords[j], scale, palette[static_cast<std::size_t>(a)]);
  }
  return std::move(canvas.img);
}

// Linear blue-to-red ramp over count / n_features.
inline Rgb dipps_map_color(int count, std::size_t n_features) {
  const double t = static_cast<double>(count) / static_cast<double>(n_features);
  return Rgb{static_cast<std::uint8_t>(std::lround(255.0 * t)), 0,
             static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - t)))};
}

inline RasterImage render_dipps_map(std::span<const int> counts,
                                    std::size_t n_features,
                                    std::span<const GridPoint> coords, int scale = 1) {
  if (counts.size() != coords.size())
    throw ContractViolation("counts do not match coordinates");
  if (n_features == 0) throw ContractViolation("n_features must be positive");
  for (int c : counts)
    if (c < 0 || static_cast<std::size_t>(c) > n_features)
      throw ContractViolation("map count outside [0, n_features]");
  auto canvas = viz_detail::make_canvas(coords, scale);
  for (std::size_t j = 0; j < coords.size(); ++j)
    viz_detail::fill_block(canvas, coords[j], scale,
                           dipps_map_color(counts[j], n_features));
  return std::move(canvas.img);
}

// Gray grid of pairwise distances: black at 0, white at 1.
inline RasterImage render_jaccard_grid(const JaccardMatrix& m, int cell_size = 1) {
  if (cell_size < 1) throw ContractViolation("cell size must be at least 1");
  const std::size_t k = m.labels.size();
  if (k == 0 || m.values.size() != k)
    throw ContractViolation("malformed distance matrix");
  RasterImage img;
  img.width = static_cast<int>(k) * cell_size;
  img.height = img.width;
  img.pixels.assign(static_cast<std::size_t>(img.width) *
                        static_cast<std::size_t>(img.height) * 3,
                    0);
  for (std::size_t i = 0; i < k; ++i) {
    if (m.values[i].size() != k) throw ContractViolation("malformed distance matrix");
    for (std::size_t j = 0; j < k; ++j) {
      const auto g = static_cast<std::uint8_t>(std::lround(255.0 * m.values[i][j]));
      for (int dy = 0; dy < cell_size; ++dy)
        for (int dx = 0; dx < cell_size; ++dx)
          img.put(static_cast<int>(j) * cell_size + dx,
                  static_cast<int>(i) * cell_size + dy, Rgb{g, g, g});
    }
  }
  return img;
}

inline void write_ppm(const RasterImage& img, const std::filesystem::path& path) {
  if (img.width < 1 || img.height < 1 ||
      img.pixels.size() != static_cast<std::size_t>(img.width) *
                               static_cast<std::size_t>(img.height) * 3)
    throw ContractViolation("malformed image buffer");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

#ifdef DIPPS_ENABLE_PNG
inline void write_png(const RasterImage& img, const std::filesystem::path& path) {
  if (img.width < 1 || img.height < 1 ||
      img.pixels.size() != static_cast<std::size_t>(img.width) *
                               static_cast<std::size_t>(img.height) * 3)
    throw ContractViolation("malformed image buffer");
  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw IoError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    std::fclose(fp);
    throw IoError("png encoding failed: " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y)
    png_write_row(png, const_cast<png_bytep>(
                           img.pixels.data() +
                           static_cast<std::size_t>(y) *
                               static_cast<std::size_t>(img.width) * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}
#endif

}  // namespace dipps

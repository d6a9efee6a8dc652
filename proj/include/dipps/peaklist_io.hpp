#pragma once

// Reading and writing of the on-disk dataset layout:
//
//   <dataset dir>/dataset.meta   key=value manifest (name, m/z range, annotation)
//   <dataset dir>/peaks.tsv      x <TAB> y <TAB> mz <TAB> intensity
//   annotation file              x <TAB> y   (in-region coordinates)
//
// Parsing is insensitive to peak row order: spectra come out in raster order
// (y, then x) with peaks sorted by m/z, so write -> parse -> write is
// byte-stable.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dipps/error.hpp"
#include "dipps/text.hpp"
#include "dipps/types.hpp"

namespace dipps {

struct TableSchema {
  std::vector<std::string> columns;
  char delimiter = '\t';
};

// Generic delimited writer used by every tabular artifact. Row arity must
// match the schema; row order is the caller's and is preserved.
inline void write_table(const std::filesystem::path& path, const TableSchema& schema,
                        const std::vector<std::vector<std::string>>& rows) {
  if (schema.columns.empty()) throw ContractViolation("table schema has no columns");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  std::string line;
  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    if (c) line += schema.delimiter;
    line += schema.columns[c];
  }
  line += '\n';
  out << line;
  for (const auto& row : rows) {
    if (row.size() != schema.columns.size())
      throw ContractViolation("table row arity does not match schema");
    line.clear();
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) line += schema.delimiter;
      line += row[c];
    }
    line += '\n';
    out << line;
  }
  if (!out) throw IoError("write failed: " + path.string());
}

namespace io_detail {

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline void require_header(const std::filesystem::path& path, const std::string& got,
                           std::string_view want) {
  if (got != want)
    throw ParseError(path.filename().string(), 1,
                     "expected header \"" + std::string(want) + "\"");
}

// key=value manifest with '#' comments and blank lines allowed.
inline std::map<std::string, std::string> read_key_values(
    const std::filesystem::path& path, const std::set<std::string>& known) {
  std::map<std::string, std::string> kv;
  auto lines = read_lines(path);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    std::string_view line = trim(lines[n]);
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ParseError(path.filename().string(), n + 1, "expected key=value");
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (!known.contains(key))
      throw ParseError(path.filename().string(), n + 1, "unknown key \"" + key + "\"");
    if (kv.contains(key))
      throw ParseError(path.filename().string(), n + 1, "duplicate key \"" + key + "\"");
    kv.emplace(std::move(key), std::move(value));
  }
  return kv;
}

}  // namespace io_detail

inline constexpr std::string_view kPeaksHeader = "x\ty\tmz\tintensity";
inline constexpr std::string_view kAnnotationHeader = "x\ty";

// Parse a dataset directory (dataset.meta + peaks.tsv). Duplicate
// (x, y, mz) rows collapse to the one with maximum intensity; duplicate
// (x, y) blocks merge into one spectrum.
inline Dataset parse_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const fs::path meta_path = dir / "dataset.meta";
  const fs::path peaks_path = dir / "peaks.tsv";
  if (!fs::exists(meta_path)) throw IoError("missing manifest: " + meta_path.string());
  if (!fs::exists(peaks_path)) throw IoError("missing peak table: " + peaks_path.string());

  auto kv = io_detail::read_key_values(meta_path,
                                       {"name", "mz_min", "mz_max", "annotation"});
  Dataset ds;
  for (const char* req : {"name", "mz_min", "mz_max"})
    if (!kv.contains(req))
      throw ParseError(meta_path.filename().string(), 0,
                       std::string("missing required key \"") + req + "\"");
  ds.name = kv.at("name");
  if (ds.name.empty())
    throw ValidationError("dataset name must not be empty: " + meta_path.string());
  auto lo = parse_double(kv.at("mz_min"));
  auto hi = parse_double(kv.at("mz_max"));
  if (!lo || !hi)
    throw ParseError(meta_path.filename().string(), 0, "mz_min/mz_max must be numeric");
  ds.mz_min = *lo;
  ds.mz_max = *hi;
  if (!(ds.mz_min > 0) || !(ds.mz_max > ds.mz_min))
    throw ValidationError("acquisition range requires 0 < mz_min < mz_max");
  if (auto it = kv.find("annotation"); it != kv.end() && !it->second.empty())
    ds.annotation_file = dir / it->second;

  auto lines = io_detail::read_lines(peaks_path);
  if (lines.empty())
    throw ParseError(peaks_path.filename().string(), 1, "empty file");
  io_detail::require_header(peaks_path, lines[0], kPeaksHeader);

  std::map<GridPoint, std::vector<Peak>, decltype(&raster_less)> grouped(&raster_less);
  const std::string fname = peaks_path.filename().string();
  for (std::size_t n = 1; n < lines.size(); ++n) {
    std::string_view line = lines[n];
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 4)
      throw ParseError(fname, n + 1, "expected 4 tab-separated fields");
    auto x = parse_int(fields[0]);
    auto y = parse_int(fields[1]);
    auto mz = parse_double(fields[2]);
    auto intensity = parse_double(fields[3]);
    if (!x || !y) throw ParseError(fname, n + 1, "x and y must be integers");
    if (!mz || !intensity) throw ParseError(fname, n + 1, "mz and intensity must be numeric");
    if (!(*mz > 0)) throw ParseError(fname, n + 1, "mz must be positive");
    if (*mz < ds.mz_min || *mz > ds.mz_max)
      throw ParseError(fname, n + 1,
                       "mz " + format_double(*mz) + " outside declared range [" +
                           format_double(ds.mz_min) + ", " + format_double(ds.mz_max) + "]");
    if (*intensity < 0) throw ParseError(fname, n + 1, "intensity must be non-negative");
    grouped[GridPoint{static_cast<int>(*x), static_cast<int>(*y)}].push_back(
        Peak{*mz, *intensity});
  }
  if (grouped.empty())
    throw ValidationError("peak table has no spectra: " + peaks_path.string());

  ds.spectra.reserve(grouped.size());
  for (auto& [pos, peaks] : grouped) {
    std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
      if (a.mz != b.mz) return a.mz < b.mz;
      return a.intensity < b.intensity;
    });
    // collapse duplicate m/z, keeping the maximum intensity (the last one)
    std::vector<Peak> unique;
    unique.reserve(peaks.size());
    for (const Peak& p : peaks) {
      if (!unique.empty() && unique.back().mz == p.mz)
        unique.back().intensity = p.intensity;
      else
        unique.push_back(p);
    }
    ds.spectra.push_back(Spectrum{pos, std::move(unique)});
  }
  return ds;
}

// Parse an annotation coordinate list and check it against a dataset.
inline AnnotationSubset parse_annotation(const std::filesystem::path& path,
                                         const Dataset& ds) {
  auto lines = io_detail::read_lines(path);
  if (lines.empty()) throw ParseError(path.filename().string(), 1, "empty file");
  io_detail::require_header(path, lines[0], kAnnotationHeader);

  const std::string fname = path.filename().string();
  std::set<GridPoint> coords;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    std::string_view line = lines[n];
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 2)
      throw ParseError(fname, n + 1, "expected 2 tab-separated fields");
    auto x = parse_int(fields[0]);
    auto y = parse_int(fields[1]);
    if (!x || !y) throw ParseError(fname, n + 1, "x and y must be integers");
    coords.insert(GridPoint{static_cast<int>(*x), static_cast<int>(*y)});
  }

  std::set<GridPoint> present;
  for (const Spectrum& s : ds.spectra) present.insert(s.pos);
  std::string missing;
  for (const GridPoint& p : coords) {
    if (!present.contains(p)) {
      if (!missing.empty()) missing += ", ";
      missing += "(" + std::to_string(p.x) + "," + std::to_string(p.y) + ")";
    }
  }
  if (!missing.empty())
    throw ValidationError("annotation names coordinates absent from the dataset: " +
                          missing);

  AnnotationSubset ann;
  ann.coords.assign(coords.begin(), coords.end());
  std::sort(ann.coords.begin(), ann.coords.end(), raster_less);
  return ann;
}

// Write a dataset directory in canonical form (raster spectrum order, peaks
// ascending in m/z). parse_dataset(write_dataset(ds)) round-trips exactly.
inline void write_dataset(const std::filesystem::path& dir, const Dataset& ds,
                          const std::string& annotation_relpath = "") {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  std::ofstream meta(dir / "dataset.meta", std::ios::binary);
  if (!meta) throw IoError("cannot open " + (dir / "dataset.meta").string());
  meta << "name=" << ds.name << '\n';
  meta << "mz_min=" << format_double(ds.mz_min) << '\n';
  meta << "mz_max=" << format_double(ds.mz_max) << '\n';
  if (!annotation_relpath.empty()) meta << "annotation=" << annotation_relpath << '\n';
  if (!meta) throw IoError("write failed: " + (dir / "dataset.meta").string());

  std::vector<std::vector<std::string>> rows;
  for (const Spectrum& s : ds.spectra)
    for (const Peak& p : s.peaks)
      rows.push_back({std::to_string(s.pos.x), std::to_string(s.pos.y),
                      format_double(p.mz), format_double(p.intensity)});
  write_table(dir / "peaks.tsv", TableSchema{{"x", "y", "mz", "intensity"}, '\t'}, rows);
}

inline void write_annotation(const std::filesystem::path& path,
                             const AnnotationSubset& ann) {
  std::vector<std::vector<std::string>> rows;
  for (const GridPoint& p : ann.coords)
    rows.push_back({std::to_string(p.x), std::to_string(p.y)});
  write_table(path, TableSchema{{"x", "y"}, '\t'}, rows);
}

}  // namespace dipps

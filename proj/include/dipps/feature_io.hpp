#pragma once

// Feature set CSV output plus the sidecar metadata needed to reload one for
// cross-dataset comparison. features.csv lists the selected bins sorted by
// score (ties broken by center); features.meta records the grid and cutoff.

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "dipps/dipps.hpp"
#include "dipps/error.hpp"
#include "dipps/peaklist_io.hpp"
#include "dipps/text.hpp"
#include "dipps/types.hpp"

namespace dipps {

namespace feature_detail {

struct ScoredBin {
  double center;
  double score;
};

inline std::vector<ScoredBin> ordered_bins(const std::vector<double>& centers,
                                           const std::vector<double>& scores,
                                           const std::vector<std::size_t>& keep) {
  std::vector<ScoredBin> rows;
  rows.reserve(keep.size());
  for (std::size_t i : keep) rows.push_back({centers[i], scores[i]});
  std::stable_sort(rows.begin(), rows.end(), [](const ScoredBin& a, const ScoredBin& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.center < b.center;
  });
  return rows;
}

}  // namespace feature_detail

// features.csv: the bins in the selected template, highest score first.
// With all_bins, features_all.csv additionally lists every retained bin.
inline void write_features(const std::filesystem::path& dir, const BinaryDataMatrix& m,
                           const DippsResult& r, bool all_bins = false) {
  std::filesystem::create_directories(dir);
  const std::size_t d = m.values.rows();
  if (r.dipps.size() != d || m.bin_centers.size() != d)
    throw ContractViolation("result does not match matrix dimensions");

  std::vector<std::size_t> in_template;
  for (std::size_t i = 0; i < d; ++i)
    if (r.template_mask[i]) in_template.push_back(i);

  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& b : feature_detail::ordered_bins(m.bin_centers, r.dipps, in_template))
      rows.push_back({format_double(b.center), format_double(b.score)});
    write_table(dir / "features.csv", TableSchema{{"bin_center", "dipps"}, ','}, rows);
  }

  if (all_bins) {
    std::vector<std::size_t> all(d);
    for (std::size_t i = 0; i < d; ++i) all[i] = i;
    std::vector<std::vector<std::string>> rows;
    for (const auto& b : feature_detail::ordered_bins(m.bin_centers, r.dipps, all))
      rows.push_back({format_double(b.center), format_double(b.score)});
    write_table(dir / "features_all.csv", TableSchema{{"bin_center", "dipps"}, ','}, rows);
  }

  {
    const auto p = dir / "features.meta";
    std::ofstream out(p);
    if (!out) throw IoError("cannot open " + p.string());
    out << "name=" << m.source << "\n";
    out << "width=" << format_double(m.bin_width) << "\n";
    out << "offset=" << format_double(m.bin_offset) << "\n";
    out << "cutoff=" << format_double(r.cutoff) << "\n";
    out << "n_features=" << r.n_features << "\n";
    out << "subset_size=" << r.subset_size << "\n";
    if (!out) throw IoError("write failed: " + p.string());
  }
}

// Per-spectrum occupied template bin counts, for the spatial score map.
inline void write_dipps_map(const std::filesystem::path& path, const BinaryDataMatrix& m,
                            const DippsResult& r) {
  if (r.map_counts.size() != m.coords.size())
    throw ContractViolation("map counts do not match coordinates");
  std::vector<std::vector<std::string>> rows;
  rows.reserve(m.coords.size());
  for (std::size_t j = 0; j < m.coords.size(); ++j)
    rows.push_back({std::to_string(m.coords[j].x), std::to_string(m.coords[j].y),
                    std::to_string(r.map_counts[j])});
  write_table(path, TableSchema{{"x", "y", "count"}, '\t'}, rows);
}

// Reload a feature set from features.csv plus its sibling features.meta.
inline FeatureSet read_feature_set(const std::filesystem::path& csv) {
  FeatureSet fs;
  {
    const auto meta = csv.parent_path() / "features.meta";
    auto kv = io_detail::read_key_values(
        meta, {"name", "width", "offset", "cutoff", "n_features", "subset_size"});
    for (const char* req : {"name", "width", "offset", "cutoff"})
      if (!kv.contains(req))
        throw ParseError(meta.filename().string(), 0,
                         std::string("missing required key \"") + req + "\"");
    fs.source = kv.at("name");
    auto w = parse_double(kv.at("width"));
    auto o = parse_double(kv.at("offset"));
    auto c = parse_double(kv.at("cutoff"));
    if (!w || !o || !c)
      throw ParseError(meta.filename().string(), 0,
                       "width/offset/cutoff must be numeric");
    fs.grid_width = *w;
    fs.grid_offset = *o;
    fs.cutoff = *c;
  }
  auto lines = io_detail::read_lines(csv);
  if (lines.empty()) throw ParseError(csv.filename().string(), 1, "empty file");
  io_detail::require_header(csv, lines[0], "bin_center,dipps");
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    auto f = split(lines[ln], ',');
    if (f.size() != 2)
      throw ParseError(csv.filename().string(), ln + 1, "expected 2 fields");
    auto c = parse_double(f[0]);
    if (!c) throw ParseError(csv.filename().string(), ln + 1, "bad bin center");
    fs.centers.push_back(*c);
  }
  std::sort(fs.centers.begin(), fs.centers.end());
  fs.centers.erase(std::unique(fs.centers.begin(), fs.centers.end()), fs.centers.end());
  return fs;
}

}  // namespace dipps

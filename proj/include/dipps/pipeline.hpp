#pragma once

// End-to-end orchestration: bin, smooth, cluster, score, render, compare.
// Every artifact writer here is also what the standalone subcommands call,
// so a stage rerun from serialized intermediates reproduces the in-pipeline
// bytes exactly. The only file that ever contains a timestamp is
// pipeline.log; everything else is a pure function of inputs and config.

#include <array>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "dipps/binning.hpp"
#include "dipps/clustering.hpp"
#include "dipps/compare.hpp"
#include "dipps/dipps.hpp"
#include "dipps/error.hpp"
#include "dipps/feature_io.hpp"
#include "dipps/matrix_io.hpp"
#include "dipps/peaklist_io.hpp"
#include "dipps/smoothing.hpp"
#include "dipps/text.hpp"
#include "dipps/types.hpp"
#include "dipps/viz.hpp"

namespace dipps {

struct PipelineConfig {
  double bin_width = 0.25;
  bool tandem = false;
  Ratio tau{1, 4};
  double delta = 1.4142135623730951;
  int max_iters = 100;
  int k = 4;
  int restarts = 100;
  std::uint64_t seed = 0;
  std::string subset_cluster;  // "", "annotation", or a cluster index
  bool all_bins = false;
  int scale = 4;
  int threads = 1;
  bool png = false;
  std::filesystem::path out_dir = "out";
};

inline constexpr int kJaccardCellSize = 32;

// Hard errors throw; soft issues come back as warnings for the caller to print.
inline std::vector<std::string> validate_config(const PipelineConfig& cfg) {
  std::vector<std::string> warnings;
  if (!(cfg.bin_width > 0.0)) throw ValidationError("bin width must be positive");
  if (cfg.bin_width < 0.05 || cfg.bin_width > 2.0)
    warnings.push_back("bin width " + format_double(cfg.bin_width) +
                       " is outside the validated range [0.05, 2]");
  validate(SmoothingParams{cfg.tau, cfg.delta, cfg.max_iters});
  if (cfg.k < 1) throw ValidationError("k must be at least 1");
  if (cfg.k > static_cast<int>(kClusterPalette.size()))
    throw ValidationError("cluster palette supports at most " +
                          std::to_string(kClusterPalette.size()) + " clusters");
  if (cfg.restarts < 1) throw ValidationError("restarts must be at least 1");
  if (cfg.scale < 1) throw ValidationError("scale must be at least 1");
  if (cfg.threads < 1) throw ValidationError("threads must be at least 1");
  if (!cfg.subset_cluster.empty() && cfg.subset_cluster != "annotation") {
    auto v = parse_int(cfg.subset_cluster);
    if (!v || *v < 0)
      throw ValidationError(
          "subset cluster must be a non-negative index or \"annotation\"");
    if (*v >= cfg.k) throw ValidationError("subset cluster index must be below k");
  }
#ifndef DIPPS_ENABLE_PNG
  if (cfg.png) throw ValidationError("PNG output requested but support is not compiled in");
#endif
  return warnings;
}

// Names double as output directory components and comparison labels.
inline void check_dataset_name(const std::string& name) {
  if (name.empty() || name == "." || name == "..")
    throw ValidationError("dataset name \"" + name + "\" is not usable");
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-';
    if (!ok)
      throw ValidationError("dataset name \"" + name +
                            "\" contains characters other than [A-Za-z0-9._-]");
  }
}

// ---------------------------------------------------------------------------
// Per-stage artifact writers and readers. Standalone subcommands call these
// on reloaded intermediates; the pipeline calls them on in-memory values.

inline void write_smooth_outputs(const std::filesystem::path& dir,
                                 const BinaryDataMatrix& input, const SmoothResult& sr,
                                 const SmoothingParams& p) {
  std::filesystem::create_directories(dir);
  write_matrix(dir, sr.matrix);
  {
    std::vector<std::vector<std::string>> rows;
    std::size_t r = 0;
    for (std::size_t i = 0; i < sr.retained_bins.size(); ++i) {
      if (!sr.retained_bins[i]) continue;
      rows.push_back({format_double(input.bin_centers[i]),
                      std::to_string(input.values.row_popcount(i)),
                      std::to_string(sr.matrix.values.row_popcount(r))});
      ++r;
    }
    write_table(dir / "retained.tsv",
                TableSchema{{"center", "pre_count", "post_count"}, '\t'}, rows);
  }
  {
    const auto p_meta = dir / "smooth.meta";
    std::ofstream out(p_meta);
    if (!out) throw IoError("cannot open " + p_meta.string());
    out << "iterations=" << sr.iterations << "\n";
    out << "converged=" << (sr.converged ? "true" : "false") << "\n";
    out << "tau=" << p.tau.num << "/" << p.tau.den << "\n";
    out << "delta=" << format_double(p.delta) << "\n";
    out << "max_iters=" << p.max_iters << "\n";
    if (!out) throw IoError("write failed: " + p_meta.string());
  }
}

inline void write_cluster_outputs(const std::filesystem::path& dir,
                                  const BinaryDataMatrix& m, const ClusterResult& cl) {
  std::filesystem::create_directories(dir);
  if (cl.assignments.size() != m.coords.size())
    throw ContractViolation("assignments do not match matrix coordinates");
  std::vector<std::vector<std::string>> rows;
  rows.reserve(m.coords.size());
  for (std::size_t j = 0; j < m.coords.size(); ++j)
    rows.push_back({std::to_string(m.coords[j].x), std::to_string(m.coords[j].y),
                    std::to_string(cl.assignments[j])});
  write_table(dir / "clusters.tsv", TableSchema{{"x", "y", "cluster"}, '\t'}, rows);
  const auto p_meta = dir / "cluster.meta";
  std::ofstream out(p_meta);
  if (!out) throw IoError("cannot open " + p_meta.string());
  out << "k=" << cl.k << "\n";
  out << "restarts=" << cl.restarts << "\n";
  out << "seed=" << cl.seed << "\n";
  out << "objective=" << format_double(cl.objective) << "\n";
  if (!out) throw IoError("write failed: " + p_meta.string());
}

// Cluster assignment table in file order, for rendering without the matrix.
struct ClusterTable {
  std::vector<GridPoint> coords;
  std::vector<int> assignments;
};

inline ClusterTable read_cluster_table(const std::filesystem::path& tsv) {
  auto lines = io_detail::read_lines(tsv);
  if (lines.empty()) throw ParseError(tsv.filename().string(), 1, "empty file");
  io_detail::require_header(tsv, lines[0], "x\ty\tcluster");
  ClusterTable t;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    auto f = split(lines[ln], '\t');
    if (f.size() != 3)
      throw ParseError(tsv.filename().string(), ln + 1, "expected 3 fields");
    auto x = parse_int(f[0]);
    auto y = parse_int(f[1]);
    auto c = parse_int(f[2]);
    if (!x || !y || !c)
      throw ParseError(tsv.filename().string(), ln + 1, "fields must be integers");
    if (*c < 0)
      throw ParseError(tsv.filename().string(), ln + 1, "cluster must be non-negative");
    t.coords.push_back(GridPoint{static_cast<int>(*x), static_cast<int>(*y)});
    t.assignments.push_back(static_cast<int>(*c));
  }
  return t;
}

// Per-spectrum occupied template bin counts, file order.
struct DippsMapTable {
  std::vector<GridPoint> coords;
  std::vector<int> counts;
};

inline DippsMapTable read_dipps_map(const std::filesystem::path& tsv) {
  auto lines = io_detail::read_lines(tsv);
  if (lines.empty()) throw ParseError(tsv.filename().string(), 1, "empty file");
  io_detail::require_header(tsv, lines[0], "x\ty\tcount");
  DippsMapTable t;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    auto f = split(lines[ln], '\t');
    if (f.size() != 3)
      throw ParseError(tsv.filename().string(), ln + 1, "expected 3 fields");
    auto x = parse_int(f[0]);
    auto y = parse_int(f[1]);
    auto c = parse_int(f[2]);
    if (!x || !y || !c)
      throw ParseError(tsv.filename().string(), ln + 1, "fields must be integers");
    if (*c < 0)
      throw ParseError(tsv.filename().string(), ln + 1, "count must be non-negative");
    t.coords.push_back(GridPoint{static_cast<int>(*x), static_cast<int>(*y)});
    t.counts.push_back(static_cast<int>(*c));
  }
  return t;
}

// Reload assignments aligned to the given matrix column order.
inline ClusterResult read_clusters(const std::filesystem::path& tsv,
                                   std::span<const GridPoint> coords) {
  auto lines = io_detail::read_lines(tsv);
  if (lines.empty()) throw ParseError(tsv.filename().string(), 1, "empty file");
  io_detail::require_header(tsv, lines[0], "x\ty\tcluster");
  std::unordered_map<std::int64_t, int> at;
  at.reserve(lines.size() * 2);
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    auto f = split(lines[ln], '\t');
    if (f.size() != 3)
      throw ParseError(tsv.filename().string(), ln + 1, "expected 3 fields");
    auto x = parse_int(f[0]);
    auto y = parse_int(f[1]);
    auto c = parse_int(f[2]);
    if (!x || !y || !c)
      throw ParseError(tsv.filename().string(), ln + 1, "fields must be integers");
    if (*c < 0)
      throw ParseError(tsv.filename().string(), ln + 1, "cluster must be non-negative");
    const std::int64_t key = (static_cast<std::int64_t>(*x) << 32) ^
                             static_cast<std::int64_t>(static_cast<std::uint32_t>(*y));
    if (!at.emplace(key, static_cast<int>(*c)).second)
      throw ParseError(tsv.filename().string(), ln + 1, "duplicate coordinate");
  }
  if (at.size() != coords.size())
    throw ValidationError(tsv.string() + ": row count does not match the matrix");
  ClusterResult cl;
  cl.assignments.reserve(coords.size());
  int kmax = -1;
  for (const GridPoint& p : coords) {
    auto it = at.find((static_cast<std::int64_t>(p.x) << 32) ^
                      static_cast<std::int64_t>(static_cast<std::uint32_t>(p.y)));
    if (it == at.end())
      throw ValidationError(tsv.string() + ": no cluster for (" + std::to_string(p.x) +
                            "," + std::to_string(p.y) + ")");
    cl.assignments.push_back(it->second);
    kmax = std::max(kmax, it->second);
  }
  cl.k = kmax + 1;
  return cl;
}

inline void write_merged_intervals(const std::filesystem::path& path,
                                   const std::vector<MzInterval>& intervals) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(intervals.size());
  for (const MzInterval& iv : intervals)
    rows.push_back({format_double(iv.lo), format_double(iv.hi)});
  write_table(path, TableSchema{{"lo", "hi"}, '\t'}, rows);
}

inline void write_jaccard(const std::filesystem::path& path, const JaccardMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string());
  for (const std::string& l : m.labels) out << "," << l;
  out << "\n";
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    out << m.labels[i];
    for (double v : m.values[i]) out << "," << format_fixed(v, 4);
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline JaccardMatrix read_jaccard(const std::filesystem::path& path) {
  auto lines = io_detail::read_lines(path);
  if (lines.empty()) throw ParseError(path.filename().string(), 1, "empty file");
  auto head = split(lines[0], ',');
  if (head.size() < 2 || !head[0].empty())
    throw ParseError(path.filename().string(), 1, "expected empty first cell + labels");
  JaccardMatrix m;
  for (std::size_t i = 1; i < head.size(); ++i) m.labels.emplace_back(head[i]);
  const std::size_t k = m.labels.size();
  if (lines.size() != k + 1)
    throw ParseError(path.filename().string(), 1, "row count does not match labels");
  for (std::size_t i = 0; i < k; ++i) {
    auto f = split(lines[i + 1], ',');
    if (f.size() != k + 1)
      throw ParseError(path.filename().string(), i + 2, "wrong field count");
    if (f[0] != m.labels[i])
      throw ParseError(path.filename().string(), i + 2, "row label mismatch");
    std::vector<double> row;
    for (std::size_t j = 1; j < f.size(); ++j) {
      auto v = parse_double(f[j]);
      if (!v || *v < 0.0 || *v > 1.0)
        throw ParseError(path.filename().string(), i + 2, "distance outside [0, 1]");
      row.push_back(*v);
    }
    m.values.push_back(std::move(row));
  }
  return m;
}

inline void write_image(const RasterImage& img, const std::filesystem::path& ppm_path,
                        bool png) {
  write_ppm(img, ppm_path);
  if (png) {
#ifdef DIPPS_ENABLE_PNG
    auto p = ppm_path;
    p.replace_extension(".png");
    write_png(img, p);
#else
    throw ValidationError("PNG output requested but support is not compiled in");
#endif
  }
}

inline void write_render_outputs(const std::filesystem::path& dir,
                                 const BinaryDataMatrix& m,
                                 std::span<const int> assignments, const DippsResult& r,
                                 int scale, bool png) {
  std::filesystem::create_directories(dir);
  write_image(render_cluster_map(assignments, m.coords, kClusterPalette, scale),
              dir / "cluster_map.ppm", png);
  write_image(render_dipps_map(r.map_counts, r.n_features, m.coords, scale),
              dir / "dipps_map.ppm", png);
}

// ---------------------------------------------------------------------------
// Subset selection for the scoring stage: an explicit cluster index, the
// annotated coordinates themselves, or (default) the cluster that best
// matches the annotation. Ties go to the lowest cluster id.

inline std::vector<std::size_t> select_subset(const std::string& selector,
                                              const ClusterResult& clusters,
                                              const std::optional<AnnotationSubset>& ann,
                                              std::span<const GridPoint> coords,
                                              const std::string& dataset_name,
                                              std::string* describe = nullptr) {
  if (selector == "annotation") {
    if (!ann)
      throw ValidationError("dataset \"" + dataset_name +
                            "\" has no annotation to use as subset");
    auto cols = annotation_columns(*ann, coords);
    if (describe) *describe = "annotation (" + std::to_string(cols.size()) + " spectra)";
    return cols;
  }
  if (!selector.empty()) {
    auto v = parse_int(selector);
    if (!v || *v < 0 || *v >= clusters.k)
      throw ValidationError("subset cluster index out of range for k=" +
                            std::to_string(clusters.k));
    if (describe) *describe = "cluster " + std::to_string(*v) + " (explicit)";
    return cluster_columns(clusters, *v);
  }
  if (ann) {
    int best = 0;
    double best_overlap = -1.0;
    for (int c = 0; c < clusters.k; ++c) {
      const double ov = annotation_overlap(clusters, c, *ann, coords);
      if (ov > best_overlap) {
        best_overlap = ov;
        best = c;
      }
    }
    if (describe)
      *describe = "cluster " + std::to_string(best) + " (annotation overlap " +
                  format_fixed(best_overlap, 4) + ")";
    return cluster_columns(clusters, best);
  }
  throw ValidationError("dataset \"" + dataset_name +
                        "\" has no annotation; pass an explicit subset cluster");
}

// ---------------------------------------------------------------------------
// The pipeline proper.

class PipelineLog {
 public:
  explicit PipelineLog(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open " + path.string());
  }

  void line(const std::string& msg) {
    const std::time_t t =
        std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    out_ << "[" << buf << "] " << msg << "\n";
    out_.flush();
  }

 private:
  std::ofstream out_;
};

struct PipelineOutcome {
  int exit_code = 0;
  std::vector<std::string> warnings;
  std::string error;  // stage-tagged description when exit_code != 0
};

inline PipelineOutcome run_pipeline(const PipelineConfig& cfg,
                                    const std::vector<std::filesystem::path>& dataset_dirs) {
  namespace fs = std::filesystem;
  PipelineOutcome outcome;
  outcome.warnings = validate_config(cfg);
  if (dataset_dirs.empty()) throw ValidationError("no dataset directories given");

  fs::create_directories(cfg.out_dir);
  PipelineLog log(cfg.out_dir / "pipeline.log");
  log.line("start: " + std::to_string(dataset_dirs.size()) + " dataset(s)");
  for (const std::string& w : outcome.warnings) log.line("warning: " + w);

  static constexpr std::array<const char*, 6> kStageNames = {
      "ingest", "bin", "smooth", "cluster", "dipps", "render"};
  std::vector<std::string> labels(dataset_dirs.size());
  std::vector<std::array<std::string, 6>> state(
      dataset_dirs.size(), {"pending", "pending", "pending", "pending", "pending", "pending"});
  std::string compare_state = "pending";
  for (std::size_t di = 0; di < dataset_dirs.size(); ++di) {
    labels[di] = dataset_dirs[di].filename().string();
    if (labels[di].empty()) labels[di] = dataset_dirs[di].parent_path().filename().string();
  }

  const auto write_manifest = [&] {
    const auto p = cfg.out_dir / "MANIFEST";
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot open " + p.string());
    for (std::size_t di = 0; di < labels.size(); ++di)
      for (std::size_t s = 0; s < kStageNames.size(); ++s)
        out << labels[di] << "/" << kStageNames[s] << "=" << state[di][s] << "\n";
    out << "compare=" << compare_state << "\n";
  };

  const SmoothingParams sparams{cfg.tau, cfg.delta, cfg.max_iters};
  std::set<std::string> seen_names;
  std::vector<FeatureSet> feature_sets;
  feature_sets.reserve(dataset_dirs.size());

  struct Chain {
    fs::path base;
    BinGrid grid;
    BinaryDataMatrix binned;
    SmoothResult smoothed;
    ClusterResult clusters;
    DippsResult scores;
    FeatureSet features;
  };

  for (std::size_t di = 0; di < dataset_dirs.size(); ++di) {
    std::size_t stage = 0;
    try {
      Dataset ds = parse_dataset(dataset_dirs[di]);
      check_dataset_name(ds.name);
      if (!seen_names.insert(ds.name).second)
        throw ValidationError("duplicate dataset name: " + ds.name);
      labels[di] = ds.name;
      std::optional<AnnotationSubset> ann;
      if (ds.annotation_file) ann = parse_annotation(*ds.annotation_file, ds);
      state[di][stage] = "done";
      log.line(ds.name + "/ingest: done (" + std::to_string(ds.spectra.size()) +
               " spectra" + (ann ? ", annotated" : "") + ")");

      const fs::path base = cfg.out_dir / ds.name;
      std::vector<Chain> chains;
      chains.push_back(
          {base, BinGrid{cfg.bin_width, 0.0, ds.mz_min, ds.mz_max}, {}, {}, {}, {}, {}});
      if (cfg.tandem)
        chains.push_back(
            {base / "shifted", tandem_grid(chains[0].grid), {}, {}, {}, {}, {}});

      stage = 1;
      for (Chain& c : chains) {
        c.binned = build_binary_matrix(ds, c.grid);
        write_matrix(c.base / "bin", c.binned);
      }
      state[di][stage] = "done";
      log.line(ds.name + "/bin: done (" + std::to_string(chains[0].binned.values.rows()) +
               " bins)");

      stage = 2;
      for (Chain& c : chains) {
        c.smoothed = smooth(c.binned, sparams, cfg.threads);
        write_smooth_outputs(c.base / "smooth", c.binned, c.smoothed, sparams);
        if (!c.smoothed.converged)
          log.line(ds.name + "/smooth: no fixed point within " +
                   std::to_string(cfg.max_iters) + " iterations" +
                   (c.smoothed.cycle_detected ? " (two-cycle detected)" : ""));
      }
      state[di][stage] = "done";
      log.line(ds.name + "/smooth: done (" +
               std::to_string(chains[0].smoothed.iterations) + " iterations, " +
               std::to_string(chains[0].smoothed.matrix.values.rows()) +
               " bins retained)");

      stage = 3;
      for (Chain& c : chains) {
        c.clusters = kmeans(c.smoothed.matrix, cfg.k, cfg.restarts, cfg.seed, cfg.threads);
        write_cluster_outputs(c.base / "cluster", c.smoothed.matrix, c.clusters);
      }
      state[di][stage] = "done";
      log.line(ds.name + "/cluster: done (objective " +
               format_fixed(chains[0].clusters.objective, 4) + ")");

      stage = 4;
      for (Chain& c : chains) {
        std::string describe;
        auto subset = select_subset(cfg.subset_cluster, c.clusters, ann,
                                    c.smoothed.matrix.coords, ds.name, &describe);
        auto [scores, features] = extract_features(c.smoothed.matrix, subset);
        c.scores = std::move(scores);
        c.features = std::move(features);
        write_features(c.base / "dipps", c.smoothed.matrix, c.scores, cfg.all_bins);
        write_dipps_map(c.base / "dipps" / "dipps_map.tsv", c.smoothed.matrix, c.scores);
        log.line(ds.name + "/dipps: subset = " + describe);
      }
      if (cfg.tandem) {
        const auto merged = merge_feature_intervals(chains[0].features, chains[1].features);
        write_merged_intervals(base / "dipps" / "merged_intervals.tsv", merged);
      }
      state[di][stage] = "done";
      log.line(ds.name + "/dipps: done (cutoff " +
               format_double(chains[0].scores.cutoff) + ", " +
               std::to_string(chains[0].scores.n_features) + " features)");

      stage = 5;
      for (Chain& c : chains)
        write_render_outputs(c.base / "render", c.smoothed.matrix,
                             c.clusters.assignments, c.scores, cfg.scale, cfg.png);
      state[di][stage] = "done";
      log.line(ds.name + "/render: done");

      feature_sets.push_back(std::move(chains[0].features));
    } catch (const std::exception& e) {
      state[di][stage] = "failed";
      log.line(labels[di] + "/" + kStageNames[stage] + ": failed: " + e.what());
      outcome.exit_code = 1;
      outcome.error = "[" + labels[di] + "/" + kStageNames[stage] + "] " + e.what();
      write_manifest();
      return outcome;
    }
  }

  if (feature_sets.size() >= 2) {
    try {
      const auto jm = pairwise_jaccard(feature_sets);
      fs::create_directories(cfg.out_dir / "compare");
      const auto csv = cfg.out_dir / "compare" / "jaccard.csv";
      write_jaccard(csv, jm);
      // Render from the serialized values so a standalone rerun is byte-equal.
      write_image(render_jaccard_grid(read_jaccard(csv), kJaccardCellSize),
                  cfg.out_dir / "compare" / "jaccard_grid.ppm", cfg.png);
      compare_state = "done";
      log.line("compare: done (" + std::to_string(feature_sets.size()) + " datasets)");
    } catch (const std::exception& e) {
      compare_state = "failed";
      log.line(std::string("compare: failed: ") + e.what());
      outcome.exit_code = 1;
      outcome.error = std::string("[compare] ") + e.what();
      write_manifest();
      return outcome;
    }
  } else {
    compare_state = "skipped";
    outcome.warnings.push_back("only one dataset given; skipping feature set comparison");
    log.line("compare: skipped (needs at least 2 datasets)");
  }

  write_manifest();
  log.line("done");
  return outcome;
}

}  // namespace dipps

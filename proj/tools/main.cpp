// Command line front end. Every subcommand reads serialized inputs, calls
// the same library functions the full pipeline uses, and writes artifacts
// with the same writers, so chained stages reproduce pipeline bytes exactly.
// Exit codes: 0 success, 1 stage failure, 2 usage error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dipps/binning.hpp"
#include "dipps/clustering.hpp"
#include "dipps/compare.hpp"
#include "dipps/dipps.hpp"
#include "dipps/error.hpp"
#include "dipps/feature_io.hpp"
#include "dipps/matrix_io.hpp"
#include "dipps/peaklist_io.hpp"
#include "dipps/pipeline.hpp"
#include "dipps/smoothing.hpp"
#include "dipps/synth.hpp"
#include "dipps/text.hpp"
#include "dipps/types.hpp"
#include "dipps/viz.hpp"

namespace fs = std::filesystem;

namespace {

std::string check_tau(const std::string& s) {
  try {
    const auto r = dipps::Ratio::parse(s);
    if (!dipps::ratio_leq(dipps::Ratio{0, 1}, r) ||
        dipps::ratio_leq(dipps::Ratio{1, 2}, r))
      return "tau must lie in [0, 1/2)";
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

std::string check_subset_selector(const std::string& s) {
  if (s == "annotation") return {};
  const auto v = dipps::parse_int(s);
  if (!v || *v < 0) return "expected a non-negative cluster index or \"annotation\"";
  return {};
}

void warn_bin_width(double w) {
  if (w < 0.05 || w > 2.0)
    std::cerr << "warning: bin width " << dipps::format_double(w)
              << " is outside the validated range [0.05, 2]\n";
}

std::optional<dipps::AnnotationSubset> load_annotation(const fs::path& dataset_dir) {
  dipps::Dataset ds = dipps::parse_dataset(dataset_dir);
  if (!ds.annotation_file) return std::nullopt;
  return dipps::parse_annotation(*ds.annotation_file, ds);
}

// Applies key=value lines from a config file to a subcommand's long options.
// Runs after command line parsing, so any option the user passed explicitly
// keeps its parsed value and the file only fills in the rest.
void apply_config(CLI::App* sub, const std::string& path) {
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) throw CLI::FileError::Missing(path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = dipps::trim(line);
    if (text.empty() || text.front() == '#' || text.front() == ';') continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos)
      throw CLI::ConfigError(path + ":" + std::to_string(lineno) +
                             ": expected key=value");
    const std::string key{dipps::trim(text.substr(0, eq))};
    const std::string value{dipps::trim(text.substr(eq + 1))};
    if (key.empty())
      throw CLI::ConfigError(path + ":" + std::to_string(lineno) +
                             ": expected key=value");
    if (key == "config")
      throw CLI::ConfigError(path + ":" + std::to_string(lineno) +
                             ": \"config\" cannot be set from a config file");
    CLI::Option* op = sub->get_option_no_throw("--" + key);
    if (op == nullptr)
      throw CLI::ConfigError("unknown key \"" + key + "\" in " + path);
    if (op->count() > 0) continue;
    op->add_result(value);
    op->run_callback();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial feature extraction for mass spectrometry imaging"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "1.0.0");

  int rc = 0;

  // ingest: validate a dataset directory and rewrite it in canonical form.
  struct {
    std::string dataset, out, config;
  } ing;
  {
    auto* sub = app.add_subcommand("ingest", "Validate and canonicalize a dataset");
    sub->add_option("dataset", ing.dataset, "dataset directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    sub->add_option("-o,--out", ing.out, "output directory")->required();
    sub->add_option("--config", ing.config, "key=value defaults file");
    sub->callback([&, sub] {
      apply_config(sub, ing.config);
      dipps::Dataset ds = dipps::parse_dataset(ing.dataset);
      if (ds.annotation_file) {
        auto ann = dipps::parse_annotation(*ds.annotation_file, ds);
        dipps::write_dataset(ing.out, ds, "annotation.tsv");
        dipps::write_annotation(fs::path(ing.out) / "annotation.tsv", ann);
      } else {
        dipps::write_dataset(ing.out, ds);
      }
      std::cerr << "ingested " << ds.spectra.size() << " spectra\n";
    });
  }

  // bin: dataset directory to binary binned matrix.
  struct {
    std::string dataset, out, config;
    double bin_width = 0.25;
    bool tandem = false;
  } bin;
  {
    auto* sub = app.add_subcommand("bin", "Build the binary binned data matrix");
    sub->add_option("dataset", bin.dataset, "dataset directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    sub->add_option("-o,--out", bin.out, "output matrix directory")->required();
    sub->add_option("--bin-width", bin.bin_width, "bin width in Daltons")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_flag("--tandem", bin.tandem, "use the half-width-shifted bin grid");
    sub->add_option("--config", bin.config, "key=value defaults file");
    sub->callback([&, sub] {
      apply_config(sub, bin.config);
      warn_bin_width(bin.bin_width);
      dipps::Dataset ds = dipps::parse_dataset(bin.dataset);
      dipps::BinGrid grid{bin.bin_width, 0.0, ds.mz_min, ds.mz_max};
      if (bin.tandem) grid = dipps::tandem_grid(grid);
      dipps::write_matrix(bin.out, dipps::build_binary_matrix(ds, grid));
    });
  }

  // smooth: iterate the neighbourhood vote to a fixed point, drop constants.
  struct {
    std::string matrix, out, config;
    std::string tau = "1/4";
    double delta = 1.4142135623730951;
    int max_iters = 100;
    int threads = 1;
  } smo;
  {
    auto* sub = app.add_subcommand("smooth", "Spatially smooth a binned matrix");
    sub->add_option("matrix", smo.matrix, "matrix directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    sub->add_option("-o,--out", smo.out, "output matrix directory")->required();
    sub->add_option("--tau", smo.tau, "flip threshold, rational in [0, 1/2)")
        ->capture_default_str()
        ->check(check_tau);
    sub->add_option("--delta", smo.delta, "neighbourhood radius")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--max-iters", smo.max_iters, "iteration cap")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--threads", smo.threads, "worker threads")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--config", smo.config, "key=value defaults file");
    sub->callback([&, sub] {
      apply_config(sub, smo.config);
      const auto m = dipps::read_matrix(smo.matrix);
      const dipps::SmoothingParams p{dipps::Ratio::parse(smo.tau), smo.delta,
                                     smo.max_iters};
      const auto res = dipps::smooth(m, p, smo.threads);
      if (!res.converged)
        std::cerr << "warning: no fixed point within " << p.max_iters << " iterations"
                  << (res.cycle_detected ? " (two-cycle detected)" : "") << "\n";
      dipps::write_smooth_outputs(smo.out, m, res, p);
    });
  }

  // cluster: cosine k-means over matrix columns.
  struct {
    std::string matrix, out, config;
    int k = 4;
    int restarts = 100;
    std::uint64_t seed = 0;
    int threads = 1;
  } clu;
  {
    auto* sub = app.add_subcommand("cluster", "Cluster spectra with cosine k-means");
    sub->add_option("matrix", clu.matrix, "matrix directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    sub->add_option("-o,--out", clu.out, "output directory")->required();
    sub->add_option("--k", clu.k, "number of clusters")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--restarts", clu.restarts, "independent restarts")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--seed", clu.seed, "random seed")->capture_default_str();
    sub->add_option("--threads", clu.threads, "worker threads")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--config", clu.config, "key=value defaults file");
    sub->callback([&, sub] {
      apply_config(sub, clu.config);
      const auto m = dipps::read_matrix(clu.matrix);
      const auto res = dipps::kmeans(m, clu.k, clu.restarts, clu.seed, clu.threads);
      dipps::write_cluster_outputs(clu.out, m, res);
    });
  }

  // dipps: score bins for a subset and extract the feature set.
  struct {
    std::string matrix, out, clusters, dataset, merge_shifted, config;
    std::string subset;
    bool all_bins = false;
  } dip;
  {
    auto* sub = app.add_subcommand("dipps", "Extract subset-characteristic features");
    sub->add_option("matrix", dip.matrix, "matrix directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    sub->add_option("-o,--out", dip.out, "output directory")->required();
    sub->add_option("--clusters", dip.clusters, "clusters.tsv from the cluster stage")
        ->check(CLI::ExistingFile);
    sub->add_option("--subset-cluster", dip.subset,
                    "cluster index or \"annotation\" (default: best annotation match)")
        ->check(check_subset_selector);
    sub->add_option("--dataset", dip.dataset,
                    "dataset directory supplying the annotation")
        ->check(CLI::ExistingDirectory);
    sub->add_flag("--all-bins", dip.all_bins, "also write scores for every bin");
    sub->add_option("--merge-shifted", dip.merge_shifted,
                    "features.csv from the shifted grid; write merged intervals")
        ->check(CLI::ExistingFile);
    sub->add_option("--config", dip.config, "key=value defaults file");
    sub->callback([&, sub] {
      apply_config(sub, dip.config);
      const auto m = dipps::read_matrix(dip.matrix);
      std::optional<dipps::AnnotationSubset> ann;
      if (!dip.dataset.empty()) ann = load_annotation(dip.dataset);
      dipps::ClusterResult clusters;
      if (!dip.clusters.empty())
        clusters = dipps::read_clusters(dip.clusters, m.coords);
      else if (dip.subset != "annotation")
        throw dipps::ValidationError(
            "pass --clusters, or --subset-cluster annotation with --dataset");
      std::string describe;
      const auto subset =
          dipps::select_subset(dip.subset, clusters, ann, m.coords, m.source, &describe);
      auto [scores, features] = dipps::extract_features(m, subset);
      dipps::write_features(dip.out, m, scores, dip.all_bins);
      dipps::write_dipps_map(fs::path(dip.out) / "dipps_map.tsv", m, scores);
      if (!dip.merge_shifted.empty()) {
        const auto other = dipps::read_feature_set(dip.merge_shifted);
        dipps::write_merged_intervals(
            fs::path(dip.out) / "merged_intervals.tsv",
            dipps::merge_feature_intervals(features, other));
      }
      std::cerr << "subset = " << describe << "; cutoff "
                << dipps::format_double(scores.cutoff) << "; " << scores.n_features
                << " features\n";
    });
  }

  // compare: pairwise distances between saved feature sets.
  struct {
    std::vector<std::string> features;
    std::string out, config;
    int cell_size = dipps::kJaccardCellSize;
    bool png = false;
  } cmp;
  {
    auto* sub = app.add_subcommand("compare", "Compare feature sets across datasets");
    sub->add_option("features", cmp.features, "two or more features.csv paths")
        ->required()
        ->expected(-2)
        ->check(CLI::ExistingFile);
    sub->add_option("-o,--out", cmp.out, "output directory")->required();
    sub->add_option("--cell-size", cmp.cell_size, "grid cell edge in pixels")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_flag("--png", cmp.png, "also write PNG images");
    sub->add_option("--config", cmp.config, "key=value defaults file");
    sub->callback([&, sub] {
      apply_config(sub, cmp.config);
      std::vector<dipps::FeatureSet> sets;
      sets.reserve(cmp.features.size());
      for (const std::string& f : cmp.features)
        sets.push_back(dipps::read_feature_set(f));
      const auto jm = dipps::pairwise_jaccard(sets);
      fs::create_directories(cmp.out);
      const auto csv = fs::path(cmp.out) / "jaccard.csv";
      dipps::write_jaccard(csv, jm);
      dipps::write_image(
          dipps::render_jaccard_grid(dipps::read_jaccard(csv), cmp.cell_size),
          fs::path(cmp.out) / "jaccard_grid.ppm", cmp.png);
    });
  }

  // render: raster maps from serialized stage outputs.
  struct {
    std::string kind, clusters, dipps_dir, jaccard, out, config;
    int scale = 4;
    int cell_size = dipps::kJaccardCellSize;
    bool png = false;
  } ren;
  {
    auto* sub = app.add_subcommand("render", "Render a raster map from stage outputs");
    sub->add_option("--kind", ren.kind, "cluster | dipps | jaccard")
        ->required()
        ->check(CLI::IsMember({"cluster", "dipps", "jaccard"}));
    sub->add_option("--clusters", ren.clusters, "clusters.tsv (kind cluster)")
        ->check(CLI::ExistingFile);
    sub->add_option("--dipps-dir", ren.dipps_dir,
                    "dipps stage directory (kind dipps)")
        ->check(CLI::ExistingDirectory);
    sub->add_option("--jaccard", ren.jaccard, "jaccard.csv (kind jaccard)")
        ->check(CLI::ExistingFile);
    sub->add_option("-o,--out", ren.out, "output image path (.ppm)")->required();
    sub->add_option("--scale", ren.scale, "pixels per spectrum")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--cell-size", ren.cell_size, "grid cell edge in pixels")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_flag("--png", ren.png, "also write a PNG image");
    sub->add_option("--config", ren.config, "key=value defaults file");
    sub->callback([&, sub] {
      apply_config(sub, ren.config);
      dipps::RasterImage img;
      if (ren.kind == "cluster") {
        if (ren.clusters.empty()) throw CLI::RequiredError("--clusters");
        const auto t = dipps::read_cluster_table(ren.clusters);
        img = dipps::render_cluster_map(t.assignments, t.coords, dipps::kClusterPalette,
                                        ren.scale);
      } else if (ren.kind == "dipps") {
        if (ren.dipps_dir.empty()) throw CLI::RequiredError("--dipps-dir");
        const auto t =
            dipps::read_dipps_map(fs::path(ren.dipps_dir) / "dipps_map.tsv");
        const auto kv = dipps::io_detail::read_key_values(
            fs::path(ren.dipps_dir) / "features.meta",
            {"name", "width", "offset", "cutoff", "n_features", "subset_size"});
        const auto n = kv.contains("n_features")
                           ? dipps::parse_int(kv.at("n_features"))
                           : std::nullopt;
        if (!n || *n < 1)
          throw dipps::ValidationError("features.meta lacks a positive n_features");
        img = dipps::render_dipps_map(t.counts, static_cast<std::size_t>(*n), t.coords,
                                      ren.scale);
      } else {
        if (ren.jaccard.empty()) throw CLI::RequiredError("--jaccard");
        img = dipps::render_jaccard_grid(dipps::read_jaccard(ren.jaccard),
                                         ren.cell_size);
      }
      dipps::write_image(img, ren.out, ren.png);
    });
  }

  // synth: planted two-region dataset with ground truth.
  struct {
    std::string out, config, name = "synthetic";
    int grid_width = 40, grid_height = 40;
    int split = -1;
    int planted = 30;
    double start_mz = 1000.0;
    double spacing = 0.25;
    double p_in = 0.9, p_out = 0.05;
    int noise_bins = 200;
    double noise_prob = 0.02;
    std::uint64_t seed = 0;
  } syn;
  {
    auto* sub = app.add_subcommand("synth", "Generate a planted synthetic dataset");
    sub->add_option("-o,--out", syn.out, "output dataset directory")->required();
    sub->add_option("--name", syn.name, "dataset name")->capture_default_str();
    sub->add_option("--grid-width", syn.grid_width, "spectra per row")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--grid-height", syn.grid_height, "spectra per column")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--split", syn.split,
                    "x below this is the target region (default: half the width)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--planted", syn.planted, "number of target-specific bins")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--start-mz", syn.start_mz, "center of the first planted bin")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--spacing", syn.spacing, "gap between consecutive bin centers")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--p-in", syn.p_in, "occurrence probability inside the target")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    sub->add_option("--p-out", syn.p_out, "occurrence probability outside the target")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    sub->add_option("--noise-bins", syn.noise_bins, "number of nuisance bins")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--noise-prob", syn.noise_prob, "nuisance occurrence probability")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    sub->add_option("--seed", syn.seed, "random seed")->capture_default_str();
    sub->add_option("--config", syn.config, "key=value defaults file");
    sub->callback([&, sub] {
      apply_config(sub, syn.config);
      const int split = syn.split >= 0 ? syn.split : syn.grid_width / 2;
      dipps::SynthSpec spec;
      spec.grid_width = syn.grid_width;
      spec.grid_height = syn.grid_height;
      spec.regions = {
          {"target", [split](int x, int) { return x < split; }},
          {"background", [split](int x, int) { return x >= split; }},
      };
      for (int i = 0; i < syn.planted; ++i)
        spec.bins.push_back({syn.start_mz + syn.spacing * static_cast<double>(i),
                             {syn.p_in, syn.p_out}});
      spec.noise_bins = syn.noise_bins;
      spec.noise_prob = syn.noise_prob;
      spec.noise_spacing = syn.spacing;
      spec.feature_grid_width = syn.spacing;
      spec.seed = syn.seed;
      spec.name = syn.name;
      const auto res = dipps::generate(spec);
      dipps::write_dataset(syn.out, res.dataset, "annotation.tsv");
      dipps::write_annotation(
          fs::path(syn.out) / "annotation.tsv",
          dipps::AnnotationSubset{dipps::region_coordinates(res, "target")});
      std::vector<std::vector<std::string>> rows;
      rows.reserve(res.dataset.spectra.size());
      for (std::size_t j = 0; j < res.dataset.spectra.size(); ++j) {
        const auto& p = res.dataset.spectra[j].pos;
        rows.push_back({std::to_string(p.x), std::to_string(p.y),
                        res.region_labels[static_cast<std::size_t>(res.region_of[j])]});
      }
      dipps::write_table(fs::path(syn.out) / "truth.tsv",
                         dipps::TableSchema{{"x", "y", "region"}, '\t'}, rows);
    });
  }

  // pipeline: the whole chain over one or more datasets.
  struct {
    std::vector<std::string> datasets;
    std::string out = "out";
    std::string config;
    double bin_width = 0.25;
    bool tandem = false;
    std::string tau = "1/4";
    double delta = 1.4142135623730951;
    int max_iters = 100;
    int k = 4;
    int restarts = 100;
    std::uint64_t seed = 0;
    std::string subset;
    bool all_bins = false;
    int scale = 4;
    int threads = 1;
    bool png = false;
  } pip;
  {
    auto* sub = app.add_subcommand("pipeline", "Run the full chain end to end");
    sub->add_option("datasets", pip.datasets, "dataset directories")
        ->required()
        ->check(CLI::ExistingDirectory);
    sub->add_option("-o,--out", pip.out, "output root")->capture_default_str();
    sub->add_option("--bin-width", pip.bin_width, "bin width in Daltons")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_flag("--tandem", pip.tandem,
                  "also run on the half-width-shifted grid and merge intervals");
    sub->add_option("--tau", pip.tau, "flip threshold, rational in [0, 1/2)")
        ->capture_default_str()
        ->check(check_tau);
    sub->add_option("--delta", pip.delta, "neighbourhood radius")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--max-iters", pip.max_iters, "smoothing iteration cap")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--k", pip.k, "number of clusters")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--restarts", pip.restarts, "k-means restarts")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--seed", pip.seed, "random seed")->capture_default_str();
    sub->add_option("--subset-cluster", pip.subset,
                    "cluster index or \"annotation\" (default: best annotation match)")
        ->check(check_subset_selector);
    sub->add_flag("--all-bins", pip.all_bins, "also write scores for every bin");
    sub->add_option("--scale", pip.scale, "pixels per spectrum in maps")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--threads", pip.threads, "worker threads")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_flag("--png", pip.png, "also write PNG images");
    sub->add_option("--config", pip.config, "key=value defaults file");
    sub->callback([&, sub] {
      apply_config(sub, pip.config);
      dipps::PipelineConfig cfg;
      cfg.bin_width = pip.bin_width;
      cfg.tandem = pip.tandem;
      cfg.tau = dipps::Ratio::parse(pip.tau);
      cfg.delta = pip.delta;
      cfg.max_iters = pip.max_iters;
      cfg.k = pip.k;
      cfg.restarts = pip.restarts;
      cfg.seed = pip.seed;
      cfg.subset_cluster = pip.subset;
      cfg.all_bins = pip.all_bins;
      cfg.scale = pip.scale;
      cfg.threads = pip.threads;
      cfg.png = pip.png;
      cfg.out_dir = pip.out;
      std::vector<fs::path> dirs(pip.datasets.begin(), pip.datasets.end());
      const auto outcome = dipps::run_pipeline(cfg, dirs);
      for (const std::string& w : outcome.warnings)
        std::cerr << "warning: " << w << "\n";
      if (outcome.exit_code != 0) {
        std::cerr << "error: " << outcome.error << "\n";
        rc = outcome.exit_code;
      }
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}

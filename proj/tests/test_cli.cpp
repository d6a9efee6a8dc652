#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "helpers.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli() {
  const char* p = std::getenv("DIPPS_CLI");
  REQUIRE(p != nullptr);
  return p;
}

int run(const std::string& cmd) {
  const int st = std::system(cmd.c_str());
  REQUIRE(st != -1);
  return WEXITSTATUS(st);
}

void expect_exit(const std::string& cmd, int want) {
  INFO("command: " << cmd);
  REQUIRE(run(cmd) == want);
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// a small planted dataset that every CLI test can regenerate quickly
void make_dataset(const fs::path& dir, const std::string& name, double start_mz,
                  std::uint64_t seed) {
  expect_exit(cli() + " synth -o " + q(dir) + " --name " + name +
                  " --grid-width 12 --grid-height 10 --planted 6 --start-mz " +
                  std::to_string(start_mz) +
                  " --noise-bins 30 --noise-prob 0.05 --seed " + std::to_string(seed),
              0);
}

void expect_same_file(const fs::path& a, const fs::path& b) {
  INFO("comparing " << a << " with " << b);
  REQUIRE(fs::exists(a));
  REQUIRE(fs::exists(b));
  REQUIRE(test::slurp(a) == test::slurp(b));
}

std::vector<fs::path> tree_files(const fs::path& root) {
  std::vector<fs::path> rel;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), root));
  std::sort(rel.begin(), rel.end());
  return rel;
}

bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("synth writes a complete dataset directory") {
  test::TempDir ws("cli-synth");
  make_dataset(ws / "ds", "sample", 1000.0, 1);
  for (const char* f : {"dataset.meta", "peaks.tsv", "annotation.tsv", "truth.tsv"})
    REQUIRE(fs::exists(ws / "ds" / f));
  const std::string meta = test::slurp(ws / "ds" / "dataset.meta");
  REQUIRE(contains(meta, "name=sample"));
  REQUIRE(contains(meta, "annotation=annotation.tsv"));
  const std::string truth = test::slurp(ws / "ds" / "truth.tsv");
  REQUIRE(std::count(truth.begin(), truth.end(), '\n') == 121);
}

TEST_CASE("ingest rewrites an already canonical dataset byte for byte") {
  test::TempDir ws("cli-ingest");
  make_dataset(ws / "ds", "sample", 1000.0, 1);
  expect_exit(cli() + " ingest " + q(ws / "ds") + " -o " + q(ws / "canon") +
                  " 2> /dev/null",
              0);
  for (const char* f : {"dataset.meta", "peaks.tsv", "annotation.tsv"})
    expect_same_file(ws / "ds" / f, ws / "canon" / f);
}

TEST_CASE("pipeline over two datasets produces the full artifact tree") {
  test::TempDir ws("cli-pipeline");
  make_dataset(ws / "a", "a", 1000.0, 1);
  make_dataset(ws / "b", "b", 2000.0, 2);
  expect_exit(cli() + " pipeline " + q(ws / "a") + " " + q(ws / "b") + " -o " +
                  q(ws / "out") + " --k 2 --restarts 10 --seed 5 2> /dev/null",
              0);

  const std::string manifest = test::slurp(ws / "out" / "MANIFEST");
  for (const std::string ds : {"a", "b"})
    for (const std::string st :
         {"ingest", "bin", "smooth", "cluster", "dipps", "render"})
      REQUIRE(contains(manifest, ds + "/" + st + "=done"));
  REQUIRE(contains(manifest, "compare=done"));
  REQUIRE_FALSE(contains(manifest, "pending"));
  REQUIRE_FALSE(contains(manifest, "failed"));

  for (const char* f :
       {"bin/matrix.tsv", "bin/bin_centers.tsv", "bin/coords.tsv", "bin/matrix.meta",
        "smooth/matrix.tsv", "smooth/retained.tsv", "smooth/smooth.meta",
        "cluster/clusters.tsv", "cluster/cluster.meta", "dipps/features.csv",
        "dipps/features.meta", "dipps/dipps_map.tsv", "render/cluster_map.ppm",
        "render/dipps_map.ppm"}) {
    REQUIRE(fs::exists(ws / "out" / "a" / f));
    REQUIRE(fs::exists(ws / "out" / "b" / f));
  }
  REQUIRE(fs::exists(ws / "out" / "compare" / "jaccard.csv"));
  REQUIRE(fs::exists(ws / "out" / "compare" / "jaccard_grid.ppm"));

  // planted bins sit on disjoint mass ranges, so the sets share nothing
  const std::string jaccard = test::slurp(ws / "out" / "compare" / "jaccard.csv");
  REQUIRE(contains(jaccard, ",a,b"));
  REQUIRE(contains(jaccard, "1.0000"));
}

TEST_CASE("a single dataset pipeline warns and skips the comparison") {
  test::TempDir ws("cli-single");
  make_dataset(ws / "a", "a", 1000.0, 1);
  expect_exit(cli() + " pipeline " + q(ws / "a") + " -o " + q(ws / "out") + " --k 2" +
                  " --restarts 10 2> " + q(ws / "err.txt"),
              0);
  REQUIRE(contains(test::slurp(ws / "err.txt"), "warning:"));
  REQUIRE(contains(test::slurp(ws / "out" / "MANIFEST"), "compare=skipped"));
  REQUIRE_FALSE(fs::exists(ws / "out" / "compare" / "jaccard.csv"));
}

TEST_CASE("standalone stages reproduce pipeline bytes") {
  test::TempDir ws("cli-stages");
  make_dataset(ws / "ds", "a", 1000.0, 1);
  expect_exit(cli() + " pipeline " + q(ws / "ds") + " -o " + q(ws / "out") +
                  " --k 2 --restarts 10 --seed 5 2> /dev/null",
              0);
  const fs::path ref = ws / "out" / "a";

  expect_exit(cli() + " bin " + q(ws / "ds") + " -o " + q(ws / "sbin"), 0);
  for (const char* f : {"matrix.tsv", "bin_centers.tsv", "coords.tsv", "matrix.meta"})
    expect_same_file(ws / "sbin" / f, ref / "bin" / f);

  expect_exit(cli() + " smooth " + q(ws / "sbin") + " -o " + q(ws / "ssmooth"), 0);
  for (const char* f : {"matrix.tsv", "bin_centers.tsv", "coords.tsv", "matrix.meta",
                        "retained.tsv", "smooth.meta"})
    expect_same_file(ws / "ssmooth" / f, ref / "smooth" / f);

  expect_exit(cli() + " cluster " + q(ws / "ssmooth") + " -o " + q(ws / "sclu") +
                  " --k 2 --restarts 10 --seed 5",
              0);
  for (const char* f : {"clusters.tsv", "cluster.meta"})
    expect_same_file(ws / "sclu" / f, ref / "cluster" / f);

  expect_exit(cli() + " dipps " + q(ws / "ssmooth") + " -o " + q(ws / "sdip") +
                  " --clusters " + q(ws / "sclu" / "clusters.tsv") + " --dataset " +
                  q(ws / "ds") + " 2> /dev/null",
              0);
  for (const char* f : {"features.csv", "features.meta", "dipps_map.tsv"})
    expect_same_file(ws / "sdip" / f, ref / "dipps" / f);

  expect_exit(cli() + " render --kind cluster --clusters " +
                  q(ws / "sclu" / "clusters.tsv") + " -o " + q(ws / "cluster_map.ppm"),
              0);
  expect_same_file(ws / "cluster_map.ppm", ref / "render" / "cluster_map.ppm");

  expect_exit(cli() + " render --kind dipps --dipps-dir " + q(ws / "sdip") + " -o " +
                  q(ws / "dipps_map.ppm"),
              0);
  expect_same_file(ws / "dipps_map.ppm", ref / "render" / "dipps_map.ppm");
}

TEST_CASE("standalone comparison matches the pipeline's") {
  test::TempDir ws("cli-compare");
  make_dataset(ws / "a", "a", 1000.0, 1);
  make_dataset(ws / "b", "b", 2000.0, 2);
  expect_exit(cli() + " pipeline " + q(ws / "a") + " " + q(ws / "b") + " -o " +
                  q(ws / "out") + " --k 2 --restarts 10 --seed 5 2> /dev/null",
              0);
  expect_exit(cli() + " compare " + q(ws / "out" / "a" / "dipps" / "features.csv") +
                  " " + q(ws / "out" / "b" / "dipps" / "features.csv") + " -o " +
                  q(ws / "cmp"),
              0);
  expect_same_file(ws / "cmp" / "jaccard.csv",
                   ws / "out" / "compare" / "jaccard.csv");
  expect_same_file(ws / "cmp" / "jaccard_grid.ppm",
                   ws / "out" / "compare" / "jaccard_grid.ppm");

  expect_exit(cli() + " render --kind jaccard --jaccard " +
                  q(ws / "cmp" / "jaccard.csv") + " -o " + q(ws / "grid.ppm"),
              0);
  expect_same_file(ws / "grid.ppm", ws / "out" / "compare" / "jaccard_grid.ppm");
}

TEST_CASE("repeated pipeline runs differ only in the log") {
  test::TempDir ws("cli-determinism");
  make_dataset(ws / "a", "a", 1000.0, 1);
  make_dataset(ws / "b", "b", 2000.0, 2);
  const std::string tail = " " + q(ws / "a") + " " + q(ws / "b") +
                           " --k 2 --restarts 10 --seed 5 2> /dev/null";
  expect_exit(cli() + " pipeline -o " + q(ws / "out1") + tail, 0);
  expect_exit(cli() + " pipeline -o " + q(ws / "out2") + tail, 0);

  const auto files1 = tree_files(ws / "out1");
  REQUIRE(files1 == tree_files(ws / "out2"));
  REQUIRE(std::find(files1.begin(), files1.end(), fs::path("pipeline.log")) !=
          files1.end());
  for (const fs::path& rel : files1) {
    if (rel == "pipeline.log") continue;
    expect_same_file(ws / "out1" / rel, ws / "out2" / rel);
  }
}

TEST_CASE("usage errors exit with code two") {
  test::TempDir ws("cli-usage");
  expect_exit(cli() + " bogus-subcommand 2> /dev/null", 2);
  expect_exit(cli() + " 2> /dev/null", 2);
  expect_exit(cli() + " smooth " + q(ws.path()) + " -o " + q(ws / "x") +
                  " --tau 1/2 2> /dev/null",
              2);
  expect_exit(cli() + " smooth " + q(ws.path()) + " -o " + q(ws / "x") +
                  " --tau nonsense 2> /dev/null",
              2);
  expect_exit(cli() + " cluster " + q(ws.path()) + " -o " + q(ws / "x") +
                  " --k 0 2> /dev/null",
              2);
  expect_exit(cli() + " render --kind nonsense -o " + q(ws / "x.ppm") +
                  " 2> /dev/null",
              2);
}

TEST_CASE("stage failures exit with code one and are recorded") {
  test::TempDir ws("cli-failure");
  // manifest without a peak table: ingest cannot proceed
  test::spit(ws / "broken" / "dataset.meta", "name=broken\nmz_min=1\nmz_max=10\n");
  expect_exit(cli() + " pipeline " + q(ws / "broken") + " -o " + q(ws / "out") +
                  " 2> " + q(ws / "err.txt"),
              1);
  REQUIRE(contains(test::slurp(ws / "err.txt"), "error:"));
  const std::string manifest = test::slurp(ws / "out" / "MANIFEST");
  REQUIRE(contains(manifest, "broken/ingest=failed"));
  REQUIRE(contains(manifest, "broken/bin=pending"));
  REQUIRE(contains(manifest, "compare=pending"));

  // the standalone stage reports the same failure directly
  expect_exit(cli() + " bin " + q(ws / "broken") + " -o " + q(ws / "x") +
                  " 2> /dev/null",
              1);
}

TEST_CASE("config files supply defaults that flags override") {
  test::TempDir ws("cli-config");
  make_dataset(ws / "ds", "a", 1000.0, 1);
  expect_exit(cli() + " bin " + q(ws / "ds") + " -o " + q(ws / "bin"), 0);
  expect_exit(cli() + " smooth " + q(ws / "bin") + " -o " + q(ws / "smooth"), 0);
  test::spit(ws / "cluster.ini", "k=3\nrestarts=5\nseed=9\n");

  expect_exit(cli() + " cluster " + q(ws / "smooth") + " -o " + q(ws / "c1") +
                  " --config " + q(ws / "cluster.ini"),
              0);
  const std::string meta1 = test::slurp(ws / "c1" / "cluster.meta");
  REQUIRE(contains(meta1, "k=3"));
  REQUIRE(contains(meta1, "restarts=5"));
  REQUIRE(contains(meta1, "seed=9"));

  expect_exit(cli() + " cluster " + q(ws / "smooth") + " -o " + q(ws / "c2") +
                  " --k 2 --config " + q(ws / "cluster.ini"),
              0);
  const std::string meta2 = test::slurp(ws / "c2" / "cluster.meta");
  REQUIRE(contains(meta2, "k=2"));
  REQUIRE(contains(meta2, "seed=9"));
}

TEST_CASE("an out of range bin width warns but still succeeds") {
  test::TempDir ws("cli-binwidth");
  make_dataset(ws / "ds", "a", 1000.0, 1);
  expect_exit(cli() + " bin " + q(ws / "ds") + " -o " + q(ws / "wide") +
                  " --bin-width 3 2> " + q(ws / "err.txt"),
              0);
  REQUIRE(contains(test::slurp(ws / "err.txt"), "warning"));
  expect_exit(cli() + " bin " + q(ws / "ds") + " -o " + q(ws / "normal") + " 2> " +
                  q(ws / "err2.txt"),
              0);
  REQUIRE(test::slurp(ws / "err2.txt").empty());
}

TEST_CASE("the tandem pipeline writes the shifted chain and merged intervals") {
  test::TempDir ws("cli-tandem");
  make_dataset(ws / "ds", "a", 1000.0, 1);
  expect_exit(cli() + " pipeline " + q(ws / "ds") + " -o " + q(ws / "out") +
                  " --k 2 --restarts 10 --seed 5 --tandem 2> /dev/null",
              0);
  const fs::path ref = ws / "out" / "a";
  REQUIRE(fs::exists(ref / "shifted" / "bin" / "matrix.tsv"));
  REQUIRE(fs::exists(ref / "shifted" / "dipps" / "features.csv"));
  REQUIRE(fs::exists(ref / "dipps" / "merged_intervals.tsv"));

  // the same merge is reproducible from standalone stages
  expect_exit(cli() + " bin " + q(ws / "ds") + " -o " + q(ws / "shifted-bin") +
                  " --tandem",
              0);
  for (const char* f : {"matrix.tsv", "bin_centers.tsv", "coords.tsv", "matrix.meta"})
    expect_same_file(ws / "shifted-bin" / f, ref / "shifted" / "bin" / f);
  expect_exit(cli() + " smooth " + q(ws / "shifted-bin") + " -o " +
                  q(ws / "shifted-smooth"),
              0);
  expect_exit(cli() + " cluster " + q(ws / "shifted-smooth") + " -o " +
                  q(ws / "shifted-clu") + " --k 2 --restarts 10 --seed 5",
              0);
  expect_exit(cli() + " dipps " + q(ws / "shifted-smooth") + " -o " +
                  q(ws / "shifted-dip") + " --clusters " +
                  q(ws / "shifted-clu" / "clusters.tsv") + " --dataset " + q(ws / "ds") +
                  " 2> /dev/null",
              0);
  for (const char* f : {"features.csv", "features.meta", "dipps_map.tsv"})
    expect_same_file(ws / "shifted-dip" / f, ref / "shifted" / "dipps" / f);

  // rerun the plain-grid scoring with the shifted features merged in
  expect_exit(cli() + " bin " + q(ws / "ds") + " -o " + q(ws / "plain-bin"), 0);
  expect_exit(cli() + " smooth " + q(ws / "plain-bin") + " -o " + q(ws / "plain-smooth"),
              0);
  expect_exit(cli() + " cluster " + q(ws / "plain-smooth") + " -o " +
                  q(ws / "plain-clu") + " --k 2 --restarts 10 --seed 5",
              0);
  expect_exit(cli() + " dipps " + q(ws / "plain-smooth") + " -o " + q(ws / "plain-dip") +
                  " --clusters " + q(ws / "plain-clu" / "clusters.tsv") + " --dataset " +
                  q(ws / "ds") + " --merge-shifted " +
                  q(ws / "shifted-dip" / "features.csv") + " 2> /dev/null",
              0);
  expect_same_file(ws / "plain-dip" / "merged_intervals.tsv",
                   ref / "dipps" / "merged_intervals.tsv");
}

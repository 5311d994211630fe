#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <sys/wait.h>

#include "bkgnn/bundle.hpp"
#include "bkgnn/nn/checkpoint.hpp"
#include "bkgnn/perturb.hpp"

using namespace bkgnn;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run cli(const std::string& args) {
  const std::string cmd = std::string(BKGNN_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, pipe)) > 0;) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("bkgnn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  std::string p(const std::string& name) const { return (dir / name).string(); }
  fs::path dir;
};

std::size_t line_count(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

std::size_t edge_lines(const fs::path& tsv) {
  std::size_t n = 0;
  std::istringstream in(read_file(tsv));
  for (std::string line; std::getline(in, line);)
    if (!line.empty() && line[0] != '#') ++n;
  return n;
}

}  // namespace

TEST_F(Cli, GeneratePrintsOmegaAndMatchesLibrary) {
  const auto r = cli("generate -o " + p("data"));
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("Omega ≈ 0.904"), std::string::npos) << r.out;
  write_bundle(dir / "lib", generate_dataset(SynthParams{}));
  for (const char* f : {"graph.tsv", "clusters.tsv", "features.csv", "labels.csv", "meta.json"})
    EXPECT_EQ(read_file(dir / "data" / f), read_file(dir / "lib" / f)) << f;
  ASSERT_EQ(cli("generate -o " + p("again")).code, 0);
  for (const char* f : {"graph.tsv", "features.csv", "labels.csv", "meta.json"})
    EXPECT_EQ(read_file(dir / "data" / f), read_file(dir / "again" / f)) << f;
}

TEST_F(Cli, GenerateSingleClassBundle) {
  ASSERT_EQ(cli("generate -C 1 -M 4 -N 5 --seed 3 -o " + p("one")).code, 0);
  const auto ds = read_bundle(dir / "one");
  EXPECT_EQ(ds.labels, std::vector<int>(5, 0));
  EXPECT_EQ(ds.graph.edge_count(), 6u);
}

TEST_F(Cli, UsageErrorsExitTwoBeforeWriting) {
  EXPECT_EQ(cli("generate --omega -1 -o " + p("bad")).code, 2);
  EXPECT_FALSE(fs::exists(dir / "bad"));
  EXPECT_EQ(cli("generate -C 0 -o " + p("bad")).code, 2);
  EXPECT_EQ(cli("generate").code, 2);
  EXPECT_EQ(cli("no-such-command").code, 2);
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("--help").code, 0);
  ASSERT_EQ(cli("generate -N 5 -o " + p("d")).code, 0);
  EXPECT_EQ(cli("perturb -g " + p("d/graph.tsv") + " -p shuffle:0.5 -o " + p("x.tsv")).code, 2);
  EXPECT_EQ(cli("perturb -g " + p("d/graph.tsv") + " -p remove:1.5 -o " + p("x.tsv")).code, 2);
  EXPECT_FALSE(fs::exists(dir / "x.tsv"));
  EXPECT_EQ(cli("metrics -g " + p("d/graph.tsv") + " -c " + p("d/clusters.tsv") + " -k 0").code, 2);
}

TEST_F(Cli, ParseErrorsExitTwoAndIoErrorsExitThree) {
  write_text(dir / "broken.tsv", "0\t1\t1\n2\tx\t1\n");
  write_text(dir / "c.tsv", "0\t0\n1\t0\n2\t0\n");
  EXPECT_EQ(cli("metrics -g " + p("broken.tsv") + " -c " + p("c.tsv")).code, 2);
  EXPECT_EQ(cli("metrics -g " + p("missing.tsv") + " -c " + p("c.tsv")).code, 3);
  ASSERT_EQ(cli("generate -N 5 -o " + p("d")).code, 0);
  EXPECT_EQ(cli("perturb -g " + p("d/graph.tsv") + " -p remove:0.5 -o " + p("no/such/dir/x.tsv")).code, 3);
  write_text(dir / "sweep.json", "{\"models\": [{\"kind\": \"MLP\"}], \"bogus\": true}");
  EXPECT_EQ(cli("sweep --config " + p("sweep.json") + " -o " + p("s")).code, 2);
  write_text(dir / "sweep.json", "{not json");
  EXPECT_EQ(cli("sweep --config " + p("sweep.json") + " -o " + p("s")).code, 2);
  EXPECT_EQ(cli("sweep --config " + p("none.json") + " -o " + p("s")).code, 3);
}

TEST_F(Cli, PerturbCountsAndDeterminism) {
  ASSERT_EQ(cli("generate -N 5 -o " + p("d")).code, 0);
  const std::string g = "perturb -g " + p("d/graph.tsv");
  ASSERT_EQ(cli(g + " -p remove:1.0 -o " + p("empty.tsv")).code, 0);
  EXPECT_EQ(edge_lines(dir / "empty.tsv"), 0u);
  ASSERT_EQ(cli(g + " -p add:1.0 -o " + p("double.tsv")).code, 0);
  EXPECT_EQ(edge_lines(dir / "double.tsv"), 480u);
  ASSERT_EQ(cli(g + " -p noise:2.0:replace:7 -o " + p("n1.tsv")).code, 0);
  ASSERT_EQ(cli(g + " -p noise:2.0:replace:7 -o " + p("n2.tsv")).code, 0);
  EXPECT_EQ(read_file(dir / "n1.tsv"), read_file(dir / "n2.tsv"));
  EXPECT_EQ(read_file(dir / "n1.tsv.provenance.json"), read_file(dir / "n2.tsv.provenance.json"));
  EXPECT_EQ(edge_lines(dir / "n1.tsv"), 240u);

  // Same bytes as the library call with the same seed.
  const auto lib = apply_perturbation(read_edge_list(dir / "d/graph.tsv"), parse_perturbation("noise:2.0:replace:7"));
  write_edge_list(dir / "lib.tsv", lib.graph);
  EXPECT_EQ(read_file(dir / "n1.tsv"), read_file(dir / "lib.tsv"));

  EXPECT_EQ(cli(g + " -p detach:0.3:1 -o " + p("dr.tsv")).code, 2);  // needs clusters
  ASSERT_EQ(cli(g + " -p detach:0.3:1 -c " + p("d/clusters.tsv") + " -o " + p("dr.tsv") + " --clusters-out " +
                p("dr.clusters.tsv"))
                .code,
            0);
  EXPECT_EQ(read_clusters(dir / "dr.clusters.tsv").size(), 2u);
}

TEST_F(Cli, MetricsOutput) {
  ASSERT_EQ(cli("generate -N 5 -o " + p("d")).code, 0);
  auto r = cli("metrics -g " + p("d/graph.tsv") + " -c " + p("d/clusters.tsv"));
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "cluster,aspl,mean_rf_1\n0,1,16\n1,1,16\n");
  ASSERT_EQ(cli("perturb -g " + p("d/graph.tsv") + " -p remove:1.0 -o " + p("empty.tsv")).code, 0);
  r = cli("metrics -g " + p("empty.tsv") + " -c " + p("d/clusters.tsv") + " -k 2");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "cluster,aspl,mean_rf_2\n0,0,1\n1,0,1\n");
}

TEST_F(Cli, TrainWritesArtifacts) {
  ASSERT_EQ(cli("generate -N 30 -o " + p("d")).code, 0);
  write_text(dir / "train.json", R"({"model": {"kind": "GCN", "epochs": 4, "seed": 2}, "split": {"seed": 1}})");
  const auto r = cli("train -b " + p("d") + " --config " + p("train.json") + " -o " + p("t"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("test accuracy"), std::string::npos);
  const auto loss = read_file(dir / "t/loss.csv");
  EXPECT_EQ(loss.rfind("epoch,loss\n1,", 0), 0u);
  EXPECT_EQ(line_count(loss), 5u);
  const auto summary = nlohmann::json::parse(read_file(dir / "t/summary.json"));
  EXPECT_EQ(summary["test_size"], 12);
  EXPECT_EQ(nn::read_checkpoint(dir / "t/model.ckpt").size(), 8u);  // 3 GCN layers + classifier, weight and bias each
  // Rerun gives the same checkpoint bytes.
  ASSERT_EQ(cli("train -b " + p("d") + " --config " + p("train.json") + " -o " + p("t2")).code, 0);
  EXPECT_EQ(read_file(dir / "t/model.ckpt"), read_file(dir / "t2/model.ckpt"));
}

TEST_F(Cli, SweepMinimalAndWorkerInvariant) {
  write_text(dir / "min.json",
             R"({"dataset": {"synthetic": {"N": 20}}, "models": [{"kind": "LogRegL1", "epochs": 10}], "runs": 1})");
  auto r = cli("sweep --config " + p("min.json") + " -o " + p("min"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(line_count(read_file(dir / "min/results.csv")), 3u);
  for (const char* f : {"aggregates.csv", "curve.svg", "provenance.json"}) EXPECT_TRUE(fs::exists(dir / "min" / f));

  write_text(dir / "s.json", R"({
    "dataset": {"synthetic": {"N": 20}},
    "models": [{"kind": "GCN", "epochs": 2, "hidden_dim": 4}, {"kind": "MLP", "epochs": 3}],
    "perturbation": {"kind": "add", "kappas": [0, 0.5, 1]},
    "runs": 3, "seed": 11
  })");
  ASSERT_EQ(cli("sweep --config " + p("s.json") + " -w 1 -o " + p("w1")).code, 0);
  ASSERT_EQ(cli("sweep --config " + p("s.json") + " -w 8 -o " + p("w8")).code, 0);
  for (const char* f : {"results.csv", "aggregates.csv", "curve.svg", "provenance.json"})
    EXPECT_EQ(read_file(dir / "w1" / f), read_file(dir / "w8" / f)) << f;
  EXPECT_EQ(line_count(read_file(dir / "w1/results.csv")), 1u + 3 * 3 * 2 * 2);

  ASSERT_EQ(cli("plot -i " + p("w1/results.csv") + " -o " + p("from_results.svg")).code, 0);
  ASSERT_EQ(cli("plot -i " + p("w1/aggregates.csv") + " -o " + p("from_aggregates.svg")).code, 0);
  EXPECT_EQ(read_file(dir / "from_results.svg"), read_file(dir / "w1/curve.svg"));
  EXPECT_EQ(read_file(dir / "from_aggregates.svg"), read_file(dir / "w1/curve.svg"));
}

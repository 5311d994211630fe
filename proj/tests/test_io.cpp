#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "bkgnn/bundle.hpp"
#include "bkgnn/io.hpp"
#include "bkgnn/nn/checkpoint.hpp"
#include "bkgnn/perturb.hpp"
#include "support.hpp"

using namespace bkgnn;
namespace fs = std::filesystem;

namespace {

std::string to_tsv(const BkGraph& g) {
  std::ostringstream s;
  write_edge_list(s, g);
  return s.str();
}

BkGraph from_tsv(const std::string& text) {
  std::istringstream s(text);
  return read_edge_list(s);
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("bkgnn-io-" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) { return read_file(p); }

}  // namespace

TEST(EdgeListTsv, ParsesCommentsAndDefaultWeight) {
  const auto g = from_tsv("# a comment\n0\t1\t3\n2\t1\n\n# trailing\n");
  EXPECT_EQ(g.node_count(), 3u);
  EXPECT_EQ(g.edge_count(), 2u);
  EXPECT_EQ(g.weight(0, 1), 3);
  EXPECT_EQ(g.weight(1, 2), 1);
}

TEST(EdgeListTsv, WriterIsCanonical) {
  const auto g = from_tsv("3\t0\t2\n1\t0\n");
  EXPECT_EQ(to_tsv(g), "# nodes 4\n0\t1\t1\n0\t3\t2\n");
}

TEST(EdgeListTsv, NodesHeaderKeepsIsolatedNodes) {
  const auto g = from_tsv("# nodes 6\n0\t1\t1\n");
  EXPECT_EQ(g.node_count(), 6u);
  EXPECT_EQ(from_tsv(to_tsv(build_graph(5, {}))).node_count(), 5u);
}

TEST(EdgeListTsv, ParseErrorsCarryLineNumbers) {
  const std::pair<const char*, Errc> cases[] = {{"0\t1\n1\tx\n", Errc::ParseError},
                                               {"0\t1\t0\n", Errc::InvalidWeight},
                                               {"0\n", Errc::ParseError},
                                               {"0\t0\n", Errc::SelfLoopRejected},
                                               {"0\t1\t2\t3\n", Errc::ParseError}};
  for (const auto& [bad, code] : cases) {
    try {
      from_tsv(bad);
      ADD_FAILURE() << "accepted: " << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), code) << bad;
      EXPECT_NE(std::string(e.what()).find("line"), std::string::npos) << e.what();
    }
  }
}

TEST(EdgeListTsv, RoundTripIsByteIdentical) {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = oracle::random_graph(rng, 1 + rng.index(40), 0.2, 9);
    const auto first = to_tsv(g);
    const auto back = from_tsv(first);
    EXPECT_EQ(back, g);
    EXPECT_EQ(to_tsv(back), first);
  }
}

TEST(EdgeListTsv, MissingFileIsIoError) {
  try {
    read_edge_list(fs::path("/nonexistent/graph.tsv"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::IoError);
  }
}

TEST(Clusters, RoundTrip) {
  const std::vector<NodeSet> clusters{{0, 2, 4}, {1, 3}, {5}};
  std::ostringstream out;
  write_clusters(out, clusters);
  std::istringstream in(out.str());
  EXPECT_EQ(read_clusters(in), clusters);
}

TEST(Bundle, WriteReadWriteIsByteIdentical) {
  SynthParams p;
  p.samples_per_class = 40;
  p.seed = 17;
  const auto ds = generate_dataset(p);
  const auto a = scratch("a"), b = scratch("b");
  write_bundle(a, ds);
  const auto back = read_bundle(a);
  EXPECT_EQ(back, ds);
  write_bundle(b, back);
  for (const char* f : {"graph.tsv", "clusters.tsv", "features.csv", "labels.csv", "meta.json"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(Bundle, SingleClassBundle) {
  SynthParams p;
  p.clusters = 1;
  p.samples_per_class = 3;
  const auto dir = scratch("single");
  write_bundle(dir, generate_dataset(p));
  const auto back = read_bundle(dir);
  EXPECT_EQ(back.labels, (std::vector<int>{0, 0, 0}));
  EXPECT_EQ(back.features.cols(), 16u);
}

TEST(Bundle, RejectsInconsistentFiles) {
  SynthParams p;
  p.samples_per_class = 5;
  const auto dir = scratch("bad");
  write_bundle(dir, generate_dataset(p));
  {
    auto out = open_out(dir / "labels.csv");
    out << "label\n0\n1\n";
  }
  try {
    read_bundle(dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ParseError);
  }
}

TEST(Checkpoint, RoundTripIsExact) {
  nn::DenseMatrix a(2, 3), b(1, 1);
  Rng rng(3);
  for (double& v : a.values()) v = rng.normal() * 1e-300 + rng.normal();
  b(0, 0) = -0.0;
  const std::vector<nn::NamedTensor> tensors{{"layer.weight", a}, {"layer.bias", b}};
  std::stringstream s;
  nn::write_checkpoint(s, tensors);
  const auto first = s.str();
  const auto back = nn::read_checkpoint(s);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].name, "layer.weight");
  EXPECT_EQ(back[0].value, a);
  EXPECT_TRUE(std::signbit(back[1].value(0, 0)));
  std::stringstream again;
  nn::write_checkpoint(again, back);
  EXPECT_EQ(again.str(), first);
}

TEST(Checkpoint, RejectsTruncatedInput) {
  std::stringstream s;
  nn::write_checkpoint(s, {{"w", nn::DenseMatrix(4, 4, 1.0)}});
  auto text = s.str();
  text.resize(text.size() - 5);
  std::istringstream in(text);
  EXPECT_THROW(nn::read_checkpoint(in), Error);
  std::istringstream wrong("not a checkpoint\n");
  EXPECT_THROW(nn::read_checkpoint(wrong), Error);
}

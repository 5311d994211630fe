#include <gtest/gtest.h>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/skew_normal.hpp>
#include <cmath>
#include <numbers>

#include "bkgnn/graph.hpp"
#include "bkgnn/synth.hpp"

using namespace bkgnn;

TEST(ClusterGraph, Examples) {
  const auto a = build_cluster_graph(2, 16);
  EXPECT_EQ(a.graph.node_count(), 32u);
  EXPECT_EQ(a.graph.edge_count(), 240u);
  EXPECT_EQ(connected_components(a.graph).size(), 2u);
  for (NodeId v = 0; v < 32; ++v) EXPECT_EQ(a.graph.degree(v), 15u);
  EXPECT_EQ(a.clusters[1].front(), 16u);
  EXPECT_EQ(a.clusters[1].back(), 31u);

  const auto b = build_cluster_graph(1, 1);
  EXPECT_EQ(b.graph.node_count(), 1u);
  EXPECT_EQ(b.graph.edge_count(), 0u);

  const auto c = build_cluster_graph(3, 4);
  for (NodeId v = 0; v < 12; ++v) EXPECT_EQ(c.graph.degree(v), 3u);
  for (NodeId u = 0; u < 12; ++u)
    for (NodeId v = 0; v < 12; ++v) {
      if (u == v) continue;
      EXPECT_EQ(c.graph.has_edge(u, v), u / 4 == v / 4);
    }
}

TEST(SkewNormal, PdfMatchesBoost) {
  for (double alpha : {-3.0, -1.8, 0.0, 0.7, 1.8, 5.0})
    for (double xi : {-0.285, 0.0, 1.5})
      for (double omega : {0.2, 0.5, 2.0}) {
        const boost::math::skew_normal_distribution<double> d(xi, omega, alpha);
        for (double x = -4.0; x <= 4.0; x += 0.37)
          EXPECT_NEAR(skew_normal_pdf(x, xi, omega, alpha), boost::math::pdf(d, x), 1e-13);
      }
}

TEST(SkewNormal, Examples) {
  EXPECT_NEAR(skew_normal_pdf(0, 0, 1, 0), 1.0 / std::sqrt(2.0 * std::numbers::pi), 1e-15);
  const double total = adaptive_simpson(
      [](double x) { return skew_normal_pdf(x, -0.285, 0.5, 1.8); }, -8.0, 8.0, 1e-10, 64);
  EXPECT_NEAR(total, 1.0, 1e-8);
  for (double x = -3.0; x <= 3.0; x += 0.25)
    EXPECT_NEAR(skew_normal_pdf(x, -0.285, 0.5, 1.8), skew_normal_pdf(-x, 0.285, 0.5, -1.8), 1e-15);
  EXPECT_THROW(skew_normal_pdf(0, 0, 0, 1), Error);
  EXPECT_THROW(skew_normal_pdf(0, 0, -1, 1), Error);
}

TEST(SkewNormal, MeanFormula) {
  // scipy.stats.skewnorm.mean(1.8, -0.285, 0.5)
  EXPECT_NEAR(skew_normal_mean(-0.285, 0.5, 1.8), 0.06373829716543122, 1e-13);
  EXPECT_NEAR(skew_normal_mean(0.285, 0.5, -1.8), -0.06373829716543122, 1e-13);
}

TEST(SkewNormal, SymmetricCaseSampleMean) {
  Rng rng(1);
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += skew_normal_sample(0.7, 1.3, 0.0, rng);
  EXPECT_NEAR(sum / n, 0.7, 3.0 * 1.3 / std::sqrt(n));
}

TEST(SkewNormal, KolmogorovSmirnovAgainstBoostCdf) {
  Rng rng(2024);
  const int n = 100000;
  std::vector<double> xs(n);
  for (double& x : xs) x = skew_normal_sample(-0.285, 0.5, 1.8, rng);
  std::sort(xs.begin(), xs.end());
  const boost::math::skew_normal_distribution<double> d(-0.285, 0.5, 1.8);
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    const double f = boost::math::cdf(d, xs[static_cast<std::size_t>(i)]);
    ks = std::max({ks, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  EXPECT_LT(ks, 0.01);
}

TEST(SkewNormal, SamplingIsDeterministic) {
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i)
    EXPECT_EQ(skew_normal_sample(0.1, 0.5, 1.8, a), skew_normal_sample(0.1, 0.5, 1.8, b));
}

TEST(Overlap, MatchesQuadratureOracle) {
  // Values from scipy.integrate.quad over the same integrand.
  EXPECT_NEAR(overlap_coefficient(-0.57, 0.5, 1.8), 0.9036713006623925, 1e-5);
  EXPECT_NEAR(overlap_coefficient(0.57, 0.5, 1.8), 0.05005360197262417, 1e-5);
  EXPECT_NEAR(overlap_coefficient(-1.0, 0.5, 1.8), 0.6274520420686351, 1e-5);
  EXPECT_NEAR(overlap_coefficient(0.3, 1.0, -2.0), 0.428540617872493, 1e-5);
  EXPECT_NEAR(overlap_coefficient(-2.0, 0.7, 0.0), 0.1531274510196694, 1e-5);
  EXPECT_LT(overlap_coefficient(-10, 0.5, 1.8), 1e-3);
  EXPECT_NEAR(overlap_coefficient(0.0, 0.8, 0.0), 1.0, 1e-6);
}

TEST(Overlap, ReflectionSymmetry) {
  // Mirroring x -> -x swaps the two laws, which flips both delta_xi and alpha.
  for (double dxi : {-1.3, -0.57, -0.1, 0.4})
    for (double alpha : {-2.0, 0.0, 1.8})
      EXPECT_NEAR(overlap_coefficient(dxi, 0.5, alpha), overlap_coefficient(-dxi, 0.5, -alpha), 1e-6);
  // Without skew the sign of delta_xi alone does not matter.
  EXPECT_NEAR(overlap_coefficient(-0.9, 0.6, 0.0), overlap_coefficient(0.9, 0.6, 0.0), 1e-6);
}

TEST(Overlap, BelowOneWhenLawsDiffer) {
  for (double dxi : {-1.0, -0.2, 0.3})
    for (double alpha : {-1.0, 0.0, 2.5}) {
      const double o = overlap_coefficient(dxi, 0.5, alpha);
      EXPECT_GE(o, 0.0);
      EXPECT_LT(o, 1.0 - 1e-4);
    }
  // delta_xi = 0 with alpha != 0 still differs (mirror-image skews).
  EXPECT_LT(overlap_coefficient(0.0, 0.5, 1.8), 1.0 - 1e-4);
}

TEST(GenerateDataset, DefaultShape) {
  const auto ds = generate_dataset(SynthParams{});
  EXPECT_EQ(ds.features.rows(), 1200u);
  EXPECT_EQ(ds.features.cols(), 32u);
  EXPECT_EQ(std::count(ds.labels.begin(), ds.labels.end(), 0), 600);
  EXPECT_EQ(std::count(ds.labels.begin(), ds.labels.end(), 1), 600);
  EXPECT_EQ(ds.graph.edge_count(), 240u);
  ASSERT_EQ(ds.clusters.size(), 2u);
  // Rows are shuffled: the first 600 rows are not all one class.
  EXPECT_NE(std::count(ds.labels.begin(), ds.labels.begin() + 600, 0), 600);
}

TEST(GenerateDataset, SingleSample) {
  SynthParams p;
  p.clusters = 1;
  p.samples_per_class = 1;
  const auto ds = generate_dataset(p);
  EXPECT_EQ(ds.features.rows(), 1u);
  EXPECT_EQ(ds.features.cols(), 16u);
  EXPECT_EQ(ds.labels, std::vector<int>{0});
}

TEST(GenerateDataset, DeterministicPerSeed) {
  SynthParams p;
  p.samples_per_class = 50;
  p.seed = 42;
  EXPECT_EQ(generate_dataset(p), generate_dataset(p));
  auto q = p;
  q.seed = 43;
  EXPECT_NE(generate_dataset(p).features, generate_dataset(q).features);
}

TEST(GenerateDataset, ColumnMeansFollowActiveCluster) {
  SynthParams p;
  p.samples_per_class = 3000;
  p.seed = 8;
  const auto ds = generate_dataset(p);
  const double active = skew_normal_mean(p.delta_xi / 2, p.omega, p.alpha);
  const double inactive = skew_normal_mean(-p.delta_xi / 2, p.omega, -p.alpha);
  // The skew shift omega * delta * sqrt(2/pi) = 0.349 outweighs |delta_xi| / 2 = 0.285,
  // so the active mean sits above the inactive one despite delta_xi < 0.
  ASSERT_GT(active, inactive);
  for (int cls = 0; cls < 2; ++cls)
    for (int cluster = 0; cluster < 2; ++cluster) {
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t r = 0; r < ds.features.rows(); ++r) {
        if (ds.labels[r] != cls) continue;
        for (NodeId v : ds.clusters[static_cast<std::size_t>(cluster)]) sum += ds.features(r, v);
        count += 16;
      }
      const double mean = sum / static_cast<double>(count);
      // 48000 draws per cell, sd < 0.5: 5 sigma is about 0.011.
      EXPECT_NEAR(mean, cls == cluster ? active : inactive, 0.012) << cls << "," << cluster;
    }
}

TEST(GenerateDataset, UnskewedActiveMeanIsLowerForNegativeGap) {
  SynthParams p;
  p.alpha = 0.0;
  p.samples_per_class = 2000;
  p.seed = 10;
  const auto ds = generate_dataset(p);
  for (int cls = 0; cls < 2; ++cls) {
    double act = 0, inact = 0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < ds.features.rows(); ++r) {
      if (ds.labels[r] != cls) continue;
      ++n;
      for (NodeId v = 0; v < 32; ++v) (static_cast<int>(v / 16) == cls ? act : inact) += ds.features(r, v);
    }
    act /= 16.0 * static_cast<double>(n);
    inact /= 16.0 * static_cast<double>(n);
    EXPECT_NEAR(act, -0.285, 0.02);
    EXPECT_NEAR(inact, 0.285, 0.02);
  }
}

TEST(GenerateDataset, ActiveColumnsAreSkewedTowardCluster) {
  // Active law has positive skew, inactive negative: the sample skewness of
  // the active block must be positive for every class.
  SynthParams p;
  p.samples_per_class = 2000;
  p.seed = 9;
  const auto ds = generate_dataset(p);
  for (int cls = 0; cls < 2; ++cls) {
    std::vector<double> active, inactive;
    for (std::size_t r = 0; r < ds.features.rows(); ++r) {
      if (ds.labels[r] != cls) continue;
      for (NodeId v = 0; v < 32; ++v)
        (static_cast<int>(v / 16) == cls ? active : inactive).push_back(ds.features(r, v));
    }
    auto skew = [](const std::vector<double>& x) {
      double m = 0, m2 = 0, m3 = 0;
      for (double v : x) m += v;
      m /= static_cast<double>(x.size());
      for (double v : x) {
        m2 += (v - m) * (v - m);
        m3 += (v - m) * (v - m) * (v - m);
      }
      m2 /= static_cast<double>(x.size());
      m3 /= static_cast<double>(x.size());
      return m3 / std::pow(m2, 1.5);
    };
    EXPECT_GT(skew(active), 0.05);
    EXPECT_LT(skew(inactive), -0.05);
  }
}

TEST(SynthParams, Validation) {
  SynthParams p;
  p.omega = 0.0;
  EXPECT_THROW(p.validate(), Error);
  p = SynthParams{};
  p.nodes_per_cluster = 0;
  EXPECT_THROW(p.validate(), Error);
  p = SynthParams{};
  p.samples_per_class = 0;
  EXPECT_THROW(p.validate(), Error);
}

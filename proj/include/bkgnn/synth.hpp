#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "bkgnn/error.hpp"
#include "bkgnn/graph.hpp"
#include "bkgnn/nn/matrix.hpp"
#include "bkgnn/rng.hpp"

namespace bkgnn {

/// Parameters of a synthetic dataset D(C, M, N).
struct SynthParams {
  int clusters = 2;             // C: clusters == classes
  int nodes_per_cluster = 16;   // M
  int samples_per_class = 600;  // N
  double delta_xi = -0.57;      // location separation of the two feature laws
  double omega = 0.5;           // scale
  double alpha = 1.8;           // shape (skewness)
  std::uint64_t seed = 0;

  std::size_t node_count() const { return static_cast<std::size_t>(clusters) * nodes_per_cluster; }
  std::size_t sample_count() const { return static_cast<std::size_t>(clusters) * samples_per_class; }

  void validate() const {
    if (clusters < 1) throw Error(Errc::InvalidParam, "C must be >= 1");
    if (nodes_per_cluster < 1) throw Error(Errc::InvalidParam, "M must be >= 1");
    if (samples_per_class < 1) throw Error(Errc::InvalidParam, "N must be >= 1");
    if (!(omega > 0.0) || !std::isfinite(omega)) throw Error(Errc::InvalidParam, "omega must be > 0");
    if (!std::isfinite(delta_xi) || !std::isfinite(alpha))
      throw Error(Errc::InvalidParam, "delta_xi and alpha must be finite");
  }

  friend bool operator==(const SynthParams&, const SynthParams&) = default;
};

struct ClusterGraph {
  BkGraph graph;
  std::vector<NodeSet> clusters;
};

/// C disjoint complete clusters of M nodes; cluster c owns ids cM .. cM+M-1.
inline ClusterGraph build_cluster_graph(int clusters, int nodes_per_cluster) {
  if (clusters < 1 || nodes_per_cluster < 1)
    throw Error(Errc::InvalidParam, "build_cluster_graph needs C >= 1 and M >= 1");
  const auto m = static_cast<NodeId>(nodes_per_cluster);
  ClusterGraph out{BkGraph(static_cast<std::size_t>(clusters) * m), {}};
  for (NodeId c = 0; c < static_cast<NodeId>(clusters); ++c) {
    NodeSet members;
    for (NodeId i = 0; i < m; ++i) {
      members.push_back(c * m + i);
      for (NodeId j = i + 1; j < m; ++j) out.graph.set_edge(c * m + i, c * m + j, 1);
    }
    out.clusters.push_back(std::move(members));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Skew-normal law SN(xi, omega, alpha)
// ---------------------------------------------------------------------------

inline double standard_normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

inline double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double skew_normal_pdf(double x, double xi, double omega, double alpha) {
  if (!(omega > 0.0)) throw Error(Errc::InvalidParam, "skew_normal_pdf: omega must be > 0");
  const double z = (x - xi) / omega;
  return 2.0 / omega * standard_normal_pdf(z) * standard_normal_cdf(alpha * z);
}

/// E[X] = xi + omega * delta * sqrt(2/pi), delta = alpha / sqrt(1 + alpha^2).
inline double skew_normal_mean(double xi, double omega, double alpha) {
  const double delta = alpha / std::sqrt(1.0 + alpha * alpha);
  return xi + omega * delta * std::sqrt(2.0 / std::numbers::pi);
}

/// One draw by conditioning a correlated normal pair on the sign of the first.
inline double skew_normal_sample(double xi, double omega, double alpha, Rng& rng) {
  if (!(omega > 0.0)) throw Error(Errc::InvalidParam, "skew_normal_sample: omega must be > 0");
  const double delta = alpha / std::sqrt(1.0 + alpha * alpha);
  const double u0 = rng.normal();
  const double u1 = delta * u0 + std::sqrt(1.0 - delta * delta) * rng.normal();
  return xi + omega * (u0 >= 0.0 ? u1 : -u1);
}

namespace detail {

template <class F>
double simpson_step(const F& f, double a, double b, double fa, double fm, double fb, double whole,
                    double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of f over [a, b] with absolute tolerance tol.
/// The interval is first cut into `panels` pieces so narrow peaks on a wide
/// range are not skipped by the initial coarse estimate.
template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol = 1e-6, int panels = 1,
                        int max_depth = 40) {
  double total = 0.0;
  const double width = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * width;
    const double hi = (p + 1 == panels) ? b : lo + width;
    const double flo = f(lo), fhi = f(hi), fmid = f(0.5 * (lo + hi));
    const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    total += detail::simpson_step(f, lo, hi, flo, fmid, fhi, whole, tol / panels, max_depth);
  }
  return total;
}

/// Overlapping coefficient of the active law SN(dxi/2, omega, alpha) and the
/// inactive law SN(-dxi/2, omega, -alpha): the integral of min(f, g).
inline double overlap_coefficient(double delta_xi, double omega, double alpha) {
  if (!(omega > 0.0)) throw Error(Errc::InvalidParam, "overlap_coefficient: omega must be > 0");
  const double lo = -std::abs(delta_xi) / 2.0 - 10.0 * omega;
  const double hi = std::abs(delta_xi) / 2.0 + 10.0 * omega;
  auto integrand = [&](double x) {
    return std::min(skew_normal_pdf(x, delta_xi / 2.0, omega, alpha),
                    skew_normal_pdf(x, -delta_xi / 2.0, omega, -alpha));
  };
  const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / (omega / 4.0))));
  return std::clamp(adaptive_simpson(integrand, lo, hi, 1e-6, panels), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Dataset D(C, M, N) = (G, X, y)
// ---------------------------------------------------------------------------

struct SynthDataset {
  BkGraph graph;
  nn::DenseMatrix features;  // (C*N) x (C*M)
  std::vector<int> labels;   // length C*N
  std::vector<NodeSet> clusters;
  SynthParams params;

  std::size_t sample_count() const { return features.rows(); }
  std::size_t feature_count() const { return features.cols(); }
  int class_count() const { return params.clusters; }

  friend bool operator==(const SynthDataset&, const SynthDataset&) = default;
};

// Stream tags under the master seed.
inline constexpr std::uint64_t kFeatureStream = 1;
inline constexpr std::uint64_t kShuffleStream = 2;

/// Samples of class c draw the columns of cluster c from the active law and
/// every other column from the inactive law. Rows are generated class by
/// class, then permuted with a stream independent of the feature draws.
inline SynthDataset generate_dataset(const SynthParams& params) {
  params.validate();
  auto [graph, clusters] = build_cluster_graph(params.clusters, params.nodes_per_cluster);
  const std::size_t rows = params.sample_count();
  const std::size_t cols = params.node_count();
  const double half = params.delta_xi / 2.0;

  nn::DenseMatrix ordered(rows, cols);
  std::vector<int> ordered_labels(rows);
  Rng feature_rng(derive_seed({params.seed, kFeatureStream}));
  for (std::size_t r = 0; r < rows; ++r) {
    const int c = static_cast<int>(r / static_cast<std::size_t>(params.samples_per_class));
    ordered_labels[r] = c;
    const std::size_t first = static_cast<std::size_t>(c) * params.nodes_per_cluster;
    const std::size_t last = first + params.nodes_per_cluster;
    for (std::size_t j = 0; j < cols; ++j) {
      const bool active = j >= first && j < last;
      ordered(r, j) = active ? skew_normal_sample(half, params.omega, params.alpha, feature_rng)
                             : skew_normal_sample(-half, params.omega, -params.alpha, feature_rng);
    }
  }

  std::vector<std::size_t> order(rows);
  for (std::size_t i = 0; i < rows; ++i) order[i] = i;
  Rng shuffle_rng(derive_seed({params.seed, kShuffleStream}));
  shuffle_rng.shuffle(order);

  SynthDataset ds{std::move(graph), nn::DenseMatrix(rows, cols), std::vector<int>(rows),
                  std::move(clusters), params};
  for (std::size_t i = 0; i < rows; ++i) {
    const auto src = ordered.row(order[i]);
    std::copy(src.begin(), src.end(), ds.features.row(i).begin());
    ds.labels[i] = ordered_labels[order[i]];
  }
  return ds;
}

}  // namespace bkgnn

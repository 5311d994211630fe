#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "bkgnn/graph.hpp"
#include "bkgnn/rng.hpp"

namespace bkgnn::oracle {

/// Random simple graph with integer weights in [1, max_weight].
inline BkGraph random_graph(Rng& rng, std::size_t n, double density, Weight max_weight = 1) {
  std::vector<WeightedEdge> edges;
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = u + 1; v < n; ++v)
      if (rng.uniform() < density)
        edges.push_back({u, v, 1 + static_cast<Weight>(rng.index(static_cast<std::uint64_t>(max_weight)))});
  return build_graph(n, edges);
}

/// All-pairs hop distances restricted to `allowed` nodes (Floyd-Warshall on
/// a dense matrix); unreachable pairs stay at `kInf`.
inline constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max() / 4;

inline std::vector<std::vector<std::size_t>> floyd_warshall(const BkGraph& g, const std::vector<bool>& allowed) {
  const std::size_t n = g.node_count();
  std::vector<std::vector<std::size_t>> d(n, std::vector<std::size_t>(n, kInf));
  for (std::size_t u = 0; u < n; ++u) {
    if (!allowed[u]) continue;
    d[u][u] = 0;
    for (std::size_t v = 0; v < n; ++v)
      if (allowed[v] && u != v && g.has_edge(static_cast<NodeId>(u), static_cast<NodeId>(v))) d[u][v] = 1;
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (d[i][k] + d[k][j] < d[i][j]) d[i][j] = d[i][k] + d[k][j];
  return d;
}

inline double oracle_aspl(const BkGraph& g, const std::vector<NodeId>& cluster) {
  std::vector<bool> allowed(g.node_count(), false);
  for (auto v : cluster) allowed[v] = true;
  const auto d = floyd_warshall(g, allowed);
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < cluster.size(); ++a)
    for (std::size_t b = a + 1; b < cluster.size(); ++b)
      if (d[cluster[a]][cluster[b]] < kInf) {
        sum += static_cast<double>(d[cluster[a]][cluster[b]]);
        ++pairs;
      }
  return pairs ? sum / static_cast<double>(pairs) : 0.0;
}

inline std::size_t oracle_receptive_field(const BkGraph& g, NodeId v, std::size_t k, bool include_self) {
  const auto d = floyd_warshall(g, std::vector<bool>(g.node_count(), true));
  std::size_t count = 0;
  for (std::size_t u = 0; u < g.node_count(); ++u)
    if (d[v][u] <= k && (include_self || u != v)) ++count;
  return count;
}

}  // namespace bkgnn::oracle

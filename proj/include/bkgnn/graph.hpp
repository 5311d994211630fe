#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "bkgnn/error.hpp"

namespace bkgnn {

using NodeId = std::uint32_t;
using Weight = std::int64_t;

/// Ordered collection of distinct node ids.
using NodeSet = std::vector<NodeId>;

struct WeightedEdge {
  NodeId u = 0;
  NodeId v = 0;
  Weight weight = 1;

  friend bool operator==(const WeightedEdge&, const WeightedEdge&) = default;
};

struct Neighbor {
  NodeId id = 0;
  Weight weight = 1;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Undirected simple graph with positive integer edge weights.
///
/// Adjacency is kept as one sorted neighbor list per node, so every traversal
/// visits nodes in ascending id order and downstream sampling is reproducible.
/// Self-loops are never stored.
class BkGraph {
 public:
  BkGraph() = default;
  explicit BkGraph(std::size_t node_count) : adjacency_(node_count) {}

  /// Deduplicating constructor; a repeated pair keeps the last weight given.
  static BkGraph build(std::size_t node_count, std::span<const WeightedEdge> edges) {
    BkGraph g(node_count);
    for (const auto& e : edges) g.set_edge(e.u, e.v, e.weight);
    return g;
  }

  std::size_t node_count() const noexcept { return adjacency_.size(); }
  std::size_t edge_count() const noexcept { return edge_count_; }

  std::span<const Neighbor> neighbors(NodeId u) const {
    check_node(u);
    return adjacency_[u];
  }

  std::size_t degree(NodeId u) const { return neighbors(u).size(); }

  bool has_edge(NodeId u, NodeId v) const {
    check_node(u);
    check_node(v);
    const auto& list = adjacency_[u];
    auto it = lower(list, v);
    return it != list.end() && it->id == v;
  }

  /// Weight of edge (u, v), or 0 when the edge is absent.
  Weight weight(NodeId u, NodeId v) const {
    check_node(u);
    check_node(v);
    const auto& list = adjacency_[u];
    auto it = lower(list, v);
    return (it != list.end() && it->id == v) ? it->weight : 0;
  }

  /// All edges in canonical order: u < v, ascending by (u, v).
  std::vector<WeightedEdge> edges() const {
    std::vector<WeightedEdge> out;
    out.reserve(edge_count_);
    for (NodeId u = 0; u < adjacency_.size(); ++u)
      for (const auto& nb : adjacency_[u])
        if (u < nb.id) out.push_back({u, nb.id, nb.weight});
    return out;
  }

  /// Inserts the edge or overwrites its weight.
  void set_edge(NodeId u, NodeId v, Weight w) {
    check_node(u);
    check_node(v);
    if (u == v)
      throw Error(Errc::SelfLoopRejected, "self-loop on node " + std::to_string(u));
    if (w < 1)
      throw Error(Errc::InvalidWeight, "weight " + std::to_string(w) + " on edge (" +
                                           std::to_string(u) + "," + std::to_string(v) + ")");
    const bool inserted = upsert(adjacency_[u], v, w);
    upsert(adjacency_[v], u, w);
    if (inserted) ++edge_count_;
  }

  /// Returns false if the edge was not present.
  bool remove_edge(NodeId u, NodeId v) {
    check_node(u);
    check_node(v);
    if (!erase(adjacency_[u], v)) return false;
    erase(adjacency_[v], u);
    --edge_count_;
    return true;
  }

  /// Removes every edge incident to u.
  void isolate(NodeId u) {
    check_node(u);
    for (const auto& nb : adjacency_[u]) erase(adjacency_[nb.id], u);
    edge_count_ -= adjacency_[u].size();
    adjacency_[u].clear();
  }

  friend bool operator==(const BkGraph&, const BkGraph&) = default;

 private:
  using List = std::vector<Neighbor>;

  static List::const_iterator lower(const List& list, NodeId v) {
    return std::lower_bound(list.begin(), list.end(), v,
                            [](const Neighbor& n, NodeId id) { return n.id < id; });
  }

  static bool upsert(List& list, NodeId v, Weight w) {
    auto it = std::lower_bound(list.begin(), list.end(), v,
                               [](const Neighbor& n, NodeId id) { return n.id < id; });
    if (it != list.end() && it->id == v) {
      it->weight = w;
      return false;
    }
    list.insert(it, Neighbor{v, w});
    return true;
  }

  static bool erase(List& list, NodeId v) {
    auto it = std::lower_bound(list.begin(), list.end(), v,
                               [](const Neighbor& n, NodeId id) { return n.id < id; });
    if (it == list.end() || it->id != v) return false;
    list.erase(it);
    return true;
  }

  void check_node(NodeId u) const {
    if (u >= adjacency_.size())
      throw Error(Errc::InvalidNode, "node " + std::to_string(u) + " outside [0, " +
                                         std::to_string(adjacency_.size()) + ")");
  }

  std::vector<List> adjacency_;
  std::size_t edge_count_ = 0;
};

inline BkGraph build_graph(std::size_t node_count, std::span<const WeightedEdge> edges) {
  return BkGraph::build(node_count, edges);
}

/// Checks ids are distinct and inside the graph.
inline void validate_node_set(const BkGraph& g, std::span<const NodeId> nodes) {
  std::vector<bool> seen(g.node_count(), false);
  for (NodeId v : nodes) {
    if (v >= g.node_count())
      throw Error(Errc::InvalidNode, "node " + std::to_string(v) + " not in graph");
    if (seen[v]) throw Error(Errc::InvalidNode, "duplicate node " + std::to_string(v));
    seen[v] = true;
  }
}

// ---------------------------------------------------------------------------
// Structural diagnostics
// ---------------------------------------------------------------------------

/// Average shortest-path length inside the subgraph induced on `cluster`.
/// Only pairs connected within the induced subgraph enter the mean; with no
/// connected pair (singleton or edgeless cluster) the result is 0.
inline double cluster_aspl(const BkGraph& g, std::span<const NodeId> cluster) {
  if (cluster.empty()) throw Error(Errc::EmptyInput, "cluster_aspl on empty cluster");
  validate_node_set(g, cluster);

  constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> local(g.node_count(), kUnset);
  for (std::size_t i = 0; i < cluster.size(); ++i) local[cluster[i]] = i;

  std::uint64_t total = 0;
  std::uint64_t pairs = 0;
  std::vector<std::size_t> dist(cluster.size());
  std::deque<NodeId> queue;
  for (std::size_t s = 0; s < cluster.size(); ++s) {
    std::fill(dist.begin(), dist.end(), kUnset);
    dist[s] = 0;
    queue.assign(1, cluster[s]);
    while (!queue.empty()) {
      const NodeId u = queue.front();
      queue.pop_front();
      const std::size_t du = dist[local[u]];
      for (const auto& nb : g.neighbors(u)) {
        const std::size_t li = local[nb.id];
        if (li == kUnset || dist[li] != kUnset) continue;
        dist[li] = du + 1;
        queue.push_back(nb.id);
      }
    }
    for (std::size_t t = s + 1; t < cluster.size(); ++t) {
      if (dist[t] == kUnset) continue;
      total += dist[t];
      ++pairs;
    }
  }
  return pairs == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(pairs);
}

/// Number of distinct nodes within k hops of v (v itself counted when
/// include_self is set, matching message passing with self-loops).
inline std::size_t k_hop_receptive_field(const BkGraph& g, NodeId v, std::size_t k,
                                         bool include_self = true) {
  if (v >= g.node_count()) throw Error(Errc::InvalidNode, "node " + std::to_string(v));
  if (k < 1) throw Error(Errc::InvalidParam, "k must be >= 1");
  std::vector<std::size_t> depth(g.node_count(), static_cast<std::size_t>(-1));
  std::deque<NodeId> queue{v};
  depth[v] = 0;
  std::size_t reached = 0;
  while (!queue.empty()) {
    const NodeId u = queue.front();
    queue.pop_front();
    ++reached;
    if (depth[u] == k) continue;
    for (const auto& nb : g.neighbors(u)) {
      if (depth[nb.id] != static_cast<std::size_t>(-1)) continue;
      depth[nb.id] = depth[u] + 1;
      queue.push_back(nb.id);
    }
  }
  return include_self ? reached : reached - 1;
}

/// Mean k-hop receptive field over the nodes of a cluster.
inline double mean_receptive_field(const BkGraph& g, std::span<const NodeId> cluster,
                                   std::size_t k, bool include_self = true) {
  if (cluster.empty()) throw Error(Errc::EmptyInput, "mean_receptive_field on empty cluster");
  double sum = 0.0;
  for (NodeId v : cluster) sum += static_cast<double>(k_hop_receptive_field(g, v, k, include_self));
  return sum / static_cast<double>(cluster.size());
}

/// Connected components, each sorted ascending, ordered by smallest member.
inline std::vector<NodeSet> connected_components(const BkGraph& g) {
  std::vector<NodeSet> out;
  std::vector<bool> seen(g.node_count(), false);
  for (NodeId s = 0; s < g.node_count(); ++s) {
    if (seen[s]) continue;
    NodeSet comp;
    std::deque<NodeId> queue{s};
    seen[s] = true;
    while (!queue.empty()) {
      const NodeId u = queue.front();
      queue.pop_front();
      comp.push_back(u);
      for (const auto& nb : g.neighbors(u)) {
        if (seen[nb.id]) continue;
        seen[nb.id] = true;
        queue.push_back(nb.id);
      }
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  return out;
}

}  // namespace bkgnn

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bkgnn/error.hpp"
#include "bkgnn/graph.hpp"
#include "bkgnn/io.hpp"
#include "bkgnn/rng.hpp"

namespace bkgnn {

enum class PerturbKind { RemoveEdges, AddEdges, WeightNoise, IsolateNodes, DetachRewire };

/// Kind-specific switch. `None` is valid only for RemoveEdges and AddEdges.
enum class Variant {
  None,
  RemoveNegatives,   // WeightNoise: drop edges whose weight falls below 1
  ReplaceNegatives,  // WeightNoise: drop and re-insert at a random non-edge
  Random,            // IsolateNodes: uniform over all nodes
  PerCluster,        // IsolateNodes: equal share from every cluster
  Drain,             // DetachRewire: last cluster -> first cluster
  Exchange,          // DetachRewire: cluster c -> cluster (c+1) mod C
};

constexpr std::string_view kind_name(PerturbKind k) {
  switch (k) {
    case PerturbKind::RemoveEdges: return "remove";
    case PerturbKind::AddEdges: return "add";
    case PerturbKind::WeightNoise: return "noise";
    case PerturbKind::IsolateNodes: return "isolate";
    case PerturbKind::DetachRewire: return "detach";
  }
  return "?";
}

constexpr std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::None: return "";
    case Variant::RemoveNegatives: return "remove";
    case Variant::ReplaceNegatives: return "replace";
    case Variant::Random: return "random";
    case Variant::PerCluster: return "cluster";
    case Variant::Drain: return "drain";
    case Variant::Exchange: return "exchange";
  }
  return "?";
}

inline Variant default_variant(PerturbKind k) {
  switch (k) {
    case PerturbKind::WeightNoise: return Variant::RemoveNegatives;
    case PerturbKind::IsolateNodes: return Variant::Random;
    case PerturbKind::DetachRewire: return Variant::Drain;
    default: return Variant::None;
  }
}

inline bool variant_allowed(PerturbKind k, Variant v) {
  switch (k) {
    case PerturbKind::RemoveEdges:
    case PerturbKind::AddEdges: return v == Variant::None;
    case PerturbKind::WeightNoise: return v == Variant::RemoveNegatives || v == Variant::ReplaceNegatives;
    case PerturbKind::IsolateNodes: return v == Variant::Random || v == Variant::PerCluster;
    case PerturbKind::DetachRewire: return v == Variant::Drain || v == Variant::Exchange;
  }
  return false;
}

inline PerturbKind parse_kind(std::string_view s) {
  for (auto k : {PerturbKind::RemoveEdges, PerturbKind::AddEdges, PerturbKind::WeightNoise,
                 PerturbKind::IsolateNodes, PerturbKind::DetachRewire})
    if (kind_name(k) == s) return k;
  throw Error(Errc::ParseError, "unknown perturbation kind '" + std::string(s) + "'");
}

inline Variant parse_variant(PerturbKind kind, std::string_view s) {
  if (s.empty() || s == "-") return default_variant(kind);
  for (auto v : {Variant::RemoveNegatives, Variant::ReplaceNegatives, Variant::Random,
                 Variant::PerCluster, Variant::Drain, Variant::Exchange})
    if (variant_name(v) == s && variant_allowed(kind, v)) return v;
  throw Error(Errc::ParseError, "variant '" + std::string(s) + "' not valid for " +
                                    std::string(kind_name(kind)));
}

/// One operator with its severity, variant and seed.
struct Perturbation {
  PerturbKind kind = PerturbKind::RemoveEdges;
  double kappa = 0.0;
  Variant variant = Variant::None;
  std::uint64_t seed = 0;

  void validate() const {
    if (!std::isfinite(kappa) || kappa < 0.0)
      throw Error(Errc::InvalidSeverity, "kappa must be finite and >= 0");
    const bool unit = kind == PerturbKind::RemoveEdges || kind == PerturbKind::IsolateNodes ||
                      kind == PerturbKind::DetachRewire;
    if (unit && kappa > 1.0) throw Error(Errc::InvalidSeverity, "kappa must lie in [0, 1]");
    if (!variant_allowed(kind, variant))
      throw Error(Errc::InvalidParam, "variant not valid for " + std::string(kind_name(kind)));
  }

  /// Canonical descriptor: kind:kappa[:variant]:seed
  std::string to_string() const {
    std::string s = std::string(kind_name(kind)) + ":" + format_double(kappa);
    if (variant != Variant::None) s += ":" + std::string(variant_name(variant));
    return s + ":" + std::to_string(seed);
  }

  friend bool operator==(const Perturbation&, const Perturbation&) = default;
};

/// Parses `kind:kappa[:variant][:seed]`. The variant slot may be `-` or
/// empty; a lone numeric third field is read as the seed.
inline Perturbation parse_perturbation(std::string_view text, std::uint64_t default_seed = 0) {
  const auto parts = split(text, ':');
  if (parts.size() < 2 || parts.size() > 4)
    throw Error(Errc::ParseError, "descriptor must be kind:kappa[:variant][:seed], got '" +
                                      std::string(text) + "'");
  Perturbation p;
  p.kind = parse_kind(parts[0]);
  p.kappa = parse_double(parts[1], "kappa");
  p.variant = default_variant(p.kind);
  p.seed = default_seed;
  auto is_number = [](std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  if (parts.size() == 3) {
    if (is_number(parts[2])) p.seed = parse_int<std::uint64_t>(parts[2], "seed");
    else p.variant = parse_variant(p.kind, parts[2]);
  } else if (parts.size() == 4) {
    p.variant = parse_variant(p.kind, parts[2]);
    p.seed = parse_int<std::uint64_t>(parts[3], "seed");
  }
  p.validate();
  return p;
}

/// What an operator touched, for audit sidecars.
struct Provenance {
  std::string descriptor;
  std::vector<WeightedEdge> removed_edges;
  std::vector<WeightedEdge> added_edges;
  NodeSet selected_nodes;
  std::size_t dropped_replacements = 0;
};

struct PerturbResult {
  BkGraph graph;
  std::vector<NodeSet> clusters;
  Provenance provenance;
};

/// round-half-away-from-zero of kappa * total
inline std::size_t severity_count(double kappa, std::size_t total) {
  return static_cast<std::size_t>(std::round(kappa * static_cast<double>(total)));
}

namespace detail {

inline void require_unit_kappa(double kappa) {
  if (!std::isfinite(kappa) || kappa < 0.0 || kappa > 1.0)
    throw Error(Errc::InvalidSeverity, "kappa must lie in [0, 1]");
}

inline std::size_t non_edge_count(const BkGraph& g) {
  const std::size_t n = g.node_count();
  return n * (n - (n ? 1 : 0)) / 2 - g.edge_count();
}

/// Uniform non-edge of g. Enumerates when the graph is dense, otherwise
/// samples pairs until one is free. Returns nullopt when g is complete.
inline std::optional<std::pair<NodeId, NodeId>> random_non_edge(const BkGraph& g, Rng& rng) {
  const std::size_t n = g.node_count();
  const std::size_t free = non_edge_count(g);
  if (free == 0) return std::nullopt;
  const std::size_t pairs = n * (n - 1) / 2;
  if (free * 4 >= pairs) {
    while (true) {
      auto u = static_cast<NodeId>(rng.index(n));
      auto v = static_cast<NodeId>(rng.index(n));
      if (u == v || g.has_edge(u, v)) continue;
      return std::make_pair(std::min(u, v), std::max(u, v));
    }
  }
  std::size_t target = rng.index(free);
  for (NodeId u = 0; u < n; ++u) {
    auto nb = g.neighbors(u);
    std::size_t k = 0;
    for (NodeId v = u + 1; v < n; ++v) {
      while (k < nb.size() && nb[k].id < v) ++k;
      if (k < nb.size() && nb[k].id == v) continue;
      if (target-- == 0) return std::make_pair(u, v);
    }
  }
  return std::nullopt;
}

inline std::vector<Weight> weight_pool(const BkGraph& g) {
  std::vector<Weight> pool;
  pool.reserve(g.edge_count());
  for (const auto& e : g.edges()) pool.push_back(e.weight);
  return pool;
}

}  // namespace detail

/// Deletes round(kappa*|E|) edges chosen uniformly without replacement.
inline BkGraph remove_edges(const BkGraph& g, double kappa, Rng& rng, Provenance* prov = nullptr) {
  detail::require_unit_kappa(kappa);
  BkGraph out = g;
  const auto edges = g.edges();
  const std::size_t k = severity_count(kappa, edges.size());
  for (std::size_t idx : rng.sample_without_replacement(edges.size(), k)) {
    out.remove_edge(edges[idx].u, edges[idx].v);
    if (prov) prov->removed_edges.push_back(edges[idx]);
  }
  return out;
}

/// Inserts round(kappa*|E|) edges sampled uniformly from the non-edges. New
/// edges get weight 1 on uniformly weighted graphs, otherwise a draw from the
/// existing weights.
inline BkGraph add_edges(const BkGraph& g, double kappa, Rng& rng, Provenance* prov = nullptr) {
  if (!std::isfinite(kappa) || kappa < 0.0) throw Error(Errc::InvalidSeverity, "kappa must be >= 0");
  const std::size_t k = severity_count(kappa, g.edge_count());
  const std::size_t free = detail::non_edge_count(g);
  if (k > free)
    throw Error(Errc::GraphSaturated, "requested " + std::to_string(k) + " new edges, only " +
                                          std::to_string(free) + " non-edges available");
  const auto pool = detail::weight_pool(g);
  const bool uniform = std::all_of(pool.begin(), pool.end(), [](Weight w) { return w == 1; });
  BkGraph out = g;
  for (std::size_t i = 0; i < k; ++i) {
    auto [u, v] = *detail::random_non_edge(out, rng);
    const Weight w = uniform ? 1 : pool[rng.index(pool.size())];
    out.set_edge(u, v, w);
    if (prov) prov->added_edges.push_back({u, v, w});
  }
  return out;
}

/// Adds round(n), n ~ N(0, sigma^2), to every edge weight. Edges that fall
/// below weight 1 are dropped (RemoveNegatives) or dropped and replaced by a
/// uniform non-edge carrying a weight from the original weights
/// (ReplaceNegatives).
inline BkGraph weight_noise(const BkGraph& g, double sigma, Variant variant, Rng& rng,
                            Provenance* prov = nullptr) {
  if (!std::isfinite(sigma) || sigma < 0.0) throw Error(Errc::InvalidSeverity, "sigma must be >= 0");
  if (variant != Variant::RemoveNegatives && variant != Variant::ReplaceNegatives)
    throw Error(Errc::InvalidParam, "weight_noise variant must be remove or replace");
  BkGraph out = g;
  const auto pool = detail::weight_pool(g);
  std::size_t dropped = 0;
  for (const auto& e : g.edges()) {
    const Weight w = e.weight + static_cast<Weight>(std::round(sigma * rng.normal()));
    if (w >= 1) {
      out.set_edge(e.u, e.v, w);
      continue;
    }
    out.remove_edge(e.u, e.v);
    if (prov) prov->removed_edges.push_back(e);
    ++dropped;
  }
  if (variant == Variant::ReplaceNegatives) {
    for (std::size_t i = 0; i < dropped; ++i) {
      auto slot = detail::random_non_edge(out, rng);
      if (!slot) {
        if (prov) ++prov->dropped_replacements;
        continue;
      }
      const Weight w = pool[rng.index(pool.size())];
      out.set_edge(slot->first, slot->second, w);
      if (prov) prov->added_edges.push_back({slot->first, slot->second, w});
    }
  }
  return out;
}

/// Removes every edge of the selected nodes. Random selects round(kappa*n)
/// nodes uniformly; PerCluster splits the same total evenly over clusters,
/// the remainder going to the lowest cluster indices.
inline BkGraph isolate_nodes(const BkGraph& g, double kappa, Variant variant,
                             const std::vector<NodeSet>* clusters, Rng& rng,
                             Provenance* prov = nullptr) {
  detail::require_unit_kappa(kappa);
  const std::size_t k = severity_count(kappa, g.node_count());
  NodeSet selected;
  if (variant == Variant::Random) {
    for (std::size_t idx : rng.sample_without_replacement(g.node_count(), k))
      selected.push_back(static_cast<NodeId>(idx));
  } else if (variant == Variant::PerCluster) {
    if (!clusters || clusters->empty())
      throw Error(Errc::MissingClusters, "per-cluster isolation needs cluster assignments");
    const std::size_t c = clusters->size();
    for (std::size_t ci = 0; ci < c; ++ci) {
      const auto& members = (*clusters)[ci];
      validate_node_set(g, members);
      const std::size_t share = std::min(members.size(), k / c + (ci < k % c ? 1 : 0));
      for (std::size_t idx : rng.sample_without_replacement(members.size(), share))
        selected.push_back(members[idx]);
    }
  } else {
    throw Error(Errc::InvalidParam, "isolate_nodes variant must be random or cluster");
  }
  BkGraph out = g;
  for (NodeId v : selected) {
    if (prov)
      for (const auto& nb : out.neighbors(v))
        prov->removed_edges.push_back({std::min(v, nb.id), std::max(v, nb.id), nb.weight});
    out.isolate(v);
  }
  if (prov) prov->selected_nodes = selected;
  return out;
}

inline void validate_partition(const BkGraph& g, const std::vector<NodeSet>& clusters) {
  std::vector<int> owner(g.node_count(), 0);
  for (const auto& c : clusters)
    for (NodeId v : c) {
      if (v >= g.node_count())
        throw Error(Errc::InvalidClusters, "cluster member " + std::to_string(v) + " not in graph");
      if (owner[v]++) throw Error(Errc::InvalidClusters, "node " + std::to_string(v) + " in two clusters");
    }
  for (std::size_t v = 0; v < owner.size(); ++v)
    if (!owner[v]) throw Error(Errc::InvalidClusters, "node " + std::to_string(v) + " unassigned");
}

/// Detaches round(kappa*|source|) nodes from each source cluster and wires
/// each fully into its target cluster, which also contains the nodes moved
/// before it. Drain moves last -> first; Exchange moves c -> (c+1) mod C.
inline std::pair<BkGraph, std::vector<NodeSet>> detach_rewire(const BkGraph& g,
                                                              const std::vector<NodeSet>& clusters,
                                                              double kappa, Variant mode, Rng& rng,
                                                              Provenance* prov = nullptr) {
  detail::require_unit_kappa(kappa);
  validate_partition(g, clusters);
  if (mode != Variant::Drain && mode != Variant::Exchange)
    throw Error(Errc::InvalidParam, "detach_rewire mode must be drain or exchange");
  const std::size_t c = clusters.size();
  std::vector<std::pair<std::size_t, std::size_t>> routes;  // (source, target)
  if (c >= 2) {
    if (mode == Variant::Drain) routes.emplace_back(c - 1, 0);
    else
      for (std::size_t s = 0; s < c; ++s) routes.emplace_back(s, (s + 1) % c);
  }

  // Selection uses the original membership, so no node moves twice.
  std::vector<std::pair<NodeId, std::size_t>> moves;  // (node, target)
  for (auto [s, t] : routes) {
    const auto& members = clusters[s];
    const std::size_t k = severity_count(kappa, members.size());
    for (std::size_t idx : rng.sample_without_replacement(members.size(), k))
      moves.emplace_back(members[idx], t);
  }

  BkGraph out = g;
  std::vector<NodeSet> assigned = clusters;
  for (auto [v, t] : moves) {
    for (const auto& nb : out.neighbors(v))
      if (prov) prov->removed_edges.push_back({std::min(v, nb.id), std::max(v, nb.id), nb.weight});
    out.isolate(v);
    for (auto& members : assigned) std::erase(members, v);
    if (prov) prov->selected_nodes.push_back(v);
  }
  for (auto [v, t] : moves) {
    for (NodeId w : assigned[t]) {
      out.set_edge(v, w, 1);
      if (prov) prov->added_edges.push_back({std::min(v, w), std::max(v, w), 1});
    }
    assigned[t].push_back(v);
  }
  for (auto& members : assigned) std::sort(members.begin(), members.end());
  return {std::move(out), std::move(assigned)};
}

/// Applies one descriptor. The input graph is never modified; clusters are
/// passed through unchanged except by detach_rewire.
inline PerturbResult apply_perturbation(const BkGraph& g, const Perturbation& p,
                                        const std::vector<NodeSet>* clusters = nullptr) {
  p.validate();
  Rng rng(p.seed);
  PerturbResult r;
  r.provenance.descriptor = p.to_string();
  if (clusters) r.clusters = *clusters;
  switch (p.kind) {
    case PerturbKind::RemoveEdges: r.graph = remove_edges(g, p.kappa, rng, &r.provenance); break;
    case PerturbKind::AddEdges: r.graph = add_edges(g, p.kappa, rng, &r.provenance); break;
    case PerturbKind::WeightNoise:
      r.graph = weight_noise(g, p.kappa, p.variant, rng, &r.provenance);
      break;
    case PerturbKind::IsolateNodes:
      r.graph = isolate_nodes(g, p.kappa, p.variant, clusters, rng, &r.provenance);
      break;
    case PerturbKind::DetachRewire: {
      if (!clusters) throw Error(Errc::MissingClusters, "detach_rewire needs cluster assignments");
      auto [graph, updated] = detach_rewire(g, *clusters, p.kappa, p.variant, rng, &r.provenance);
      r.graph = std::move(graph);
      r.clusters = std::move(updated);
      break;
    }
  }
  return r;
}

}  // namespace bkgnn

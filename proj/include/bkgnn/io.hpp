#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "bkgnn/error.hpp"
#include "bkgnn/graph.hpp"

namespace bkgnn {

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

inline double parse_double(std::string_view text, std::string_view what) {
  double x = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, x);
  if (ec != std::errc{} || ptr != last)
    throw Error(Errc::ParseError, std::string(what) + ": not a number: '" + std::string(text) + "'");
  return x;
}

template <class Int>
Int parse_int(std::string_view text, std::string_view what) {
  Int x{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw Error(Errc::ParseError, std::string(what) + ": not an integer: '" + std::string(text) + "'");
  return x;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, std::string_view text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw Error(Errc::IoError, "write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Edge-list TSV
//
//   # nodes <n>          optional header; fixes the node count
//   u<TAB>v[<TAB>weight] one undirected edge per line, weight defaults to 1
//
// Other lines starting with '#' and blank lines are ignored. Without the
// header the node count is max id + 1.
// ---------------------------------------------------------------------------

inline BkGraph read_edge_list(std::istream& in) {
  std::vector<WeightedEdge> edges;
  std::size_t declared = 0;
  bool has_declared = false;
  std::size_t max_id_plus_one = 0;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim_cr(raw);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    if (line.front() == '#') {
      constexpr std::string_view kHeader = "# nodes ";
      if (line.starts_with(kHeader)) {
        declared = parse_int<std::size_t>(line.substr(kHeader.size()), where);
        has_declared = true;
      }
      continue;
    }
    const auto cols = split(line, '\t');
    if (cols.size() < 2 || cols.size() > 3)
      throw Error(Errc::ParseError, where + ": expected u<TAB>v[<TAB>weight]");
    WeightedEdge e;
    e.u = parse_int<NodeId>(cols[0], where);
    e.v = parse_int<NodeId>(cols[1], where);
    e.weight = cols.size() == 3 ? parse_int<Weight>(cols[2], where) : 1;
    if (e.u == e.v) throw Error(Errc::SelfLoopRejected, where + ": self-loop");
    if (e.weight < 1) throw Error(Errc::InvalidWeight, where + ": weight < 1");
    max_id_plus_one = std::max<std::size_t>(max_id_plus_one, std::max(e.u, e.v) + std::size_t{1});
    edges.push_back(e);
  }
  if (has_declared && max_id_plus_one > declared)
    throw Error(Errc::InvalidNode, "edge endpoint exceeds declared node count");
  return BkGraph::build(has_declared ? declared : max_id_plus_one, edges);
}

inline void write_edge_list(std::ostream& out, const BkGraph& g) {
  out << "# nodes " << g.node_count() << '\n';
  for (const auto& e : g.edges()) out << e.u << '\t' << e.v << '\t' << e.weight << '\n';
}

inline BkGraph read_edge_list(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_edge_list(in);
}

inline void write_edge_list(const std::filesystem::path& path, const BkGraph& g) {
  auto out = open_out(path);
  write_edge_list(out, g);
  if (!out) throw Error(Errc::IoError, "write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Cluster assignment TSV: `node<TAB>cluster` per line, '#' comments.
// Clusters are numbered densely from 0; members come back sorted.
// ---------------------------------------------------------------------------

inline std::vector<NodeSet> read_clusters(std::istream& in) {
  std::vector<NodeSet> clusters;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim_cr(raw);
    if (line.empty() || line.front() == '#') continue;
    const std::string where = "line " + std::to_string(line_no);
    const auto cols = split(line, '\t');
    if (cols.size() != 2) throw Error(Errc::ParseError, where + ": expected node<TAB>cluster");
    const auto node = parse_int<NodeId>(cols[0], where);
    const auto c = parse_int<std::size_t>(cols[1], where);
    if (c >= clusters.size()) clusters.resize(c + 1);
    clusters[c].push_back(node);
  }
  for (auto& c : clusters) std::sort(c.begin(), c.end());
  return clusters;
}

inline void write_clusters(std::ostream& out, const std::vector<NodeSet>& clusters) {
  std::vector<std::pair<NodeId, std::size_t>> rows;
  for (std::size_t c = 0; c < clusters.size(); ++c)
    for (NodeId v : clusters[c]) rows.emplace_back(v, c);
  std::sort(rows.begin(), rows.end());
  for (const auto& [v, c] : rows) out << v << '\t' << c << '\n';
}

inline std::vector<NodeSet> read_clusters(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_clusters(in);
}

inline void write_clusters(const std::filesystem::path& path, const std::vector<NodeSet>& clusters) {
  auto out = open_out(path);
  write_clusters(out, clusters);
  if (!out) throw Error(Errc::IoError, "write failed: " + path.string());
}

}  // namespace bkgnn

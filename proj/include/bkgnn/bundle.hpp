#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "bkgnn/io.hpp"
#include "bkgnn/perturb.hpp"
#include "bkgnn/synth.hpp"

namespace bkgnn {

inline nlohmann::ordered_json params_to_json(const SynthParams& p) {
  nlohmann::ordered_json j;
  j["C"] = p.clusters;
  j["M"] = p.nodes_per_cluster;
  j["N"] = p.samples_per_class;
  j["delta_xi"] = p.delta_xi;
  j["omega"] = p.omega;
  j["alpha"] = p.alpha;
  j["seed"] = p.seed;
  return j;
}

inline SynthParams params_from_json(const nlohmann::json& j) {
  SynthParams p;
  try {
    p.clusters = j.value("C", p.clusters);
    p.nodes_per_cluster = j.value("M", p.nodes_per_cluster);
    p.samples_per_class = j.value("N", p.samples_per_class);
    p.delta_xi = j.value("delta_xi", p.delta_xi);
    p.omega = j.value("omega", p.omega);
    p.alpha = j.value("alpha", p.alpha);
    p.seed = j.value("seed", p.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("synthetic parameters: ") + e.what());
  }
  p.validate();
  return p;
}

inline nlohmann::ordered_json provenance_to_json(const Provenance& p) {
  auto edges = [](const std::vector<WeightedEdge>& list) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& e : list) arr.push_back({e.u, e.v, e.weight});
    return arr;
  };
  nlohmann::ordered_json j;
  j["descriptor"] = p.descriptor;
  j["removed_edges"] = edges(p.removed_edges);
  j["added_edges"] = edges(p.added_edges);
  j["selected_nodes"] = p.selected_nodes;
  j["dropped_replacements"] = p.dropped_replacements;
  return j;
}

inline void write_features_csv(std::ostream& out, const nn::DenseMatrix& x) {
  for (std::size_t c = 0; c < x.cols(); ++c) out << (c ? "," : "") << c;
  out << '\n';
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) out << (c ? "," : "") << format_double(x(r, c));
    out << '\n';
  }
}

inline nn::DenseMatrix read_features_csv(std::istream& in) {
  std::string raw;
  if (!std::getline(in, raw)) throw Error(Errc::ParseError, "features.csv: missing header");
  const auto header = split(trim_cr(raw), ',');
  const std::size_t cols = header.size();
  for (std::size_t c = 0; c < cols; ++c)
    if (parse_int<std::size_t>(header[c], "features.csv header") != c)
      throw Error(Errc::ParseError, "features.csv: header must list node ids 0..n-1");
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim_cr(raw);
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    const std::string where = "features.csv line " + std::to_string(line_no);
    if (cells.size() != cols) throw Error(Errc::ParseError, where + ": wrong column count");
    for (auto cell : cells) values.push_back(parse_double(cell, where));
    ++rows;
  }
  nn::DenseMatrix x(rows, cols);
  std::copy(values.begin(), values.end(), x.values().begin());
  return x;
}

inline void write_labels_csv(std::ostream& out, const std::vector<int>& labels) {
  out << "label\n";
  for (int y : labels) out << y << '\n';
}

inline std::vector<int> read_labels_csv(std::istream& in) {
  std::string raw;
  if (!std::getline(in, raw) || trim_cr(raw) != "label")
    throw Error(Errc::ParseError, "labels.csv: header must be 'label'");
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim_cr(raw);
    if (line.empty()) continue;
    labels.push_back(parse_int<int>(line, "labels.csv line " + std::to_string(line_no)));
  }
  return labels;
}

/// Dataset bundle directory:
///   graph.tsv     edge list
///   clusters.tsv  node -> cluster
///   features.csv  header of node ids, one row per sample
///   labels.csv    header `label`, one row per sample
///   meta.json     generator parameters
inline void write_bundle(const std::filesystem::path& dir, const SynthDataset& ds) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + dir.string() + ": " + ec.message());
  write_edge_list(dir / "graph.tsv", ds.graph);
  write_clusters(dir / "clusters.tsv", ds.clusters);
  {
    auto out = open_out(dir / "features.csv");
    write_features_csv(out, ds.features);
    if (!out) throw Error(Errc::IoError, "write failed: features.csv");
  }
  {
    auto out = open_out(dir / "labels.csv");
    write_labels_csv(out, ds.labels);
    if (!out) throw Error(Errc::IoError, "write failed: labels.csv");
  }
  auto out = open_out(dir / "meta.json");
  out << params_to_json(ds.params).dump(2) << '\n';
  if (!out) throw Error(Errc::IoError, "write failed: meta.json");
}

inline SynthDataset read_bundle(const std::filesystem::path& dir) {
  SynthDataset ds;
  try {
    ds.params = params_from_json(nlohmann::json::parse(read_file(dir / "meta.json")));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("meta.json: ") + e.what());
  }
  ds.graph = read_edge_list(dir / "graph.tsv");
  if (std::filesystem::exists(dir / "clusters.tsv")) ds.clusters = read_clusters(dir / "clusters.tsv");
  else ds.clusters = build_cluster_graph(ds.params.clusters, ds.params.nodes_per_cluster).clusters;
  {
    auto in = open_in(dir / "features.csv");
    ds.features = read_features_csv(in);
  }
  {
    auto in = open_in(dir / "labels.csv");
    ds.labels = read_labels_csv(in);
  }
  if (ds.features.rows() != ds.labels.size())
    throw Error(Errc::ParseError, "features.csv and labels.csv row counts differ");
  if (ds.features.cols() != ds.graph.node_count())
    throw Error(Errc::ParseError, "feature columns do not match graph node count");
  for (int y : ds.labels)
    if (y < 0 || y >= ds.params.clusters) throw Error(Errc::ParseError, "label out of range");
  return ds;
}

}  // namespace bkgnn

#pragma once

#include <filesystem>
#include <set>
#include <string>

#include <json.hpp>

#include "bkgnn/bundle.hpp"
#include "bkgnn/experiment.hpp"
#include "bkgnn/models.hpp"

namespace bkgnn {

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, std::string_view where,
                                std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw Error(Errc::ParseError, std::string(where) + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw Error(Errc::ParseError, std::string(where) + ": unknown key '" + key + "'");
}

template <class T>
void read_key(const nlohmann::json& j, const char* key, T& out, std::string_view where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(Errc::ParseError, std::string(where) + ": bad value for '" + key + "'");
  }
}

}  // namespace detail

inline ModelSpec model_spec_from_json(const nlohmann::json& j) {
  detail::reject_unknown_keys(j, "model",
                              {"kind", "name", "gnn", "gnn_layers", "hidden_dim", "mlp_hidden_layers",
                               "mlp_hidden_dim", "l1_lambda", "svm_c", "epochs", "lr", "batch_size", "seed"});
  ModelSpec s;
  if (!j.contains("kind")) throw Error(Errc::ParseError, "model: missing 'kind'");
  std::string kind, gnn = "GATv2";
  detail::read_key(j, "kind", kind, "model");
  s.kind = parse_model_kind(kind);
  detail::read_key(j, "gnn", gnn, "model");
  if (gnn == "GCN") s.gnn = GnnType::Gcn;
  else if (gnn == "GATv2") s.gnn = GnnType::Gatv2;
  else throw Error(Errc::ParseError, "model: gnn must be GCN or GATv2");
  detail::read_key(j, "name", s.name, "model");
  detail::read_key(j, "gnn_layers", s.gnn_layers, "model");
  detail::read_key(j, "hidden_dim", s.hidden_dim, "model");
  detail::read_key(j, "mlp_hidden_layers", s.mlp_hidden_layers, "model");
  detail::read_key(j, "mlp_hidden_dim", s.mlp_hidden_dim, "model");
  detail::read_key(j, "l1_lambda", s.l1_lambda, "model");
  detail::read_key(j, "svm_c", s.svm_c, "model");
  detail::read_key(j, "epochs", s.epochs, "model");
  detail::read_key(j, "lr", s.lr, "model");
  detail::read_key(j, "batch_size", s.batch_size, "model");
  detail::read_key(j, "seed", s.seed, "model");
  s.validate();
  return s;
}

inline nlohmann::ordered_json model_spec_to_json(const ModelSpec& s) {
  nlohmann::ordered_json j;
  j["kind"] = model_kind_name(s.kind);
  if (!s.name.empty()) j["name"] = s.name;
  j["gnn"] = s.gnn == GnnType::Gcn ? "GCN" : "GATv2";
  j["gnn_layers"] = s.gnn_layers;
  j["hidden_dim"] = s.hidden_dim;
  j["mlp_hidden_layers"] = s.mlp_hidden_layers;
  j["mlp_hidden_dim"] = s.mlp_hidden_dim;
  j["l1_lambda"] = s.l1_lambda;
  j["svm_c"] = s.svm_c;
  j["epochs"] = s.epochs;
  j["lr"] = s.lr;
  j["batch_size"] = s.batch_size;
  j["seed"] = s.seed;
  return j;
}

inline SplitPlan split_plan_from_json(const nlohmann::json& j) {
  detail::reject_unknown_keys(j, "split", {"test_fraction", "stratified", "seed"});
  SplitPlan p;
  detail::read_key(j, "test_fraction", p.test_fraction, "split");
  detail::read_key(j, "stratified", p.stratified, "split");
  detail::read_key(j, "seed", p.seed, "split");
  if (!(p.test_fraction > 0.0 && p.test_fraction < 1.0))
    throw Error(Errc::InvalidParam, "split: test_fraction must lie in (0, 1)");
  return p;
}

/// Single training job: {"model": {...}, "split": {...}}.
struct TrainConfig {
  ModelSpec model;
  SplitPlan split;
};

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  detail::reject_unknown_keys(j, "train config", {"model", "split"});
  if (!j.contains("model")) throw Error(Errc::ParseError, "train config: missing 'model'");
  TrainConfig c;
  c.model = model_spec_from_json(j.at("model"));
  if (j.contains("split")) c.split = split_plan_from_json(j.at("split"));
  return c;
}

/// Relative bundle paths resolve against `base_dir` (the config file's folder).
inline SweepConfig sweep_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  detail::reject_unknown_keys(j, "sweep config",
                              {"dataset", "models", "perturbation", "runs", "seed", "split", "output_dir"});
  SweepConfig c;
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    detail::reject_unknown_keys(d, "dataset", {"synthetic", "bundle", "freeze"});
    if (d.contains("synthetic") && d.contains("bundle"))
      throw Error(Errc::ParseError, "dataset: give either 'synthetic' or 'bundle'");
    if (d.contains("synthetic")) {
      detail::reject_unknown_keys(d.at("synthetic"), "dataset.synthetic",
                                  {"C", "M", "N", "delta_xi", "omega", "alpha", "seed"});
      c.synthetic = params_from_json(d.at("synthetic"));
    }
    if (d.contains("bundle")) {
      std::string path;
      detail::read_key(d, "bundle", path, "dataset");
      c.bundle = std::filesystem::path(path).is_absolute() ? std::filesystem::path(path) : base_dir / path;
      c.synthetic.reset();
    }
    detail::read_key(d, "freeze", c.freeze_dataset, "dataset");
  }
  if (!j.contains("models") || !j.at("models").is_array())
    throw Error(Errc::ParseError, "sweep config: 'models' must be an array");
  for (const auto& m : j.at("models")) c.models.push_back(model_spec_from_json(m));
  if (j.contains("perturbation")) {
    const auto& p = j.at("perturbation");
    detail::reject_unknown_keys(p, "perturbation", {"kind", "variant", "kappas"});
    std::string kind = "remove", variant;
    detail::read_key(p, "kind", kind, "perturbation");
    c.perturbation = parse_kind(kind);
    c.variant = default_variant(c.perturbation);
    detail::read_key(p, "variant", variant, "perturbation");
    if (!variant.empty()) c.variant = parse_variant(c.perturbation, variant);
    detail::read_key(p, "kappas", c.kappas, "perturbation");
  }
  detail::read_key(j, "runs", c.runs, "sweep config");
  detail::read_key(j, "seed", c.master_seed, "sweep config");
  if (j.contains("split")) c.split = split_plan_from_json(j.at("split"));
  std::string out;
  detail::read_key(j, "output_dir", out, "sweep config");
  if (!out.empty()) c.output_dir = out;
  c.validate();
  return c;
}

inline nlohmann::json parse_json_file(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::ParseError, path.string() + ": " + e.what());
  }
}

}  // namespace bkgnn

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bkgnn/error.hpp"
#include "bkgnn/graph.hpp"
#include "bkgnn/nn/adam.hpp"
#include "bkgnn/nn/checkpoint.hpp"
#include "bkgnn/nn/layers.hpp"
#include "bkgnn/nn/loss.hpp"
#include "bkgnn/rng.hpp"
#include "bkgnn/synth.hpp"

namespace bkgnn {

enum class ModelKind {
  Gcn,
  Gatv2,
  ParallelGnnMlp,
  Mlp,
  LogRegL1,
  LinearSvm,
  ClusterAvgLogReg,
  ClusterAvgSvm,
};

enum class GnnType { Gcn, Gatv2 };

constexpr std::string_view model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::Gcn: return "GCN";
    case ModelKind::Gatv2: return "GATv2";
    case ModelKind::ParallelGnnMlp: return "ParallelGnnMlp";
    case ModelKind::Mlp: return "MLP";
    case ModelKind::LogRegL1: return "LogRegL1";
    case ModelKind::LinearSvm: return "LinearSVM";
    case ModelKind::ClusterAvgLogReg: return "ClusterAvgLogReg";
    case ModelKind::ClusterAvgSvm: return "ClusterAvgSVM";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
  for (auto k : {ModelKind::Gcn, ModelKind::Gatv2, ModelKind::ParallelGnnMlp, ModelKind::Mlp,
                 ModelKind::LogRegL1, ModelKind::LinearSvm, ModelKind::ClusterAvgLogReg,
                 ModelKind::ClusterAvgSvm})
    if (model_kind_name(k) == s) return k;
  throw Error(Errc::ParseError, "unknown model kind '" + std::string(s) + "'");
}

/// Models that see the BK graph (GNNs) or its cluster structure.
constexpr bool is_informed(ModelKind k) {
  return k != ModelKind::Mlp && k != ModelKind::LogRegL1 && k != ModelKind::LinearSvm;
}
constexpr bool needs_graph(ModelKind k) {
  return k == ModelKind::Gcn || k == ModelKind::Gatv2 || k == ModelKind::ParallelGnnMlp;
}
constexpr bool needs_clusters(ModelKind k) {
  return k == ModelKind::ClusterAvgLogReg || k == ModelKind::ClusterAvgSvm;
}
constexpr bool is_neural(ModelKind k) {
  return k == ModelKind::Gcn || k == ModelKind::Gatv2 || k == ModelKind::ParallelGnnMlp ||
         k == ModelKind::Mlp;
}

struct ModelSpec {
  std::string name;  // label used in result tables; empty means the kind name
  ModelKind kind = ModelKind::Mlp;
  GnnType gnn = GnnType::Gatv2;  // layer family of the ParallelGnnMlp branch
  int gnn_layers = 3;
  int hidden_dim = 16;
  int mlp_hidden_layers = 2;
  int mlp_hidden_dim = 64;
  double l1_lambda = 1e-2;
  double svm_c = 1.0;
  int epochs = 200;
  double lr = 1e-3;
  int batch_size = 64;
  std::uint64_t seed = 0;

  std::string label() const { return name.empty() ? std::string(model_kind_name(kind)) : name; }

  void validate() const {
    if (gnn_layers < 1) throw Error(Errc::InvalidParam, "gnn_layers must be >= 1");
    if (hidden_dim < 1 || mlp_hidden_dim < 1) throw Error(Errc::InvalidParam, "hidden dims must be >= 1");
    if (mlp_hidden_layers != 2 && mlp_hidden_layers != 3)
      throw Error(Errc::InvalidParam, "mlp_hidden_layers must be 2 or 3");
    if (epochs < 1 || batch_size < 1) throw Error(Errc::InvalidParam, "epochs and batch_size must be >= 1");
    if (!(lr > 0.0) || l1_lambda < 0.0 || !(svm_c > 0.0))
      throw Error(Errc::InvalidParam, "lr and svm_c must be > 0, l1_lambda >= 0");
  }
};

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct SplitPlan {
  double test_fraction = 0.2;
  bool stratified = true;
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Per class, round(test_fraction * count) samples (at least one, at most
/// count - 1) go to the test side. Index lists come back sorted.
inline Split make_split(std::span<const int> labels, int classes, const SplitPlan& plan) {
  if (!(plan.test_fraction > 0.0 && plan.test_fraction < 1.0))
    throw Error(Errc::InvalidParam, "test_fraction must lie in (0, 1)");
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) throw Error(Errc::InvalidLabel, "label out of range");
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  for (const auto& members : by_class)
    if (members.size() < 2) throw Error(Errc::SplitInfeasible, "every class needs at least 2 samples");

  Rng rng(plan.seed);
  Split split;
  auto take = [&](std::vector<std::size_t> pool) {
    rng.shuffle(pool);
    const auto want = static_cast<std::size_t>(std::round(plan.test_fraction * static_cast<double>(pool.size())));
    const std::size_t n_test = std::clamp<std::size_t>(want, 1, pool.size() - 1);
    split.test.insert(split.test.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train.insert(split.train.end(), pool.begin() + static_cast<std::ptrdiff_t>(n_test), pool.end());
  };
  if (plan.stratified) {
    for (const auto& members : by_class) take(members);
  } else {
    std::vector<std::size_t> all(labels.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    take(all);
    std::vector<int> seen_test(static_cast<std::size_t>(classes)), seen_train(static_cast<std::size_t>(classes));
    for (auto i : split.test) seen_test[static_cast<std::size_t>(labels[i])] = 1;
    for (auto i : split.train) seen_train[static_cast<std::size_t>(labels[i])] = 1;
    for (int c = 0; c < classes; ++c)
      if (!seen_test[static_cast<std::size_t>(c)] || !seen_train[static_cast<std::size_t>(c)])
        throw Error(Errc::SplitInfeasible, "unstratified split left a class out of one side");
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

/// Column c = mean of the feature columns belonging to cluster c.
inline nn::DenseMatrix cluster_average_features(const nn::DenseMatrix& features,
                                                const std::vector<NodeSet>& clusters) {
  if (clusters.empty()) throw Error(Errc::MissingClusters, "cluster averaging needs clusters");
  nn::DenseMatrix out(features.rows(), clusters.size());
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    const auto& members = clusters[c];
    if (members.empty()) continue;
    for (NodeId v : members)
      if (v >= features.cols()) throw Error(Errc::InvalidNode, "cluster member outside feature columns");
    for (std::size_t r = 0; r < features.rows(); ++r) {
      double s = 0.0;
      for (NodeId v : members) s += features(r, v);
      out(r, c) = s / static_cast<double>(members.size());
    }
  }
  return out;
}

inline nn::DenseMatrix gather_rows(const nn::DenseMatrix& m, std::span<const std::size_t> idx) {
  nn::DenseMatrix out(idx.size(), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto src = m.row(idx[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

class Model {
 public:
  virtual ~Model() = default;
  /// Class scores for a batch of raw feature rows (batch x feature_dim).
  virtual nn::DenseMatrix logits(const nn::DenseMatrix& rows) = 0;
  virtual std::vector<nn::Param*> params() = 0;

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto* p : params()) n += p->value.size();
    return n;
  }

  std::vector<nn::NamedTensor> state() {
    std::vector<nn::NamedTensor> out;
    for (auto* p : params()) out.push_back({p->name, p->value});
    return out;
  }

  void load_state(const std::vector<nn::NamedTensor>& tensors) {
    auto ps = params();
    if (tensors.size() != ps.size()) throw Error(Errc::ShapeError, "checkpoint tensor count mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (tensors[i].name != ps[i]->name) throw Error(Errc::ShapeError, "checkpoint name mismatch: " + tensors[i].name);
      nn::require_shape(tensors[i].value, ps[i]->value.rows(), ps[i]->value.cols(), tensors[i].name.c_str());
      ps[i]->value = tensors[i].value;
    }
  }
};

/// Optional GNN branch (message passing + concatenation readout) in parallel
/// with an optional MLP branch on the raw row; both feed an affine classifier.
class NeuralNet final : public Model {
 public:
  struct Config {
    std::optional<GnnType> gnn;  // no GNN branch when empty
    int gnn_layers = 3;
    int hidden_dim = 16;
    bool mlp_branch = false;
    int mlp_hidden_layers = 2;
    int mlp_hidden_dim = 64;
  };

  NeuralNet(const Config& cfg, const BkGraph* graph, std::size_t feature_dim, std::size_t classes)
      : cfg_(cfg), feature_dim_(feature_dim) {
    std::size_t joint = 0;
    if (cfg.gnn) {
      if (!graph) throw Error(Errc::MissingGraph, "GNN branch needs a BK graph");
      if (graph->node_count() != feature_dim)
        throw Error(Errc::ShapeError, "graph has " + std::to_string(graph->node_count()) +
                                          " nodes but rows have " + std::to_string(feature_dim) + " features");
      ctx_ = nn::GraphContext::from(*graph);
      std::size_t in = 1;
      for (int l = 0; l < cfg.gnn_layers; ++l) {
        const std::string name = "gnn" + std::to_string(l);
        const auto out = static_cast<std::size_t>(cfg.hidden_dim);
        if (*cfg.gnn == GnnType::Gcn)
          gnn_.push_back(std::make_unique<nn::GcnLayer>(name, in, out, nn::Activation::Relu));
        else
          gnn_.push_back(std::make_unique<nn::Gatv2Layer>(name, in, out, nn::Activation::Relu));
        in = out;
      }
      gnn_width_ = feature_dim * in;
      joint += gnn_width_;
    }
    if (cfg.mlp_branch) {
      std::size_t in = feature_dim;
      for (int l = 0; l < cfg.mlp_hidden_layers; ++l) {
        mlp_.emplace_back("mlp" + std::to_string(l), in, static_cast<std::size_t>(cfg.mlp_hidden_dim),
                          nn::Activation::Relu);
        in = static_cast<std::size_t>(cfg.mlp_hidden_dim);
      }
      mlp_width_ = in;
      joint += mlp_width_;
    }
    if (joint == 0) throw Error(Errc::InvalidParam, "network has neither a GNN nor an MLP branch");
    classifier_.emplace_back("classifier", joint, classes, nn::Activation::Identity);
  }

  void init(Rng& rng) {
    for (auto& l : gnn_) l->init(rng);
    for (auto& l : mlp_) l.init(rng);
    for (auto& l : classifier_) l.init(rng);
  }

  std::size_t readout_dim() const { return gnn_width_; }

  /// Distance of the last forward pass from the nearest activation kink.
  double kink_margin() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& l : gnn_) m = std::min(m, l->kink_margin());
    for (const auto& l : mlp_) m = std::min(m, l.kink_margin());
    for (const auto& l : classifier_) m = std::min(m, l.kink_margin());
    return m;
  }

  nn::DenseMatrix forward(const nn::DenseMatrix& rows) {
    if (rows.cols() != feature_dim_)
      throw Error(Errc::ShapeError, "rows have " + std::to_string(rows.cols()) + " features, want " +
                                        std::to_string(feature_dim_));
    batch_ = rows.rows();
    nn::DenseMatrix joint(batch_, gnn_width_ + mlp_width_);
    if (!gnn_.empty()) {
      nn::DenseMatrix h = nn::rows_to_nodes(rows);
      for (auto& layer : gnn_) h = layer->forward(ctx_, h, batch_);
      const auto readout = nn::concat_readout(h, feature_dim_, batch_);
      for (std::size_t b = 0; b < batch_; ++b)
        std::copy(readout.row(b).begin(), readout.row(b).end(), joint.row(b).begin());
    }
    if (!mlp_.empty() || cfg_.mlp_branch) {
      nn::DenseMatrix m = rows;
      for (auto& layer : mlp_) m = layer.forward(m);
      for (std::size_t b = 0; b < batch_; ++b)
        std::copy(m.row(b).begin(), m.row(b).end(), joint.row(b).begin() + gnn_width_);
    }
    nn::DenseMatrix z = joint;
    for (auto& layer : classifier_) z = layer.forward(z);
    return z;
  }

  void backward(const nn::DenseMatrix& grad_logits) {
    nn::DenseMatrix g = grad_logits;
    for (auto it = classifier_.rbegin(); it != classifier_.rend(); ++it) g = it->backward(std::move(g));
    if (!gnn_.empty()) {
      nn::DenseMatrix gr(batch_, gnn_width_);
      for (std::size_t b = 0; b < batch_; ++b) {
        auto src = g.row(b).subspan(0, gnn_width_);
        std::copy(src.begin(), src.end(), gr.row(b).begin());
      }
      nn::DenseMatrix gh = nn::concat_readout_backward(gr, feature_dim_, batch_, gnn_.back()->out_dim());
      for (auto it = gnn_.rbegin(); it != gnn_.rend(); ++it) gh = (*it)->backward(std::move(gh));
    }
    if (!mlp_.empty()) {
      nn::DenseMatrix gm(batch_, mlp_width_);
      for (std::size_t b = 0; b < batch_; ++b) {
        auto src = g.row(b).subspan(gnn_width_, mlp_width_);
        std::copy(src.begin(), src.end(), gm.row(b).begin());
      }
      for (auto it = mlp_.rbegin(); it != mlp_.rend(); ++it) gm = it->backward(std::move(gm));
    }
  }

  nn::DenseMatrix logits(const nn::DenseMatrix& rows) override { return forward(rows); }

  std::vector<nn::Param*> params() override {
    std::vector<nn::Param*> out;
    for (auto& l : gnn_)
      for (auto* p : l->params()) out.push_back(p);
    for (auto& l : mlp_)
      for (auto* p : l.params()) out.push_back(p);
    for (auto& l : classifier_)
      for (auto* p : l.params()) out.push_back(p);
    return out;
  }

  void zero_grad() {
    for (auto* p : params()) p->zero_grad();
  }

 private:
  Config cfg_;
  std::size_t feature_dim_;
  nn::GraphContext ctx_;
  std::vector<std::unique_ptr<nn::GraphLayer>> gnn_;
  std::vector<nn::DenseLayer> mlp_;
  std::vector<nn::DenseLayer> classifier_;
  std::size_t gnn_width_ = 0;
  std::size_t mlp_width_ = 0;
  std::size_t batch_ = 0;
};

/// Linear scores, optionally on cluster-averaged features. Binary problems
/// use one weight vector (score for class 1, class 0 fixed at 0); more classes
/// use one vector per class (one-vs-rest).
class LinearModel final : public Model {
 public:
  LinearModel(std::size_t input_dim, std::size_t classes, std::optional<std::vector<NodeSet>> clusters)
      : classes_(classes),
        clusters_(std::move(clusters)),
        weight_("linear.weight", classes == 2 ? 1 : classes, input_dim),
        bias_("linear.bias", classes == 2 ? 1 : classes, 1) {}

  std::size_t classes() const { return classes_; }

  nn::DenseMatrix transform(const nn::DenseMatrix& rows) const {
    return clusters_ ? cluster_average_features(rows, *clusters_) : rows;
  }

  /// Raw one-vs-rest scores on already transformed inputs (rows x heads).
  nn::DenseMatrix scores(const nn::DenseMatrix& x) const {
    nn::DenseMatrix s;
    nn::gemm(x, false, weight_.value, true, s);
    for (std::size_t r = 0; r < s.rows(); ++r)
      for (std::size_t h = 0; h < s.cols(); ++h) s(r, h) += bias_.value(h, 0);
    return s;
  }

  nn::DenseMatrix logits(const nn::DenseMatrix& rows) override {
    const auto s = scores(transform(rows));
    if (classes_ != 2) return s;
    nn::DenseMatrix out(s.rows(), 2);
    for (std::size_t r = 0; r < s.rows(); ++r) out(r, 1) = s(r, 0);
    return out;
  }

  std::vector<nn::Param*> params() override { return {&weight_, &bias_}; }
  nn::Param& weight() { return weight_; }
  nn::Param& bias() { return bias_; }

 private:
  std::size_t classes_;
  std::optional<std::vector<NodeSet>> clusters_;
  nn::Param weight_;
  nn::Param bias_;
};

/// Builds an untrained model. Uninformed kinds never receive the graph or the
/// clusters, whatever the caller passes.
inline std::unique_ptr<Model> build_model(const ModelSpec& spec, const BkGraph* graph,
                                          const std::vector<NodeSet>* clusters, std::size_t feature_dim,
                                          std::size_t classes) {
  spec.validate();
  if (classes < 2) throw Error(Errc::InvalidParam, "need at least 2 classes");
  if (needs_graph(spec.kind) && !graph)
    throw Error(Errc::MissingGraph, spec.label() + " is informed and needs a BK graph");
  if (needs_clusters(spec.kind) && (!clusters || clusters->empty()))
    throw Error(Errc::MissingClusters, spec.label() + " needs cluster assignments");

  NeuralNet::Config cfg;
  cfg.gnn_layers = spec.gnn_layers;
  cfg.hidden_dim = spec.hidden_dim;
  cfg.mlp_hidden_layers = spec.mlp_hidden_layers;
  cfg.mlp_hidden_dim = spec.mlp_hidden_dim;
  switch (spec.kind) {
    case ModelKind::Gcn: cfg.gnn = GnnType::Gcn; break;
    case ModelKind::Gatv2: cfg.gnn = GnnType::Gatv2; break;
    case ModelKind::ParallelGnnMlp:
      cfg.gnn = spec.gnn;
      cfg.mlp_branch = true;
      break;
    case ModelKind::Mlp: cfg.mlp_branch = true; break;
    case ModelKind::LogRegL1:
    case ModelKind::LinearSvm: return std::make_unique<LinearModel>(feature_dim, classes, std::nullopt);
    case ModelKind::ClusterAvgLogReg:
    case ModelKind::ClusterAvgSvm: return std::make_unique<LinearModel>(clusters->size(), classes, *clusters);
  }
  auto net = std::make_unique<NeuralNet>(cfg, cfg.gnn ? graph : nullptr, feature_dim, classes);
  Rng init_rng(derive_seed({spec.seed, hash_tag("init")}));
  net->init(init_rng);
  return net;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainedModel {
  ModelSpec spec;
  std::unique_ptr<Model> model;
  std::vector<double> loss_history;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
};

namespace detail {

inline void check_finite(double loss, int epoch) {
  if (!std::isfinite(loss))
    throw Error(Errc::TrainingDiverged, "non-finite loss at epoch " + std::to_string(epoch));
}

inline std::vector<double> train_neural(NeuralNet& net, const ModelSpec& spec, const nn::DenseMatrix& x,
                                        std::span<const int> labels, std::span<const std::size_t> train) {
  nn::AdamState adam;
  adam.lr = spec.lr;
  Rng batch_rng(derive_seed({spec.seed, hash_tag("batches")}));
  std::vector<std::size_t> order(train.begin(), train.end());
  std::vector<double> history;
  const auto params = net.params();
  const auto bs = static_cast<std::size_t>(spec.batch_size);
  std::vector<int> batch_labels;
  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    batch_rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(bs, order.size() - start));
      const auto rows = gather_rows(x, idx);
      batch_labels.clear();
      for (auto i : idx) batch_labels.push_back(labels[i]);
      net.zero_grad();
      const auto logits = net.forward(rows);
      auto [loss, grad] = nn::softmax_cross_entropy(logits, batch_labels);
      check_finite(loss, epoch);
      net.backward(grad);
      nn::adam_step(params, adam);
      total += loss * static_cast<double>(idx.size());
    }
    history.push_back(total / static_cast<double>(order.size()));
  }
  return history;
}

/// Largest eigenvalue of [x 1]^T [x 1] / n by power iteration.
inline double gram_spectral_radius(const nn::DenseMatrix& x) {
  const std::size_t d = x.cols() + 1;
  std::vector<double> v(d, 1.0 / std::sqrt(static_cast<double>(d))), w(d);
  double lambda = 0.0;
  for (int it = 0; it < 100; ++it) {
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      auto row = x.row(r);
      double dot = v[d - 1];
      for (std::size_t c = 0; c + 1 < d; ++c) dot += row[c] * v[c];
      for (std::size_t c = 0; c + 1 < d; ++c) w[c] += dot * row[c];
      w[d - 1] += dot;
    }
    double norm = 0.0;
    for (double& e : w) {
      e /= static_cast<double>(x.rows());
      norm += e * e;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    lambda = norm;
    for (std::size_t c = 0; c < d; ++c) v[c] = w[c] / norm;
  }
  return lambda;
}

inline double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

/// One binary L1-regularized logistic regression by FISTA; targets in {0,1}.
/// Returns the objective after each iteration. The bias is not penalized.
inline std::vector<double> fit_logreg_l1(const nn::DenseMatrix& x, std::span<const double> target,
                                         double lambda, int iterations, std::span<double> w, double& b) {
  const std::size_t n = x.rows(), d = x.cols();
  const double lipschitz = 0.25 * gram_spectral_radius(x);
  if (!std::isfinite(lipschitz)) throw Error(Errc::TrainingDiverged, "feature scale overflows the step size");
  const double step = lipschitz > 0.0 ? 1.0 / lipschitz : 1.0;
  std::vector<double> yw(w.begin(), w.end()), prev(w.begin(), w.end()), grad(d);
  double yb = b, prev_b = b, t = 1.0;
  std::vector<double> history;
  auto objective = [&](std::span<const double> ww, double bb) {
    double loss = 0.0, l1 = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      double z = bb;
      for (std::size_t c = 0; c < d; ++c) z += x(r, c) * ww[c];
      // log(1 + e^z) - t z, stable in both tails
      loss += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - target[r] * z;
    }
    for (double v : ww) l1 += std::abs(v);
    return loss / static_cast<double>(n) + lambda * l1;
  };
  for (int it = 0; it < iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      double z = yb;
      for (std::size_t c = 0; c < d; ++c) z += x(r, c) * yw[c];
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double e = (p - target[r]) / static_cast<double>(n);
      for (std::size_t c = 0; c < d; ++c) grad[c] += e * x(r, c);
      grad_b += e;
    }
    for (std::size_t c = 0; c < d; ++c) w[c] = soft_threshold(yw[c] - step * grad[c], step * lambda);
    b = yb - step * grad_b;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double mom = (t - 1.0) / t_next;
    for (std::size_t c = 0; c < d; ++c) {
      yw[c] = w[c] + mom * (w[c] - prev[c]);
      prev[c] = w[c];
    }
    yb = b + mom * (b - prev_b);
    prev_b = b;
    t = t_next;
    history.push_back(objective(w, b));
  }
  return history;
}

/// Binary linear SVM, targets in {-1,+1}: minibatch subgradient descent
/// (Pegasos schedule) on lambda/2 |w|^2 + mean hinge with lambda = 1/(C n).
/// The returned weights average the iterates of the second half of training.
inline std::vector<double> fit_linear_svm(const nn::DenseMatrix& x, std::span<const double> target,
                                          double c_reg, int epochs, std::size_t batch_size, Rng& rng,
                                          std::span<double> w_out, double& b_out) {
  const std::size_t n = x.rows(), d = x.cols();
  const double lambda = 1.0 / (c_reg * static_cast<double>(n));
  std::vector<double> w(d, 0.0), avg_w(d, 0.0), grad(d);
  double b = 0.0, avg_b = 0.0;
  long averaged = 0;
  long step = 0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> history;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t end = std::min(n, start + batch_size);
      ++step;
      const double eta = 1.0 / (lambda * static_cast<double>(step + 100));
      std::fill(grad.begin(), grad.end(), 0.0);
      double grad_b = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t r = order[k];
        double z = b;
        for (std::size_t c = 0; c < d; ++c) z += x(r, c) * w[c];
        if (target[r] * z < 1.0) {
          for (std::size_t c = 0; c < d; ++c) grad[c] -= target[r] * x(r, c);
          grad_b -= target[r];
        }
      }
      const double m = static_cast<double>(end - start);
      for (std::size_t c = 0; c < d; ++c) w[c] -= eta * (lambda * w[c] + grad[c] / m);
      b -= eta * grad_b / m;
    }
    if (epoch >= epochs / 2) {
      ++averaged;
      for (std::size_t c = 0; c < d; ++c) avg_w[c] += (w[c] - avg_w[c]) / static_cast<double>(averaged);
      avg_b += (b - avg_b) / static_cast<double>(averaged);
    }
    double hinge = 0.0, norm = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      double z = b;
      for (std::size_t c = 0; c < d; ++c) z += x(r, c) * w[c];
      const double slack = 1.0 - target[r] * z;
      hinge += slack > 0.0 || std::isnan(slack) ? slack : 0.0;  // keep NaN visible
    }
    for (double v : w) norm += v * v;
    history.push_back(0.5 * lambda * norm + hinge / static_cast<double>(n));
  }
  std::copy(avg_w.begin(), avg_w.end(), w_out.begin());
  b_out = avg_b;
  return history;
}

inline std::vector<double> train_linear(LinearModel& model, const ModelSpec& spec, const nn::DenseMatrix& x_all,
                                        std::span<const int> labels, std::span<const std::size_t> train) {
  const auto x = model.transform(gather_rows(x_all, train));
  const std::size_t heads = model.weight().value.rows();
  const std::size_t d = x.cols();
  const bool svm = spec.kind == ModelKind::LinearSvm || spec.kind == ModelKind::ClusterAvgSvm;
  std::vector<double> history(static_cast<std::size_t>(spec.epochs), 0.0);
  Rng rng(derive_seed({spec.seed, hash_tag("batches")}));
  for (std::size_t h = 0; h < heads; ++h) {
    // Binary: head 0 separates class 1 from class 0. Otherwise head h is class h vs rest.
    const int positive = heads == 1 ? 1 : static_cast<int>(h);
    std::vector<double> target(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
      const bool pos = labels[train[i]] == positive;
      target[i] = svm ? (pos ? 1.0 : -1.0) : (pos ? 1.0 : 0.0);
    }
    std::vector<double> w(d, 0.0);
    double b = 0.0;
    const auto hist = svm ? fit_linear_svm(x, target, spec.svm_c, spec.epochs,
                                           static_cast<std::size_t>(spec.batch_size), rng, w, b)
                          : fit_logreg_l1(x, target, spec.l1_lambda, spec.epochs, w, b);
    for (std::size_t c = 0; c < d; ++c) model.weight().value(h, c) = w[c];
    model.bias().value(h, 0) = b;
    for (std::size_t e = 0; e < history.size(); ++e) history[e] += hist[e] / static_cast<double>(heads);
  }
  for (std::size_t e = 0; e < history.size(); ++e) check_finite(history[e], static_cast<int>(e));
  return history;
}

}  // namespace detail

/// Trains an already built model on the train side of `split`.
inline TrainedModel train(std::unique_ptr<Model> model, const ModelSpec& spec, const nn::DenseMatrix& features,
                          std::span<const int> labels, const Split& split) {
  if (features.rows() != labels.size()) throw Error(Errc::ShapeError, "features/labels row mismatch");
  for (auto i : split.train)
    if (i >= features.rows()) throw Error(Errc::InvalidParam, "train index out of range");
  TrainedModel out;
  out.spec = spec;
  if (auto* net = dynamic_cast<NeuralNet*>(model.get()))
    out.loss_history = detail::train_neural(*net, spec, features, labels, split.train);
  else if (auto* lin = dynamic_cast<LinearModel*>(model.get()))
    out.loss_history = detail::train_linear(*lin, spec, features, labels, split.train);
  else
    throw Error(Errc::InvalidParam, "unknown model type");
  out.model = std::move(model);
  out.train_indices = split.train;
  out.test_indices = split.test;
  return out;
}

/// Builds and trains in one step. `graph` and `clusters` are only handed to
/// kinds that use them.
inline TrainedModel train(const ModelSpec& spec, const SynthDataset& data, const Split& split,
                          const BkGraph* graph, const std::vector<NodeSet>* clusters) {
  auto model = build_model(spec, needs_graph(spec.kind) ? graph : nullptr,
                           needs_clusters(spec.kind) ? clusters : nullptr, data.feature_count(),
                           static_cast<std::size_t>(std::max(2, data.class_count())));
  return train(std::move(model), spec, data.features, data.labels, split);
}

/// Argmax predictions; ties resolve to the lowest class index.
inline std::vector<int> predict(Model& model, const nn::DenseMatrix& features, std::span<const std::size_t> indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < indices.size(); start += kChunk) {
    const auto idx = indices.subspan(start, std::min(kChunk, indices.size() - start));
    const auto z = model.logits(gather_rows(features, idx));
    for (std::size_t r = 0; r < z.rows(); ++r) {
      auto row = z.row(r);
      out.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
    }
  }
  return out;
}

inline double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw Error(Errc::ShapeError, "accuracy: size mismatch");
  if (predicted.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hit += predicted[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(predicted.size());
}

inline double evaluate(TrainedModel& trained, const nn::DenseMatrix& features, std::span<const int> labels,
                       std::span<const std::size_t> indices) {
  std::vector<int> truth;
  for (auto i : indices) {
    if (i >= labels.size()) throw Error(Errc::InvalidParam, "evaluation index out of range");
    truth.push_back(labels[i]);
  }
  return accuracy(predict(*trained.model, features, indices), truth);
}

}  // namespace bkgnn

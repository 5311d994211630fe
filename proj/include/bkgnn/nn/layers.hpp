#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bkgnn/graph.hpp"
#include "bkgnn/nn/matrix.hpp"
#include "bkgnn/rng.hpp"

namespace bkgnn::nn {

/// A trainable tensor and its gradient accumulator.
struct Param {
  std::string name;
  DenseMatrix value;
  DenseMatrix grad;

  Param() = default;
  Param(std::string n, std::size_t rows, std::size_t cols)
      : name(std::move(n)), value(rows, cols), grad(rows, cols) {}

  void zero_grad() { grad.fill(0.0); }
};

inline void glorot_uniform(DenseMatrix& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& x : w.values()) x = rng.uniform(-limit, limit);
}

enum class Activation { Identity, Relu };

/// Applies `act` in place. Returns the smallest |pre-activation| at a ReLU
/// kink (infinity for Identity), which finite-difference checks need.
inline double apply_activation(Activation act, DenseMatrix& m) {
  double margin = std::numeric_limits<double>::infinity();
  if (act == Activation::Relu)
    for (double& x : m.values()) {
      margin = std::min(margin, std::abs(x));
      x = x < 0.0 ? 0.0 : x;  // NaN passes through
    }
  return margin;
}

/// In-place: grad *= act'(output).
inline void activation_backward(Activation act, const DenseMatrix& output, DenseMatrix& grad) {
  if (act != Activation::Relu) return;
  auto out = output.values();
  auto g = grad.values();
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(out[i] > 0.0)) g[i] = 0.0;
}

// ---------------------------------------------------------------------------
// Dense (affine) layer: y = act(x W + b)
// ---------------------------------------------------------------------------

class DenseLayer {
 public:
  DenseLayer(std::string name, std::size_t in, std::size_t out, Activation act)
      : weight_(name + ".weight", in, out), bias_(name + ".bias", 1, out), act_(act) {}

  void init(Rng& rng) {
    glorot_uniform(weight_.value, in_dim(), out_dim(), rng);
    bias_.value.fill(0.0);
  }

  std::size_t in_dim() const { return weight_.value.rows(); }
  std::size_t out_dim() const { return weight_.value.cols(); }

  DenseMatrix forward(const DenseMatrix& x) {
    if (x.cols() != in_dim())
      throw Error(Errc::ShapeError, weight_.name + ": input has " + std::to_string(x.cols()) +
                                        " columns, want " + std::to_string(in_dim()));
    input_ = x;
    DenseMatrix y;
    gemm(x, false, weight_.value, false, y);
    add_row_bias(y, bias_.value);
    margin_ = apply_activation(act_, y);
    output_ = y;
    return y;
  }

  DenseMatrix backward(DenseMatrix grad) {
    require_shape(grad, output_.rows(), output_.cols(), "dense backward");
    activation_backward(act_, output_, grad);
    accumulate_column_sums(grad, bias_.grad);
    gemm(input_, true, grad, false, weight_.grad, 1.0);
    DenseMatrix gx;
    gemm(grad, false, weight_.value, true, gx);
    return gx;
  }

  std::vector<Param*> params() { return {&weight_, &bias_}; }
  Param& weight() { return weight_; }
  Param& bias() { return bias_; }
  double kink_margin() const { return margin_; }

 private:
  Param weight_;
  Param bias_;
  Activation act_;
  DenseMatrix input_;
  DenseMatrix output_;
  double margin_ = std::numeric_limits<double>::infinity();
};

// ---------------------------------------------------------------------------
// Graph propagation structures
// ---------------------------------------------------------------------------

/// A_hat = D^-1/2 (A + I) D^-1/2 with edge weights entering A.
inline DenseMatrix normalize_adjacency(const BkGraph& g) {
  const std::size_t n = g.node_count();
  if (n == 0) throw Error(Errc::EmptyInput, "normalize_adjacency on empty graph");
  DenseMatrix a(n, n);
  std::vector<double> degree(n, 1.0);
  for (NodeId u = 0; u < n; ++u) {
    a(u, u) = 1.0;
    for (const auto& nb : g.neighbors(u)) {
      a(u, nb.id) = static_cast<double>(nb.weight);
      degree[u] += static_cast<double>(nb.weight);
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (a(i, j) != 0.0) a(i, j) /= std::sqrt(degree[i] * degree[j]);
  return a;
}

/// Neighbor lists with the self-loop added, in CSR form (ascending ids).
struct NeighborhoodIndex {
  std::vector<std::size_t> offsets;  // size n+1
  std::vector<NodeId> ids;

  std::size_t node_count() const { return offsets.size() - 1; }
  std::span<const NodeId> of(std::size_t i) const {
    return {ids.data() + offsets[i], offsets[i + 1] - offsets[i]};
  }

  static NeighborhoodIndex with_self_loops(const BkGraph& g) {
    NeighborhoodIndex idx;
    idx.offsets.push_back(0);
    for (NodeId u = 0; u < g.node_count(); ++u) {
      bool self_done = false;
      for (const auto& nb : g.neighbors(u)) {
        if (!self_done && nb.id > u) {
          idx.ids.push_back(u);
          self_done = true;
        }
        idx.ids.push_back(nb.id);
      }
      if (!self_done) idx.ids.push_back(u);
      idx.offsets.push_back(idx.ids.size());
    }
    return idx;
  }
};

/// Everything a message-passing layer needs about the (fixed) graph.
struct GraphContext {
  DenseMatrix a_hat;
  NeighborhoodIndex neighborhoods;

  std::size_t node_count() const { return a_hat.rows(); }

  static GraphContext from(const BkGraph& g) {
    return {normalize_adjacency(g), NeighborhoodIndex::with_self_loops(g)};
  }
};

// Batched node tensors use a node-major layout: row (node * batch + b) holds
// the features of `node` in sample b. The same buffer viewed as
// node x (batch * dim) makes neighborhood aggregation a single matrix product.

/// rows: batch x nodes (one scalar feature per node) -> (nodes*batch) x 1
inline DenseMatrix rows_to_nodes(const DenseMatrix& rows) {
  const std::size_t batch = rows.rows(), n = rows.cols();
  DenseMatrix out(n * batch, 1);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t v = 0; v < n; ++v) out(v * batch + b, 0) = rows(b, v);
  return out;
}

/// (nodes*batch) x dim -> batch x (nodes*dim), concatenating node embeddings
/// in node-id order.
inline DenseMatrix concat_readout(const DenseMatrix& h, std::size_t nodes, std::size_t batch) {
  const std::size_t d = h.cols();
  DenseMatrix out(batch, nodes * d);
  for (std::size_t v = 0; v < nodes; ++v)
    for (std::size_t b = 0; b < batch; ++b) {
      auto src = h.row(v * batch + b);
      std::copy(src.begin(), src.end(), out.row(b).begin() + v * d);
    }
  return out;
}

inline DenseMatrix concat_readout_backward(const DenseMatrix& g, std::size_t nodes, std::size_t batch,
                                           std::size_t dim) {
  DenseMatrix out(nodes * batch, dim);
  for (std::size_t v = 0; v < nodes; ++v)
    for (std::size_t b = 0; b < batch; ++b) {
      auto src = g.row(b).subspan(v * dim, dim);
      std::copy(src.begin(), src.end(), out.row(v * batch + b).begin());
    }
  return out;
}

/// Interface shared by the message-passing layers.
class GraphLayer {
 public:
  virtual ~GraphLayer() = default;
  virtual void init(Rng& rng) = 0;
  virtual DenseMatrix forward(const GraphContext& ctx, const DenseMatrix& x, std::size_t batch) = 0;
  virtual DenseMatrix backward(DenseMatrix grad) = 0;
  virtual std::vector<Param*> params() = 0;
  virtual std::size_t out_dim() const = 0;
  /// Smallest |input| to a ReLU or LeakyReLU in the last forward pass.
  virtual double kink_margin() const = 0;
};

// ---------------------------------------------------------------------------
// GCN: H = act(A_hat X W + b)
// ---------------------------------------------------------------------------

class GcnLayer final : public GraphLayer {
 public:
  GcnLayer(std::string name, std::size_t in, std::size_t out, Activation act)
      : weight_(name + ".weight", in, out), bias_(name + ".bias", 1, out), act_(act) {}

  void init(Rng& rng) override {
    glorot_uniform(weight_.value, weight_.value.rows(), weight_.value.cols(), rng);
    bias_.value.fill(0.0);
  }

  std::size_t out_dim() const override { return weight_.value.cols(); }

  DenseMatrix forward(const GraphContext& ctx, const DenseMatrix& x, std::size_t batch) override {
    const std::size_t n = ctx.node_count();
    if (x.rows() != n * batch || x.cols() != weight_.value.rows())
      throw Error(Errc::ShapeError, weight_.name + ": input " + shape_str(x) + " for " +
                                        std::to_string(n) + " nodes x batch " + std::to_string(batch));
    ctx_ = &ctx;
    batch_ = batch;
    input_ = x;
    DenseMatrix xw;
    gemm(x, false, weight_.value, false, xw);
    xw.reshape(n, batch * out_dim());
    DenseMatrix h;
    gemm(ctx.a_hat, false, xw, false, h);
    h.reshape(n * batch, out_dim());
    add_row_bias(h, bias_.value);
    margin_ = apply_activation(act_, h);
    output_ = h;
    return h;
  }

  DenseMatrix backward(DenseMatrix grad) override {
    const std::size_t n = ctx_->node_count();
    require_shape(grad, output_.rows(), output_.cols(), "gcn backward");
    activation_backward(act_, output_, grad);
    accumulate_column_sums(grad, bias_.grad);
    grad.reshape(n, batch_ * out_dim());
    DenseMatrix gxw;
    gemm(ctx_->a_hat, true, grad, false, gxw);
    gxw.reshape(n * batch_, out_dim());
    gemm(input_, true, gxw, false, weight_.grad, 1.0);
    DenseMatrix gx;
    gemm(gxw, false, weight_.value, true, gx);
    return gx;
  }

  std::vector<Param*> params() override { return {&weight_, &bias_}; }
  Param& weight() { return weight_; }
  Param& bias() { return bias_; }
  double kink_margin() const override { return margin_; }

 private:
  Param weight_;
  Param bias_;
  Activation act_;
  const GraphContext* ctx_ = nullptr;
  std::size_t batch_ = 0;
  DenseMatrix input_;
  DenseMatrix output_;
  double margin_ = std::numeric_limits<double>::infinity();
};

// ---------------------------------------------------------------------------
// GATv2 (single head):
//   e_ij  = a . LeakyReLU(W_t x_i + W_s x_j)     j in N(i) + {i}
//   alpha = softmax_j(e_ij)
//   h_i   = act(sum_j alpha_ij W_s x_j + b)
// ---------------------------------------------------------------------------

class Gatv2Layer final : public GraphLayer {
 public:
  Gatv2Layer(std::string name, std::size_t in, std::size_t out, Activation act,
             double negative_slope = 0.2)
      : source_(name + ".source", in, out),
        target_(name + ".target", in, out),
        attention_(name + ".attention", out, 1),
        bias_(name + ".bias", 1, out),
        act_(act),
        slope_(negative_slope) {}

  void init(Rng& rng) override {
    const std::size_t in = source_.value.rows(), out = source_.value.cols();
    glorot_uniform(source_.value, in, out, rng);
    glorot_uniform(target_.value, in, out, rng);
    glorot_uniform(attention_.value, out, 1, rng);
    bias_.value.fill(0.0);
  }

  std::size_t out_dim() const override { return source_.value.cols(); }

  DenseMatrix forward(const GraphContext& ctx, const DenseMatrix& x, std::size_t batch) override {
    const std::size_t n = ctx.node_count();
    const std::size_t d = out_dim();
    if (x.rows() != n * batch || x.cols() != source_.value.rows())
      throw Error(Errc::ShapeError, source_.name + ": input " + shape_str(x) + " for " +
                                        std::to_string(n) + " nodes x batch " + std::to_string(batch));
    ctx_ = &ctx;
    batch_ = batch;
    input_ = x;
    gemm(x, false, source_.value, false, src_);
    gemm(x, false, target_.value, false, tgt_);
    const auto& nbh = ctx.neighborhoods;
    alpha_.assign(nbh.ids.size() * batch, 0.0);
    const double* a = attention_.value.data();

    DenseMatrix h(n * batch, d);
    std::vector<double> scores;
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const auto nbrs = nbh.of(i);
      scores.resize(nbrs.size());
      for (std::size_t b = 0; b < batch; ++b) {
        const double* ti = tgt_.data() + (i * batch + b) * d;
        double max_score = -std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < nbrs.size(); ++s) {
          const double* sj = src_.data() + (nbrs[s] * batch + b) * d;
          double e = 0.0;
          for (std::size_t k = 0; k < d; ++k) {
            const double u = ti[k] + sj[k];
            margin = std::min(margin, std::abs(u));
            e += a[k] * (u > 0.0 ? u : slope_ * u);
          }
          scores[s] = e;
          max_score = std::max(max_score, e);
        }
        double z = 0.0;
        for (double& e : scores) z += (e = std::exp(e - max_score));
        double* hi = h.data() + (i * batch + b) * d;
        for (std::size_t s = 0; s < nbrs.size(); ++s) {
          const double w = scores[s] / z;
          alpha_[(nbh.offsets[i] + s) * batch + b] = w;
          const double* sj = src_.data() + (nbrs[s] * batch + b) * d;
          for (std::size_t k = 0; k < d; ++k) hi[k] += w * sj[k];
        }
      }
    }
    add_row_bias(h, bias_.value);
    margin_ = std::min(margin, apply_activation(act_, h));
    output_ = h;
    return h;
  }

  DenseMatrix backward(DenseMatrix grad) override {
    const std::size_t n = ctx_->node_count();
    const std::size_t d = out_dim();
    const std::size_t batch = batch_;
    require_shape(grad, output_.rows(), output_.cols(), "gatv2 backward");
    activation_backward(act_, output_, grad);
    accumulate_column_sums(grad, bias_.grad);

    DenseMatrix g_src(n * batch, d), g_tgt(n * batch, d);
    const auto& nbh = ctx_->neighborhoods;
    const double* a = attention_.value.data();
    double* ga = attention_.grad.data();
    std::vector<double> g_alpha, u(d);
    for (std::size_t i = 0; i < n; ++i) {
      const auto nbrs = nbh.of(i);
      g_alpha.resize(nbrs.size());
      for (std::size_t b = 0; b < batch; ++b) {
        const double* gh = grad.data() + (i * batch + b) * d;
        const double* ti = tgt_.data() + (i * batch + b) * d;
        double weighted = 0.0;
        for (std::size_t s = 0; s < nbrs.size(); ++s) {
          const std::size_t row = nbrs[s] * batch + b;
          const double w = alpha_[(nbh.offsets[i] + s) * batch + b];
          const double* sj = src_.data() + row * d;
          double* gsj = g_src.data() + row * d;
          double dot = 0.0;
          for (std::size_t k = 0; k < d; ++k) {
            gsj[k] += w * gh[k];
            dot += gh[k] * sj[k];
          }
          g_alpha[s] = dot;
          weighted += w * dot;
        }
        double* gti = g_tgt.data() + (i * batch + b) * d;
        for (std::size_t s = 0; s < nbrs.size(); ++s) {
          const std::size_t row = nbrs[s] * batch + b;
          const double w = alpha_[(nbh.offsets[i] + s) * batch + b];
          const double ge = w * (g_alpha[s] - weighted);
          if (ge == 0.0) continue;
          const double* sj = src_.data() + row * d;
          double* gsj = g_src.data() + row * d;
          for (std::size_t k = 0; k < d; ++k) {
            const double pre = ti[k] + sj[k];
            const double act = pre > 0.0 ? pre : slope_ * pre;
            ga[k] += ge * act;
            const double gu = ge * a[k] * (pre > 0.0 ? 1.0 : slope_);
            gti[k] += gu;
            gsj[k] += gu;
          }
        }
      }
    }
    gemm(input_, true, g_src, false, source_.grad, 1.0);
    gemm(input_, true, g_tgt, false, target_.grad, 1.0);
    DenseMatrix gx;
    gemm(g_src, false, source_.value, true, gx);
    gemm(g_tgt, false, target_.value, true, gx, 1.0);
    return gx;
  }

  std::vector<Param*> params() override { return {&source_, &target_, &attention_, &bias_}; }

  /// Attention weights of node i in sample b from the last forward pass,
  /// aligned with ctx.neighborhoods.of(i).
  std::vector<double> attention_weights(std::size_t i, std::size_t b = 0) const {
    const auto& nbh = ctx_->neighborhoods;
    std::vector<double> out;
    for (std::size_t s = nbh.offsets[i]; s < nbh.offsets[i + 1]; ++s) out.push_back(alpha_[s * batch_ + b]);
    return out;
  }

  Param& source() { return source_; }
  Param& target() { return target_; }
  Param& attention() { return attention_; }
  Param& bias() { return bias_; }
  double kink_margin() const override { return margin_; }

 private:
  Param source_;
  Param target_;
  Param attention_;
  Param bias_;
  Activation act_;
  double slope_;
  const GraphContext* ctx_ = nullptr;
  std::size_t batch_ = 0;
  DenseMatrix input_;
  DenseMatrix src_;
  DenseMatrix tgt_;
  std::vector<double> alpha_;
  DenseMatrix output_;
  double margin_ = std::numeric_limits<double>::infinity();
};

}  // namespace bkgnn::nn

#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "bkgnn/nn/layers.hpp"

namespace bkgnn::nn {

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<DenseMatrix> first;
  std::vector<DenseMatrix> second;
};

/// One bias-corrected Adam update over `params` using their accumulated grads.
inline void adam_step(std::span<Param* const> params, AdamState& state) {
  if (state.first.empty()) {
    for (const Param* p : params) {
      state.first.emplace_back(p->value.rows(), p->value.cols());
      state.second.emplace_back(p->value.rows(), p->value.cols());
    }
  }
  if (state.first.size() != params.size())
    throw Error(Errc::ShapeError, "adam state tracks a different parameter list");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    auto& m = state.first[i];
    auto& v = state.second[i];
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols() ||
        m.rows() != p.value.rows() || m.cols() != p.value.cols())
      throw Error(Errc::ShapeError, "adam: shape mismatch on " + p.name);
    auto w = p.value.values();
    auto g = p.grad.values();
    auto mv = m.values();
    auto vv = v.values();
    for (std::size_t k = 0; k < w.size(); ++k) {
      mv[k] = state.beta1 * mv[k] + (1.0 - state.beta1) * g[k];
      vv[k] = state.beta2 * vv[k] + (1.0 - state.beta2) * g[k] * g[k];
      w[k] -= state.lr * (mv[k] / c1) / (std::sqrt(vv[k] / c2) + state.eps);
    }
  }
}

}  // namespace bkgnn::nn

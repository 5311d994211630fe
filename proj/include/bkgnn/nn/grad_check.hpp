#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "bkgnn/nn/layers.hpp"

namespace bkgnn::nn {

/// Compares analytic gradients with central finite differences over every
/// entry of every parameter.
///
/// `loss_and_backward` must zero the gradients, run forward and backward, and
/// return the scalar loss. Returns the largest
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
inline double grad_check(std::span<Param* const> params,
                         const std::function<double()>& loss_and_backward, double epsilon = 1e-5) {
  if (!(epsilon > 0.0)) throw Error(Errc::InvalidParam, "grad_check: epsilon must be > 0");
  loss_and_backward();
  std::vector<DenseMatrix> analytic;
  for (const Param* p : params) analytic.push_back(p->grad);

  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i]->value.values();
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double saved = w[k];
      w[k] = saved + epsilon;
      const double plus = loss_and_backward();
      w[k] = saved - epsilon;
      const double minus = loss_and_backward();
      w[k] = saved;
      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double a = analytic[i].values()[k];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  loss_and_backward();
  return worst;
}

}  // namespace bkgnn::nn

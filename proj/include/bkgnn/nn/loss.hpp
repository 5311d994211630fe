#pragma once

#include <cmath>
#include <span>
#include <string>

#include "bkgnn/nn/matrix.hpp"

namespace bkgnn::nn {

struct LossAndGrad {
  double loss = 0.0;
  DenseMatrix grad;
};

/// Mean softmax cross-entropy over the rows of `logits`, stabilized with
/// log-sum-exp. grad = (softmax - onehot) / rows.
inline LossAndGrad softmax_cross_entropy(const DenseMatrix& logits, std::span<const int> labels) {
  const std::size_t rows = logits.rows(), classes = logits.cols();
  if (labels.size() != rows) throw Error(Errc::ShapeError, "one label per logit row required");
  LossAndGrad out{0.0, DenseMatrix(rows, classes)};
  for (std::size_t r = 0; r < rows; ++r) {
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= classes)
      throw Error(Errc::InvalidLabel, "label " + std::to_string(y) + " outside [0, " +
                                          std::to_string(classes) + ")");
    auto z = logits.row(r);
    double m = z[0];
    for (double v : z) m = std::max(m, v);
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - m);
    const double lse = m + std::log(sum);
    out.loss += lse - z[y];
    auto g = out.grad.row(r);
    for (std::size_t c = 0; c < classes; ++c)
      g[c] = (std::exp(z[c] - lse) - (static_cast<int>(c) == y ? 1.0 : 0.0)) / static_cast<double>(rows);
  }
  out.loss /= static_cast<double>(rows);
  return out;
}

}  // namespace bkgnn::nn

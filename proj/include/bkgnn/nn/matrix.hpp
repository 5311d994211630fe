#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "bkgnn/error.hpp"

namespace bkgnn::nn {

/// Row-major dense matrix of doubles.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

  DenseMatrix(std::initializer_list<std::initializer_list<double>> init) {
    rows_ = init.size();
    cols_ = rows_ ? init.begin()->size() : 0;
    values_.reserve(rows_ * cols_);
    for (const auto& row : init) {
      if (row.size() != cols_) throw Error(Errc::ShapeError, "ragged initializer");
      values_.insert(values_.end(), row.begin(), row.end());
    }
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  void fill(double x) { std::fill(values_.begin(), values_.end(), x); }

  /// Reinterprets the buffer with a new shape of equal size.
  void reshape(std::size_t rows, std::size_t cols) {
    if (rows * cols != values_.size()) throw Error(Errc::ShapeError, "reshape size mismatch");
    rows_ = rows;
    cols_ = cols;
  }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
  }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

inline std::string shape_str(const DenseMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void require_shape(const DenseMatrix& m, std::size_t rows, std::size_t cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols)
    throw Error(Errc::ShapeError, std::string(what) + ": got " + shape_str(m) + ", want " +
                                      std::to_string(rows) + "x" + std::to_string(cols));
}

/// C = op(A) * op(B) + beta * C, where op transposes when the flag is set.
/// C is resized when beta == 0.
inline void gemm(const DenseMatrix& a, bool trans_a, const DenseMatrix& b, bool trans_b,
                 DenseMatrix& c, double beta = 0.0) {
  const std::size_t m = trans_a ? a.cols() : a.rows();
  const std::size_t k = trans_a ? a.rows() : a.cols();
  const std::size_t kb = trans_b ? b.cols() : b.rows();
  const std::size_t n = trans_b ? b.rows() : b.cols();
  if (k != kb)
    throw Error(Errc::ShapeError, "gemm inner dimension: " + shape_str(a) + (trans_a ? "^T" : "") +
                                      " * " + shape_str(b) + (trans_b ? "^T" : ""));
  if (beta == 0.0) {
    if (c.rows() != m || c.cols() != n) c = DenseMatrix(m, n);
    else c.fill(0.0);
  } else {
    require_shape(c, m, n, "gemm accumulator");
    if (beta != 1.0)
      for (double& x : c.values()) x *= beta;
  }
  double* cp = c.data();
  const double* ap = a.data();
  const double* bp = b.data();
  const std::size_t lda = a.cols();
  const std::size_t ldb = b.cols();

  if (!trans_a && !trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      double* crow = cp + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = ap[i * lda + p];
        if (aip == 0.0) continue;
        const double* brow = bp + p * ldb;
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
    }
  } else if (trans_a && !trans_b) {
    for (std::size_t p = 0; p < k; ++p) {
      const double* arow = ap + p * lda;
      const double* brow = bp + p * ldb;
      for (std::size_t i = 0; i < m; ++i) {
        const double api = arow[i];
        if (api == 0.0) continue;
        double* crow = cp + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
      }
    }
  } else if (!trans_a && trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      const double* arow = ap + i * lda;
      for (std::size_t j = 0; j < n; ++j) {
        const double* brow = bp + j * ldb;
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
        cp[i * n + j] += s;
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += ap[p * lda + i] * bp[j * ldb + p];
        cp[i * n + j] += s;
      }
  }
}

inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix c;
  gemm(a, false, b, false, c);
  return c;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

/// Adds a 1 x cols bias row to every row of m.
inline void add_row_bias(DenseMatrix& m, const DenseMatrix& bias) {
  require_shape(bias, 1, m.cols(), "bias");
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) row[c] += bias(0, c);
  }
}

/// Accumulates the column sums of m into the 1 x cols matrix acc.
inline void accumulate_column_sums(const DenseMatrix& m, DenseMatrix& acc) {
  require_shape(acc, 1, m.cols(), "bias gradient");
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) acc(0, c) += row[c];
  }
}

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error(Errc::ShapeError, "max_abs_diff");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.values()[i] - b.values()[i]));
  return d;
}

}  // namespace bkgnn::nn

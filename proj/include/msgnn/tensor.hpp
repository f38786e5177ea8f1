#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace msgnn {

// Dense row-major matrix. Real is float in production; tests also instantiate
// double to build finite-difference references.
template <class Real>
struct Tensor {
  std::int32_t rows = 0;
  std::int32_t cols = 0;
  std::vector<Real> data;

  Tensor() = default;
  Tensor(std::int32_t r, std::int32_t c)
      : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), Real(0)) {
    if (r < 0 || c < 0) throw std::invalid_argument("tensor: negative shape");
  }

  static Tensor zeros(std::int32_t r, std::int32_t c) { return Tensor(r, c); }

  size_t size() const { return data.size(); }
  Real* row(std::int32_t r) { return data.data() + static_cast<size_t>(r) * cols; }
  const Real* row(std::int32_t r) const { return data.data() + static_cast<size_t>(r) * cols; }
  Real& at(std::int32_t r, std::int32_t c) { return data[static_cast<size_t>(r) * cols + c]; }
  Real at(std::int32_t r, std::int32_t c) const { return data[static_cast<size_t>(r) * cols + c]; }

  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  template <class Other>
  Tensor<Other> cast() const {
    Tensor<Other> t(rows, cols);
    for (size_t i = 0; i < data.size(); ++i) t.data[i] = static_cast<Other>(data[i]);
    return t;
  }
};

template <class Real>
bool all_finite(const Tensor<Real>& t) {
  for (Real v : t.data)
    if (!std::isfinite(v)) return false;
  return true;
}

// C (+)= A * B. Fixed i,k,j loop order: the k-sum accumulates in ascending
// order for every element, so results do not depend on shapes or batching.
template <class Real>
void matmul_nn(const Tensor<Real>& a, const Tensor<Real>& b, Tensor<Real>& c,
               bool accumulate = false) {
  if (a.cols != b.rows || c.rows != a.rows || c.cols != b.cols)
    throw std::invalid_argument("matmul_nn: shape mismatch");
  for (std::int32_t i = 0; i < a.rows; ++i) {
    Real* crow = c.row(i);
    if (!accumulate)
      for (std::int32_t j = 0; j < c.cols; ++j) crow[j] = Real(0);
    const Real* arow = a.row(i);
    for (std::int32_t k = 0; k < a.cols; ++k) {
      const Real aik = arow[k];
      const Real* brow = b.row(k);
      for (std::int32_t j = 0; j < c.cols; ++j) crow[j] += aik * brow[j];
    }
  }
}

// C (+)= A * B^T.
template <class Real>
void matmul_nt(const Tensor<Real>& a, const Tensor<Real>& b, Tensor<Real>& c,
               bool accumulate = false) {
  if (a.cols != b.cols || c.rows != a.rows || c.cols != b.rows)
    throw std::invalid_argument("matmul_nt: shape mismatch");
  for (std::int32_t i = 0; i < a.rows; ++i) {
    const Real* arow = a.row(i);
    Real* crow = c.row(i);
    for (std::int32_t j = 0; j < b.rows; ++j) {
      const Real* brow = b.row(j);
      Real acc(0);
      for (std::int32_t k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
      crow[j] = accumulate ? crow[j] + acc : acc;
    }
  }
}

// C (+)= A^T * B.
template <class Real>
void matmul_tn(const Tensor<Real>& a, const Tensor<Real>& b, Tensor<Real>& c,
               bool accumulate = false) {
  if (a.rows != b.rows || c.rows != a.cols || c.cols != b.cols)
    throw std::invalid_argument("matmul_tn: shape mismatch");
  if (!accumulate)
    for (Real& v : c.data) v = Real(0);
  for (std::int32_t i = 0; i < a.rows; ++i) {
    const Real* arow = a.row(i);
    const Real* brow = b.row(i);
    for (std::int32_t k = 0; k < a.cols; ++k) {
      const Real aik = arow[k];
      Real* crow = c.row(k);
      for (std::int32_t j = 0; j < c.cols; ++j) crow[j] += aik * brow[j];
    }
  }
}

}  // namespace msgnn

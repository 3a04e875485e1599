// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "dynsurf/errors.hpp"

namespace dynsurf {

// Dense row-major tensor. Everything in this codebase is rank <= 2; scalars
// are stored as [1, 1] and vectors as [1, n].
template <class Real>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<Real> values;

  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, Real fill = Real(0))
      : shape{rows, cols}, values(rows * cols, fill) {}

  explicit Tensor(const std::vector<std::size_t>& s) : shape(s) {
    if (s.empty() || s.size() > 2) throw DimensionError("rank must be 1 or 2");
    values.assign(std::accumulate(s.begin(), s.end(), std::size_t{1},
                                  std::multiplies<>()),
                  Real(0));
  }

  static Tensor scalar(Real v) {
    Tensor t(1, 1);
    t.values[0] = v;
    return t;
  }

  static Tensor from_rows(std::initializer_list<std::initializer_list<Real>> rows_init) {
    Tensor t(rows_init.size(), rows_init.begin()->size());
    std::size_t i = 0;
    for (const auto& row : rows_init) {
      if (row.size() != t.cols()) throw DimensionError("ragged initializer");
      for (Real v : row) t.values[i++] = v;
    }
    return t;
  }

  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() > 1 ? shape[1] : 1; }
  std::size_t size() const { return values.size(); }

  Real& at(std::size_t i, std::size_t j) { return values[i * cols() + j]; }
  Real at(std::size_t i, std::size_t j) const { return values[i * cols() + j]; }

  Real& operator[](std::size_t i) { return values[i]; }
  Real operator[](std::size_t i) const { return values[i]; }

  bool same_shape(const Tensor& o) const {
    return rows() == o.rows() && cols() == o.cols();
  }

  bool all_finite() const {
    for (Real v : values) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  template <class Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(rows(), cols());
    for (std::size_t i = 0; i < values.size(); ++i) {
      out.values[i] = static_cast<Other>(values[i]);
    }
    return out;
  }
};

template <class Real>
std::string shape_str(const Tensor<Real>& t) {
  return "[" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + "]";
}

inline std::string shape_str(const std::vector<std::size_t>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i)
    out += (i ? "x" : "") + std::to_string(s[i]);
  return out + "]";
}

// Forward matmul kernel with per-row determinism: every output row is a
// fixed-order accumulation over its own input row only, so a point's value
// cannot change with its position in a batch or with what else shares the
// batch. The max-pool encoders' bitwise permutation/duplication invariance
// and the subset-mapping identity in aggregation depend on this; blocked
// GEMMs (packed panels + tail kernels) break it at the ulp level.
template <class Real>
void row_stable_matmul(const Tensor<Real>& a, const Tensor<Real>& b,
                       Tensor<Real>& c) {
  const std::size_t kk = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    Real* crow = &c.values[i * m];
    std::fill(crow, crow + m, Real(0));
    const Real* arow = &a.values[i * kk];
    std::size_t k = 0;
    for (; k + 4 <= kk; k += 4) {
      const Real a0 = arow[k], a1 = arow[k + 1], a2 = arow[k + 2],
                 a3 = arow[k + 3];
      const Real* b0 = &b.values[k * m];
      const Real* b1 = b0 + m;
      const Real* b2 = b1 + m;
      const Real* b3 = b2 + m;
      for (std::size_t j = 0; j < m; ++j)
        crow[j] = ((((crow[j] + a0 * b0[j]) + a1 * b1[j]) + a2 * b2[j]) +
                   a3 * b3[j]);
    }
    for (; k < kk; ++k) {
      const Real ak = arow[k];
      const Real* bk = &b.values[k * m];
      for (std::size_t j = 0; j < m; ++j) crow[j] += ak * bk[j];
    }
  }
}

// Overflow-free scalar forms shared by tape, raw MLP paths, and losses.
template <class Real>
Real softplus_stable(Real x) {
  return std::log1p(std::exp(-std::abs(x))) + (x > Real(0) ? x : Real(0));
}

template <class Real>
Real sigmoid_stable(Real x) {
  if (x >= Real(0)) return Real(1) / (Real(1) + std::exp(-x));
  Real e = std::exp(x);
  return e / (Real(1) + e);
}

}  // namespace dynsurf

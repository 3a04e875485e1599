// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dynsurf/params.hpp"
#include "dynsurf/rng.hpp"
#include "dynsurf/tape.hpp"
#include "dynsurf/tensor.hpp"

namespace dynsurf {

// Dense MLP with softplus hidden activations and a linear output (optionally
// softplus-activated for pooling trunks). Parameters live in a shared
// registry under "<prefix>/w<i>", "<prefix>/b<i>"; weights are [in,out] so a
// batch forward is x·W + b over row-major batches.
template <class Real>
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::string prefix, std::vector<std::size_t> dims,
      bool zero_init_last = false, bool activate_output = false)
      : prefix_(std::move(prefix)),
        dims_(std::move(dims)),
        zero_init_last_(zero_init_last),
        activate_output_(activate_output) {}

  const std::string& prefix() const { return prefix_; }
  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t in_dim() const { return dims_.front(); }
  std::size_t out_dim() const { return dims_.back(); }

  // Weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero biases; the last layer
  // is zeroed when configured (identity-at-init coupling conditioners).
  void init(Parameters<Real>& params, Rng& rng) const {
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      std::size_t fan_in = dims_[l], fan_out = dims_[l + 1];
      Tensor<Real> w(fan_in, fan_out);
      bool zero = zero_init_last_ && l + 2 == dims_.size();
      double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (auto& x : w.values)
        x = zero ? Real(0) : static_cast<Real>(rng.uniform(-bound, bound));
      params.add(weight_name(l), std::move(w));
      params.add(bias_name(l), Tensor<Real>(1, fan_out));
    }
  }

  Var forward(Tape<Real>& t, Var x) const {
    Var h = x;
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      h = t.add_row(t.matmul(h, t.param(weight_name(l))),
                    t.param(bias_name(l)));
      if (l + 2 < dims_.size() || activate_output_) h = t.softplus(h);
    }
    return h;
  }

  // Tape-free evaluation for inference and grid sampling. Matches the taped
  // path bit-for-bit on identical inputs (same op order, same kernels).
  Tensor<Real> forward_raw(const Parameters<Real>& params,
                           const Tensor<Real>& x) const {
    Tensor<Real> h = x;
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      const auto& w = params.at(weight_name(l));
      const auto& b = params.at(bias_name(l));
      if (h.cols() != w.rows())
        throw DimensionError("mlp " + prefix_ + ": input " +
                             shape_str(h.shape) + " vs layer " +
                             shape_str(w.shape));
      Tensor<Real> next(h.rows(), w.cols());
      row_stable_matmul(h, w, next);
      for (std::size_t i = 0; i < next.rows(); ++i)
        for (std::size_t j = 0; j < next.cols(); ++j)
          next.at(i, j) += b.values[j];
      if (l + 2 < dims_.size() || activate_output_)
        for (auto& v : next.values)
          v = std::log1p(std::exp(-std::abs(v))) + (v > Real(0) ? v : Real(0));
      h = std::move(next);
    }
    return h;
  }

  std::vector<std::string> param_names() const {
    std::vector<std::string> out;
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      out.push_back(weight_name(l));
      out.push_back(bias_name(l));
    }
    return out;
  }

 private:
  std::string weight_name(std::size_t l) const {
    return prefix_ + "/w" + std::to_string(l);
  }
  std::string bias_name(std::size_t l) const {
    return prefix_ + "/b" + std::to_string(l);
  }

  std::string prefix_;
  std::vector<std::size_t> dims_;
  bool zero_init_last_ = false;
  bool activate_output_ = false;
};

}  // namespace dynsurf

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "dynsurf/errors.hpp"
#include "dynsurf/params.hpp"

namespace dynsurf {

template <class Real>
struct AdamConfig {
  Real lr = Real(1e-3);
  Real beta1 = Real(0.9);
  Real beta2 = Real(0.999);
  Real eps = Real(1e-8);
};

// Bias-corrected Adam. Moments are laid out in parameter-registry order, so
// an update trajectory is a pure function of (initial params, grad stream).
template <class Real>
class Adam {
 public:
  Adam(const Parameters<Real>& params, AdamConfig<Real> cfg = {})
      : cfg_(cfg) {
    m_.reserve(params.count());
    v_.reserve(params.count());
    for (const auto& name : params.names()) {
      m_.emplace_back(params.at(name).size(), Real(0));
      v_.emplace_back(params.at(name).size(), Real(0));
    }
  }

  std::uint64_t step_count() const { return step_; }

  void step(Parameters<Real>& params, const Gradients<Real>& grads) {
    if (params.count() != m_.size())
      throw ContractError("adam: parameter count changed");
    ++step_;
    Real bc1 = Real(1) - std::pow(cfg_.beta1, Real(step_));
    Real bc2 = Real(1) - std::pow(cfg_.beta2, Real(step_));
    for (std::size_t p = 0; p < params.count(); ++p) {
      const auto& name = params.names()[p];
      auto& theta = params.at(name).values;
      const auto& g = grads.at(name).values;
      if (g.size() != theta.size())
        throw DimensionError("adam: gradient shape mismatch for " + name);
      auto& m = m_[p];
      auto& v = v_[p];
      for (std::size_t i = 0; i < theta.size(); ++i) {
        if (!std::isfinite(g[i]))
          throw NumericError("adam: non-finite gradient in " + name);
        m[i] = cfg_.beta1 * m[i] + (Real(1) - cfg_.beta1) * g[i];
        v[i] = cfg_.beta2 * v[i] + (Real(1) - cfg_.beta2) * g[i] * g[i];
        Real mhat = m[i] / bc1;
        Real vhat = v[i] / bc2;
        theta[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

 private:
  AdamConfig<Real> cfg_;
  std::uint64_t step_ = 0;
  std::vector<std::vector<Real>> m_, v_;
};

}  // namespace dynsurf

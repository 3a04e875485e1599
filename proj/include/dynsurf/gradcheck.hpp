// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>

#include "dynsurf/errors.hpp"
#include "dynsurf/params.hpp"
#include "dynsurf/tensor.hpp"

namespace dynsurf {

// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h. The oracle side of
// every gradient check in the test suite.
template <class Real>
Tensor<Real> finite_difference_grad(
    const std::function<Real(const Tensor<Real>&)>& f, const Tensor<Real>& x,
    Real h) {
  Tensor<Real> g(x.shape);
  Tensor<Real> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    Real saved = probe.values[i];
    probe.values[i] = saved + h;
    Real fp = f(probe);
    probe.values[i] = saved - h;
    Real fm = f(probe);
    probe.values[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericError("finite_difference_grad: non-finite f");
    g.values[i] = (fp - fm) / (2 * h);
  }
  return g;
}

// Same thing across a whole parameter registry: perturb in place, evaluate,
// restore. `eval` must read the registry that `params` references.
template <class Real>
Gradients<Real> finite_difference_param_grads(Parameters<Real>& params,
                                              const std::function<Real()>& eval,
                                              Real h) {
  Gradients<Real> out;
  for (const auto& name : params.names()) {
    auto& theta = params.at(name);
    Tensor<Real> g(theta.shape);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      Real saved = theta.values[i];
      theta.values[i] = saved + h;
      Real fp = eval();
      theta.values[i] = saved - h;
      Real fm = eval();
      theta.values[i] = saved;
      if (!std::isfinite(fp) || !std::isfinite(fm))
        throw NumericError("finite_difference_param_grads: non-finite f at " +
                           name);
      g.values[i] = (fp - fm) / (2 * h);
    }
    out.add(name, std::move(g));
  }
  return out;
}

// rel = |a-n| / max(floor, |a|, |n|); the tolerance convention for all
// gradient checks (floor keeps near-zero components from exploding the ratio).
template <class Real>
Real max_rel_error(const Gradients<Real>& analytic,
                   const Gradients<Real>& numeric, Real floor = Real(1e-6)) {
  Real worst = 0;
  for (const auto& name : analytic.names()) {
    const auto& a = analytic.at(name).values;
    const auto& n = numeric.at(name).values;
    if (a.size() != n.size())
      throw DimensionError("max_rel_error: shape mismatch for " + name);
    for (std::size_t i = 0; i < a.size(); ++i) {
      Real denom = std::max(floor, std::max(std::abs(a[i]), std::abs(n[i])));
      Real rel = std::abs(a[i] - n[i]) / denom;
      if (rel > worst) worst = rel;
    }
  }
  return worst;
}

}  // namespace dynsurf

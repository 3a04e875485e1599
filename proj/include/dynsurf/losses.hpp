// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dynsurf/errors.hpp"
#include "dynsurf/tape.hpp"
#include "dynsurf/tensor.hpp"

namespace dynsurf {

// Logits are clamped to +-30 before the stable BCE form
//   y*softplus(-x) + (1-y)*softplus(x),
// so saturated predictions stay finite (loss < 1e-9 when correct, ~60 when
// wrong) instead of producing log(0).
inline constexpr double kLogitClamp = 30.0;

// Guard inside the L2 row norm: sqrt(sum d^2 + eps) keeps the gradient
// defined at exactly-matching pairs without visibly moving any loss value.
inline constexpr double kNormEps = 1e-18;

template <class Real>
Var bce_with_logits(Tape<Real>& t, Var logits, const Tensor<Real>& labels) {
  if (!t.value(logits).same_shape(labels))
    throw DimensionError("bce: logits " + shape_str(t.value(logits).shape) +
                         " vs labels " + shape_str(labels.shape));
  for (Real v : labels.values)
    if (v != Real(0) && v != Real(1))
      throw ContractError("bce: labels must be binary");
  Var x = t.clamp(logits, Real(-kLogitClamp), Real(kLogitClamp));
  Var y = t.input(labels);
  t.tag(y, Tag::Target);
  Var on = t.mul(y, t.softplus(t.neg(x)));
  Var off = t.mul(t.add_const(t.neg(y), Real(1)), t.softplus(x));
  return t.mean_all(t.add(on, off));
}

// Mean over rows of the l-norm of (pred - target), l in {1, 2}.
template <class Real>
Var point_norm_loss(Tape<Real>& t, Var pred, const Tensor<Real>& target,
                    int l_norm) {
  if (!t.value(pred).same_shape(target))
    throw DimensionError("norm loss: pred " + shape_str(t.value(pred).shape) +
                         " vs target " + shape_str(target.shape));
  if (l_norm != 1 && l_norm != 2)
    throw ConfigError("norm order must be 1 or 2, got " +
                      std::to_string(l_norm));
  Var y = t.input(target);
  t.tag(y, Tag::Target);
  Var d = t.sub(pred, y);
  if (l_norm == 1) return t.mean_all(t.row_sums(t.abs(d)));
  return t.mean_all(t.sqrt(t.add_const(t.row_sums(t.mul(d, d)),
                                       Real(kNormEps))));
}

}  // namespace dynsurf

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dynsurf/errors.hpp"
#include "dynsurf/params.hpp"
#include "dynsurf/tensor.hpp"

namespace dynsurf {

enum class Op : std::uint8_t {
  Input,
  Param,
  Add,
  AddRow,
  Sub,
  Mul,
  Scale,
  AddConst,
  Neg,
  MatMul,
  Exp,
  Tanh,
  Softplus,
  Sigmoid,
  Sqrt,
  Abs,
  Clamp,
  ConcatRows,
  ConcatCols,
  SliceCols,
  RepeatRows,
  SumAll,
  MeanAll,
  RowSums,
  ColMax,
};

// Semantic marks used by the loss-structure audit (see
// compares_canonical_to_target): Canonical marks canonical-space coordinates,
// Target marks ground-truth supervision, Barrier stops flavor propagation at
// sanctioned consumers (the occupancy decoder, the inverse map).
enum class Tag : std::uint8_t { Inherit, Canonical, Barrier, Target };

struct Var {
  std::uint32_t idx = 0;
};

// Reverse-mode tape. Single-owner: build a forward graph, call backward once.
// Parents always precede children, so one reverse scan visits each node once.
template <class Real>
class Tape {
 public:
  explicit Tape(Parameters<Real>& params) : params_(params) {
    nodes_.reserve(1024);
  }

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t node_count() const { return nodes_.size(); }

  const Tensor<Real>& value(Var v) const { return nodes_[v.idx].value; }

  void tag(Var v, Tag t) { nodes_[v.idx].tag = t; }

  Var input(Tensor<Real> t) {
    Node n;
    n.op = Op::Input;
    n.value = std::move(t);
    return push(std::move(n));
  }

  Var param(const std::string& name) {
    Node n;
    n.op = Op::Param;
    n.value = params_.at(name);
    auto& names = params_.names();
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) {
        n.param_index = static_cast<std::int32_t>(i);
        break;
      }
    return push(std::move(n));
  }

  Var add(Var a, Var b) {
    require_same(a, b, "add");
    Node n = binary(Op::Add, a, b, val(a));
    const auto& vb = val(b).values;
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value.values[i] += vb[i];
    return push(std::move(n));
  }

  // a: [m,n] plus a broadcast row [1,n].
  Var add_row(Var a, Var row) {
    const auto& ta = val(a);
    const auto& tr = val(row);
    if (tr.rows() != 1 || tr.cols() != ta.cols())
      throw DimensionError("add_row: " + shape_str(ta.shape) + " vs " +
                           shape_str(tr.shape));
    Node n = binary(Op::AddRow, a, row, ta);
    for (std::size_t i = 0; i < ta.rows(); ++i)
      for (std::size_t j = 0; j < ta.cols(); ++j)
        n.value.at(i, j) += tr.values[j];
    return push(std::move(n));
  }

  Var sub(Var a, Var b) {
    require_same(a, b, "sub");
    Node n = binary(Op::Sub, a, b, val(a));
    const auto& vb = val(b).values;
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value.values[i] -= vb[i];
    return push(std::move(n));
  }

  Var mul(Var a, Var b) {
    require_same(a, b, "mul");
    Node n = binary(Op::Mul, a, b, val(a));
    const auto& vb = val(b).values;
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value.values[i] *= vb[i];
    return push(std::move(n));
  }

  Var scale(Var a, Real k) {
    Node n = unary(Op::Scale, a, val(a));
    n.c0 = k;
    for (auto& x : n.value.values) x *= k;
    return push(std::move(n));
  }

  Var add_const(Var a, Real k) {
    Node n = unary(Op::AddConst, a, val(a));
    n.c0 = k;
    for (auto& x : n.value.values) x += k;
    return push(std::move(n));
  }

  Var neg(Var a) {
    Node n = unary(Op::Neg, a, val(a));
    for (auto& x : n.value.values) x = -x;
    return push(std::move(n));
  }

  Var matmul(Var a, Var b) {
    const auto& ta = val(a);
    const auto& tb = val(b);
    if (ta.cols() != tb.rows())
      throw DimensionError("matmul: " + shape_str(ta.shape) + " x " +
                           shape_str(tb.shape));
    Node n = binary(Op::MatMul, a, b, Tensor<Real>(ta.rows(), tb.cols()));
    row_stable_matmul(ta, tb, n.value);
    return push(std::move(n));
  }

  Var exp(Var a) {
    Node n = unary(Op::Exp, a, val(a));
    for (auto& x : n.value.values) x = std::exp(x);
    return push(std::move(n));
  }

  Var tanh(Var a) {
    Node n = unary(Op::Tanh, a, val(a));
    for (auto& x : n.value.values) x = std::tanh(x);
    return push(std::move(n));
  }

  Var softplus(Var a) {
    Node n = unary(Op::Softplus, a, val(a));
    for (auto& x : n.value.values) x = softplus_val(x);
    return push(std::move(n));
  }

  Var sigmoid(Var a) {
    Node n = unary(Op::Sigmoid, a, val(a));
    for (auto& x : n.value.values) x = sigmoid_val(x);
    return push(std::move(n));
  }

  Var sqrt(Var a) {
    Node n = unary(Op::Sqrt, a, val(a));
    for (auto& x : n.value.values) {
      if (x < Real(0)) throw NumericError("sqrt of negative value");
      x = std::sqrt(x);
    }
    return push(std::move(n));
  }

  Var abs(Var a) {
    Node n = unary(Op::Abs, a, val(a));
    for (auto& x : n.value.values) x = std::abs(x);
    return push(std::move(n));
  }

  Var clamp(Var a, Real lo, Real hi) {
    Node n = unary(Op::Clamp, a, val(a));
    n.c0 = lo;
    n.c1 = hi;
    for (auto& x : n.value.values) x = x < lo ? lo : (x > hi ? hi : x);
    return push(std::move(n));
  }

  Var concat_rows(Var a, Var b) {
    const auto& ta = val(a);
    const auto& tb = val(b);
    if (ta.cols() != tb.cols())
      throw DimensionError("concat_rows: " + shape_str(ta.shape) + " vs " +
                           shape_str(tb.shape));
    Node n = binary(Op::ConcatRows, a, b,
                    Tensor<Real>(ta.rows() + tb.rows(), ta.cols()));
    std::copy(ta.values.begin(), ta.values.end(), n.value.values.begin());
    std::copy(tb.values.begin(), tb.values.end(),
              n.value.values.begin() + static_cast<std::ptrdiff_t>(ta.size()));
    return push(std::move(n));
  }

  Var concat_cols(Var a, Var b) {
    const auto& ta = val(a);
    const auto& tb = val(b);
    if (ta.rows() != tb.rows())
      throw DimensionError("concat_cols: " + shape_str(ta.shape) + " vs " +
                           shape_str(tb.shape));
    Node n = binary(Op::ConcatCols, a, b,
                    Tensor<Real>(ta.rows(), ta.cols() + tb.cols()));
    for (std::size_t i = 0; i < ta.rows(); ++i) {
      for (std::size_t j = 0; j < ta.cols(); ++j)
        n.value.at(i, j) = ta.at(i, j);
      for (std::size_t j = 0; j < tb.cols(); ++j)
        n.value.at(i, ta.cols() + j) = tb.at(i, j);
    }
    return push(std::move(n));
  }

  Var slice_cols(Var a, std::size_t start, std::size_t len) {
    const auto& ta = val(a);
    if (start + len > ta.cols())
      throw DimensionError("slice_cols out of range on " +
                           shape_str(ta.shape));
    Node n = unary(Op::SliceCols, a, Tensor<Real>(ta.rows(), len));
    n.i0 = static_cast<std::uint32_t>(start);
    n.i1 = static_cast<std::uint32_t>(len);
    for (std::size_t i = 0; i < ta.rows(); ++i)
      for (std::size_t j = 0; j < len; ++j)
        n.value.at(i, j) = ta.at(i, start + j);
    return push(std::move(n));
  }

  // [1,n] -> [m,n]
  Var repeat_rows(Var a, std::size_t m) {
    const auto& ta = val(a);
    if (ta.rows() != 1)
      throw DimensionError("repeat_rows wants a single row, got " +
                           shape_str(ta.shape));
    Node n = unary(Op::RepeatRows, a, Tensor<Real>(m, ta.cols()));
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < ta.cols(); ++j)
        n.value.at(i, j) = ta.values[j];
    return push(std::move(n));
  }

  Var sum_all(Var a) {
    Node n = unary(Op::SumAll, a, Tensor<Real>(1, 1));
    Real s = 0;
    for (Real x : val(a).values) s += x;
    n.value.values[0] = s;
    return push(std::move(n));
  }

  Var mean_all(Var a) {
    Node n = unary(Op::MeanAll, a, Tensor<Real>(1, 1));
    Real s = 0;
    for (Real x : val(a).values) s += x;
    n.value.values[0] = s / static_cast<Real>(val(a).size());
    return push(std::move(n));
  }

  Var row_sums(Var a) {
    const auto& ta = val(a);
    Node n = unary(Op::RowSums, a, Tensor<Real>(ta.rows(), 1));
    for (std::size_t i = 0; i < ta.rows(); ++i) {
      Real s = 0;
      for (std::size_t j = 0; j < ta.cols(); ++j) s += ta.at(i, j);
      n.value.values[i] = s;
    }
    return push(std::move(n));
  }

  // Max over rows per column; ties keep the first row (deterministic).
  Var col_max(Var a) {
    const auto& ta = val(a);
    if (ta.rows() == 0) throw DimensionError("col_max of empty tensor");
    Node n = unary(Op::ColMax, a, Tensor<Real>(1, ta.cols()));
    n.arg.resize(ta.cols(), 0);
    for (std::size_t j = 0; j < ta.cols(); ++j) {
      Real best = ta.at(0, j);
      std::uint32_t bi = 0;
      for (std::size_t i = 1; i < ta.rows(); ++i)
        if (ta.at(i, j) > best) {
          best = ta.at(i, j);
          bi = static_cast<std::uint32_t>(i);
        }
      n.value.values[j] = best;
      n.arg[j] = bi;
    }
    return push(std::move(n));
  }

  // d(loss)/d(param) for every registered parameter; zeros off the path.
  // Per-node gradients stay available through input_grad until the next
  // backward call.
  Gradients<Real> backward(Var loss) {
    const auto& lt = val(loss);
    if (lt.size() != 1)
      throw ContractError("backward: loss must be scalar, got " +
                          shape_str(lt.shape));
    grads_.assign(nodes_.size(), {});
    grads_[loss.idx] = {Real(1)};

    Gradients<Real> out;
    for (const auto& name : params_.names())
      out.add(name, Tensor<Real>(params_.at(name).shape));

    for (std::size_t k = nodes_.size(); k-- > 0;) {
      if (grads_[k].empty()) continue;
      step_back(k, out);
    }
    return out;
  }

  // Gradient buffer of any node after backward (empty if off the loss path).
  Tensor<Real> input_grad(Var v) const {
    Tensor<Real> g(nodes_[v.idx].value.shape);
    if (v.idx < grads_.size() && !grads_[v.idx].empty()) g.values = grads_[v.idx];
    return g;
  }

  // Structural audit used by the training loop: true iff some Sub node
  // reachable from `loss` compares canonical-flavored coordinates against
  // ground-truth targets. Flavor flows from explicit tags through untagged
  // nodes; Barrier stops it.
  bool compares_canonical_to_target(Var loss) const {
    constexpr std::uint8_t kCanon = 1, kTarget = 2;
    std::vector<bool> reach(nodes_.size(), false);
    std::vector<std::uint32_t> stack = {loss.idx};
    while (!stack.empty()) {
      std::uint32_t i = stack.back();
      stack.pop_back();
      if (reach[i]) continue;
      reach[i] = true;
      const Node& n = nodes_[i];
      if (n.a != kNone) stack.push_back(n.a);
      if (n.b != kNone) stack.push_back(n.b);
    }
    std::vector<std::uint8_t> flavor(nodes_.size(), 0);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (!reach[i]) continue;
      const Node& n = nodes_[i];
      switch (n.tag) {
        case Tag::Canonical: flavor[i] = kCanon; break;
        case Tag::Target: flavor[i] = kTarget; break;
        case Tag::Barrier: flavor[i] = 0; break;
        case Tag::Inherit:
          if (n.a != kNone) flavor[i] |= flavor[n.a];
          if (n.b != kNone) flavor[i] |= flavor[n.b];
          break;
      }
      if (n.op == Op::Sub && n.tag == Tag::Inherit) {
        std::uint8_t both = flavor[n.a] | flavor[n.b];
        if ((both & kCanon) && (both & kTarget)) return true;
      }
    }
    return false;
  }

 private:
  static constexpr std::uint32_t kNone = 0xffffffffu;

  struct Node {
    Op op = Op::Input;
    std::uint32_t a = kNone, b = kNone;
    Tensor<Real> value;
    Real c0 = 0, c1 = 0;
    std::uint32_t i0 = 0, i1 = 0;
    std::vector<std::uint32_t> arg;  // ColMax row indices
    std::int32_t param_index = -1;
    Tag tag = Tag::Inherit;
  };

  using EMat =
      Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using EMap = Eigen::Map<EMat>;
  using ECMap = Eigen::Map<const EMat>;

  static ECMap map(const Tensor<Real>& t) {
    return ECMap(t.values.data(), static_cast<Eigen::Index>(t.rows()),
                 static_cast<Eigen::Index>(t.cols()));
  }
  static EMap cmap(Real* p, std::size_t r, std::size_t c) {
    return EMap(p, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  }

  static Real softplus_val(Real x) {
    return std::log1p(std::exp(-std::abs(x))) + (x > Real(0) ? x : Real(0));
  }
  static Real sigmoid_val(Real x) {
    if (x >= Real(0)) return Real(1) / (Real(1) + std::exp(-x));
    Real e = std::exp(x);
    return e / (Real(1) + e);
  }

  const Tensor<Real>& val(Var v) const { return nodes_[v.idx].value; }

  void require_same(Var a, Var b, const char* what) const {
    if (!val(a).same_shape(val(b)))
      throw DimensionError(std::string(what) + ": " + shape_str(val(a).shape) +
                           " vs " + shape_str(val(b).shape));
  }

  Node unary(Op op, Var a, Tensor<Real> value) {
    Node n;
    n.op = op;
    n.a = a.idx;
    n.value = std::move(value);
    return n;
  }

  Node binary(Op op, Var a, Var b, Tensor<Real> value) {
    Node n = unary(op, a, std::move(value));
    n.b = b.idx;
    return n;
  }

  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  std::vector<Real>& gbuf(std::uint32_t i) {
    if (grads_[i].empty()) grads_[i].assign(nodes_[i].value.size(), Real(0));
    return grads_[i];
  }

  void step_back(std::size_t k, Gradients<Real>& out) {
    Node& n = nodes_[k];
    const std::vector<Real>& g = grads_[k];
    switch (n.op) {
      case Op::Input:
        break;
      case Op::Param: {
        auto& acc = out.at(params_.names()[static_cast<std::size_t>(
            n.param_index)]);
        for (std::size_t i = 0; i < g.size(); ++i) acc.values[i] += g[i];
        break;
      }
      case Op::Add: {
        auto& ga = gbuf(n.a);
        auto& gb = gbuf(n.b);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i];
          gb[i] += g[i];
        }
        break;
      }
      case Op::AddRow: {
        auto& ga = gbuf(n.a);
        auto& gr = gbuf(n.b);
        std::size_t cols = n.value.cols();
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i];
          gr[i % cols] += g[i];
        }
        break;
      }
      case Op::Sub: {
        auto& ga = gbuf(n.a);
        auto& gb = gbuf(n.b);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i];
          gb[i] -= g[i];
        }
        break;
      }
      case Op::Mul: {
        const auto& va = nodes_[n.a].value.values;
        const auto& vb = nodes_[n.b].value.values;
        auto& ga = gbuf(n.a);
        auto& gb = gbuf(n.b);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i] * vb[i];
          gb[i] += g[i] * va[i];
        }
        break;
      }
      case Op::Scale: {
        auto& ga = gbuf(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.c0;
        break;
      }
      case Op::AddConst:
      case Op::Neg: {
        auto& ga = gbuf(n.a);
        Real sgn = n.op == Op::Neg ? Real(-1) : Real(1);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += sgn * g[i];
        break;
      }
      case Op::MatMul: {
        const auto& ta = nodes_[n.a].value;
        const auto& tb = nodes_[n.b].value;
        auto& ga = gbuf(n.a);
        auto& gb = gbuf(n.b);
        ECMap gm(g.data(), static_cast<Eigen::Index>(n.value.rows()),
                 static_cast<Eigen::Index>(n.value.cols()));
        cmap(ga.data(), ta.rows(), ta.cols()).noalias() +=
            gm * map(tb).transpose();
        cmap(gb.data(), tb.rows(), tb.cols()).noalias() +=
            map(ta).transpose() * gm;
        break;
      }
      case Op::Exp: {
        auto& ga = gbuf(n.a);
        for (std::size_t i = 0; i < g.size(); ++i)
          ga[i] += g[i] * n.value.values[i];
        break;
      }
      case Op::Tanh: {
        auto& ga = gbuf(n.a);
        for (std::size_t i = 0; i < g.size(); ++i)
          ga[i] += g[i] * (Real(1) - n.value.values[i] * n.value.values[i]);
        break;
      }
      case Op::Softplus: {
        const auto& va = nodes_[n.a].value.values;
        auto& ga = gbuf(n.a);
        for (std::size_t i = 0; i < g.size(); ++i)
          ga[i] += g[i] * sigmoid_val(va[i]);
        break;
      }
      case Op::Sigmoid: {
        auto& ga = gbuf(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) {
          Real s = n.value.values[i];
          ga[i] += g[i] * s * (Real(1) - s);
        }
        break;
      }
      case Op::Sqrt: {
        auto& ga = gbuf(n.a);
        for (std::size_t i = 0; i < g.size(); ++i)
          ga[i] += g[i] * Real(0.5) / n.value.values[i];
        break;
      }
      case Op::Abs: {
        const auto& va = nodes_[n.a].value.values;
        auto& ga = gbuf(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) {
          Real s = va[i] > Real(0) ? Real(1) : (va[i] < Real(0) ? Real(-1) : Real(0));
          ga[i] += g[i] * s;
        }
        break;
      }
      case Op::Clamp: {
        const auto& va = nodes_[n.a].value.values;
        auto& ga = gbuf(n.a);
        for (std::size_t i = 0; i < g.size(); ++i)
          if (va[i] > n.c0 && va[i] < n.c1) ga[i] += g[i];
        break;
      }
      case Op::ConcatRows: {
        auto& ga = gbuf(n.a);
        auto& gb = gbuf(n.b);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[ga.size() + i];
        break;
      }
      case Op::ConcatCols: {
        const auto& ta = nodes_[n.a].value;
        const auto& tb = nodes_[n.b].value;
        auto& ga = gbuf(n.a);
        auto& gb = gbuf(n.b);
        std::size_t cols = n.value.cols();
        for (std::size_t i = 0; i < ta.rows(); ++i) {
          for (std::size_t j = 0; j < ta.cols(); ++j)
            ga[i * ta.cols() + j] += g[i * cols + j];
          for (std::size_t j = 0; j < tb.cols(); ++j)
            gb[i * tb.cols() + j] += g[i * cols + ta.cols() + j];
        }
        break;
      }
      case Op::SliceCols: {
        const auto& ta = nodes_[n.a].value;
        auto& ga = gbuf(n.a);
        for (std::size_t i = 0; i < n.value.rows(); ++i)
          for (std::size_t j = 0; j < n.i1; ++j)
            ga[i * ta.cols() + n.i0 + j] += g[i * n.i1 + j];
        break;
      }
      case Op::RepeatRows: {
        auto& ga = gbuf(n.a);
        std::size_t cols = n.value.cols();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i % cols] += g[i];
        break;
      }
      case Op::SumAll: {
        auto& ga = gbuf(n.a);
        for (auto& x : ga) x += g[0];
        break;
      }
      case Op::MeanAll: {
        auto& ga = gbuf(n.a);
        Real w = g[0] / static_cast<Real>(ga.size());
        for (auto& x : ga) x += w;
        break;
      }
      case Op::RowSums: {
        const auto& ta = nodes_[n.a].value;
        auto& ga = gbuf(n.a);
        for (std::size_t i = 0; i < ta.rows(); ++i)
          for (std::size_t j = 0; j < ta.cols(); ++j)
            ga[i * ta.cols() + j] += g[i];
        break;
      }
      case Op::ColMax: {
        const auto& ta = nodes_[n.a].value;
        auto& ga = gbuf(n.a);
        for (std::size_t j = 0; j < ta.cols(); ++j)
          ga[n.arg[j] * ta.cols() + j] += g[j];
        break;
      }
    }
  }

  Parameters<Real>& params_;
  std::vector<Node> nodes_;
  std::vector<std::vector<Real>> grads_;
};

}  // namespace dynsurf

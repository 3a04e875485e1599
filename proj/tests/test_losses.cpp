// SPDX-License-Identifier: Apache-2.0
//
// Loss tests: the stable BCE, the point-norm correspondence loss, their
// inline scalar oracles, and the structural audit that forbids comparing
// canonical coordinates against deformed-space targets.
#include <doctest.h>

#include <cmath>
#include <vector>

#include "dynsurf/flow.hpp"
#include "dynsurf/gradcheck.hpp"
#include "dynsurf/losses.hpp"
#include "dynsurf/params.hpp"
#include "dynsurf/rng.hpp"
#include "dynsurf/tape.hpp"
#include "dynsurf/tensor.hpp"

using namespace dynsurf;

namespace {

// Scalar BCE oracle: clamp, then -y log(s) - (1-y) log(1-s) written in the
// softplus form the implementation must match to 1e-12.
double bce_oracle(const std::vector<double>& logits,
                  const std::vector<double>& labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    double x = std::min(30.0, std::max(-30.0, logits[i]));
    double y = labels[i];
    double sp_neg = std::log1p(std::exp(-std::abs(-x))) + std::max(-x, 0.0);
    double sp_pos = std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
    total += y * sp_neg + (1.0 - y) * sp_pos;
  }
  return total / static_cast<double>(logits.size());
}

double norm_oracle(const Tensor<double>& pred, const Tensor<double>& target,
                   int l) {
  double total = 0.0;
  for (std::size_t i = 0; i < pred.rows(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < pred.cols(); ++j) {
      double d = pred.at(i, j) - target.at(i, j);
      row += l == 1 ? std::abs(d) : d * d;
    }
    total += l == 1 ? row : std::sqrt(row + 1e-18);
  }
  return total / static_cast<double>(pred.rows());
}

void randomize(Parameters<double>& params, Rng& rng, double scale = 0.5) {
  for (const auto& name : params.names()) {
    auto& t = params.at(name);
    double bound = scale / std::sqrt(static_cast<double>(t.rows()));
    for (auto& v : t.values) v = rng.uniform(-bound, bound);
  }
}

}  // namespace

TEST_SUITE("bce") {
  TEST_CASE("zero logits on any labels give ln 2 [TRIVIAL]") {
    Parameters<double> params;
    Tape<double> t(params);
    Tensor<double> logits(4, 1);
    Tensor<double> labels = Tensor<double>::from_rows({{0}, {1}, {1}, {0}});
    Var loss = bce_with_logits(t, t.input(logits), labels);
    CHECK(t.value(loss).values[0] ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }

  TEST_CASE("saturated correct logits cost under 1e-9 [TRIVIAL]") {
    Parameters<double> params;
    Tape<double> t(params);
    Tensor<double> logits = Tensor<double>::from_rows({{100.0}, {-50.0}});
    Tensor<double> labels = Tensor<double>::from_rows({{1.0}, {0.0}});
    Var loss = bce_with_logits(t, t.input(logits), labels);
    CHECK(t.value(loss).values[0] < 1e-9);
    CHECK(t.value(loss).values[0] > 0.0);  // clamp keeps it finite, not zero
  }

  TEST_CASE("random logits match the scalar oracle to 1e-12 [DERIVED]") {
    Rng rng(21);
    std::vector<double> lv, yv;
    Tensor<double> logits(64, 1), labels(64, 1);
    for (std::size_t i = 0; i < 64; ++i) {
      logits.values[i] = rng.uniform(-40.0, 40.0);
      labels.values[i] = rng.uniform_index(2) == 0 ? 0.0 : 1.0;
      lv.push_back(logits.values[i]);
      yv.push_back(labels.values[i]);
    }
    Parameters<double> params;
    Tape<double> t(params);
    Var loss = bce_with_logits(t, t.input(logits), labels);
    CHECK(std::abs(t.value(loss).values[0] - bce_oracle(lv, yv)) < 1e-12);
  }

  TEST_CASE("non-binary labels and shape mismatches are rejected [TRIVIAL]") {
    Parameters<double> params;
    Tape<double> t(params);
    Tensor<double> logits(2, 1);
    CHECK_THROWS_AS(
        bce_with_logits(t, t.input(logits),
                        Tensor<double>::from_rows({{0.5}, {1.0}})),
        ContractError);
    CHECK_THROWS_AS(bce_with_logits(t, t.input(logits), Tensor<double>(3, 1)),
                    DimensionError);
  }

  TEST_CASE("gradient through the BCE matches FD [DERIVED]") {
    Parameters<double> params;
    params.add("x", Tensor<double>(5, 1));
    Rng rng(22);
    for (auto& v : params.at("x").values) v = rng.uniform(-2.0, 2.0);
    Tensor<double> labels(5, 1);
    for (auto& v : labels.values) v = rng.uniform_index(2) == 0 ? 0.0 : 1.0;

    auto eval = [&]() {
      Tape<double> t(params);
      return t.value(bce_with_logits(t, t.param("x"), labels)).values[0];
    };
    Tape<double> t(params);
    auto grads = t.backward(bce_with_logits(t, t.param("x"), labels));
    auto fd = finite_difference_param_grads<double>(params, eval, 1e-6);
    CHECK(max_rel_error(grads, fd) < 1e-4);
  }
}

TEST_SUITE("point_norm") {
  TEST_CASE("matching points cost (almost) nothing [TRIVIAL]") {
    Parameters<double> params;
    Tape<double> t(params);
    Tensor<double> p = Tensor<double>::from_rows({{0.1, -0.2, 0.3}});
    Var loss = point_norm_loss(t, t.input(p), p, 2);
    CHECK(t.value(loss).values[0] < 1e-8);
  }

  TEST_CASE("single pair offset (0.3,0,0), l=2, costs 0.3 [TRIVIAL]") {
    Parameters<double> params;
    Tape<double> t(params);
    Tensor<double> pred = Tensor<double>::from_rows({{0.5, 0.1, -0.2}});
    Tensor<double> target = Tensor<double>::from_rows({{0.2, 0.1, -0.2}});
    Var loss = point_norm_loss(t, t.input(pred), target, 2);
    CHECK(t.value(loss).values[0] == doctest::Approx(0.3).epsilon(1e-9));
  }

  TEST_CASE("l=1 sums absolute components [TRIVIAL]") {
    Parameters<double> params;
    Tape<double> t(params);
    Tensor<double> pred = Tensor<double>::from_rows({{1.0, 2.0, 3.0}});
    Tensor<double> target = Tensor<double>::from_rows({{0.5, 2.5, 3.0}});
    Var loss = point_norm_loss(t, t.input(pred), target, 1);
    CHECK(t.value(loss).values[0] == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("random batches match the loop oracle to 1e-12 [DERIVED]") {
    Rng rng(23);
    Tensor<double> pred(40, 3), target(40, 3);
    for (auto& v : pred.values) v = rng.uniform(-1.0, 1.0);
    for (auto& v : target.values) v = rng.uniform(-1.0, 1.0);
    for (int l : {1, 2}) {
      Parameters<double> params;
      Tape<double> t(params);
      Var loss = point_norm_loss(t, t.input(pred), target, l);
      CHECK(std::abs(t.value(loss).values[0] - norm_oracle(pred, target, l)) <
            1e-12);
    }
  }

  TEST_CASE("unsupported norm orders are rejected [TRIVIAL]") {
    Parameters<double> params;
    Tape<double> t(params);
    Tensor<double> p(2, 3);
    CHECK_THROWS_AS(point_norm_loss(t, t.input(p), p, 3), ConfigError);
    CHECK_THROWS_AS(point_norm_loss(t, t.input(p), p, 0), ConfigError);
  }

  TEST_CASE("gradient through the l2 norm matches FD [DERIVED]") {
    Parameters<double> params;
    params.add("pred", Tensor<double>(6, 3));
    Rng rng(24);
    for (auto& v : params.at("pred").values) v = rng.uniform(-1.0, 1.0);
    Tensor<double> target(6, 3);
    for (auto& v : target.values) v = rng.uniform(-1.0, 1.0);

    for (int l : {1, 2}) {
      auto eval = [&]() {
        Tape<double> t(params);
        return t.value(point_norm_loss(t, t.param("pred"), target, l))
            .values[0];
      };
      Tape<double> t(params);
      auto grads = t.backward(point_norm_loss(t, t.param("pred"), target, l));
      auto fd = finite_difference_param_grads<double>(params, eval, 1e-6);
      CHECK(max_rel_error(grads, fd) < 1e-4);
    }
  }
}

TEST_SUITE("loss_audit") {
  TEST_CASE("correspondence loss against targets passes the audit [TRIVIAL]") {
    Parameters<double> params;
    FlowOptions opts;
    opts.hidden = 8;
    auto flow = Homeomorphism<double>::with_patterns(
        {0, 1, 2}, 4, FlowMode::NVP, 30, params, opts);
    Rng rng(25);
    randomize(params, rng);
    Tensor<double> pts(5, 3), target(5, 3), ci(1, 4), cj(1, 4);
    for (auto& v : pts.values) v = rng.uniform(-0.5, 0.5);
    for (auto& v : target.values) v = rng.uniform(-0.5, 0.5);
    for (auto& v : ci.values) v = rng.uniform(-1.0, 1.0);
    for (auto& v : cj.values) v = rng.uniform(-1.0, 1.0);

    Tape<double> t(params);
    Var moved = flow.correspondence(t, t.input(pts), t.input(ci), t.input(cj));
    Var loss = point_norm_loss(t, moved, target, 2);
    CHECK(!t.compares_canonical_to_target(loss));
  }

  TEST_CASE("comparing canonical coordinates to targets is flagged [TRIVIAL]") {
    Parameters<double> params;
    FlowOptions opts;
    opts.hidden = 8;
    auto flow = Homeomorphism<double>::with_patterns(
        {0, 1, 2}, 4, FlowMode::NVP, 31, params, opts);
    Rng rng(26);
    randomize(params, rng);
    Tensor<double> pts(5, 3), target(5, 3), ci(1, 4);
    for (auto& v : pts.values) v = rng.uniform(-0.5, 0.5);
    for (auto& v : target.values) v = rng.uniform(-0.5, 0.5);
    for (auto& v : ci.values) v = rng.uniform(-1.0, 1.0);

    Tape<double> t(params);
    // a forgotten inverse: the canonical midpoint hits the target directly
    Var mid = flow.forward(t, t.input(pts), t.input(ci));
    t.tag(mid, Tag::Canonical);
    Var loss = point_norm_loss(t, mid, target, 2);
    CHECK(t.compares_canonical_to_target(loss));
  }
}

// SPDX-License-Identifier: Apache-2.0
//
// Canonical-shape tests: observation aggregation, geometry encoding, the
// occupancy decoder, and the commutation property that makes the whole
// factorization worth having. Markers as in test_numerics.cpp.
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <vector>

#include "dynsurf/flow.hpp"
#include "dynsurf/gradcheck.hpp"
#include "dynsurf/params.hpp"
#include "dynsurf/rng.hpp"
#include "dynsurf/shape.hpp"
#include "dynsurf/tape.hpp"
#include "dynsurf/tensor.hpp"

using namespace dynsurf;

namespace {

Tensor<double> random_cloud(std::size_t n, Rng& rng, double lo = -0.5,
                            double hi = 0.5) {
  Tensor<double> t(n, 3);
  for (auto& v : t.values) v = rng.uniform(lo, hi);
  return t;
}

Tensor<double> random_code(std::size_t d, Rng& rng) {
  Tensor<double> c(1, d);
  for (auto& v : c.values) v = rng.uniform(-1.0, 1.0);
  return c;
}

void randomize(Parameters<double>& params, Rng& rng, double scale = 0.5) {
  for (const auto& name : params.names()) {
    auto& t = params.at(name);
    double bound = scale / std::sqrt(static_cast<double>(t.rows()));
    for (auto& v : t.values) v = rng.uniform(-bound, bound);
  }
}

bool bit_identical(const Tensor<double>& a, const Tensor<double>& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.values[i] != b.values[i]) return false;
  return true;
}

double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  REQUIRE(a.same_shape(b));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.values[i] - b.values[i]));
  return m;
}

}  // namespace

TEST_SUITE("aggregation") {
  TEST_CASE("identity map: union is the plain concatenation [TRIVIAL]") {
    Parameters<double> params;
    auto flow = Homeomorphism<double>::init(3, 8, FlowMode::NVP, 0, params);
    Rng rng(1);
    auto a = random_cloud(10, rng);
    auto b = random_cloud(15, rng);
    auto c = random_code(8, rng);
    auto obs = aggregate_raw(flow, params, {a, b}, {c, c}, 1024, 0);
    REQUIRE(obs.rows() == 25);
    for (std::size_t i = 0; i < 10; ++i)
      for (std::size_t d = 0; d < 3; ++d)
        CHECK(obs.at(i, d) == a.at(i, d));
    for (std::size_t i = 0; i < 15; ++i)
      for (std::size_t d = 0; d < 3; ++d)
        CHECK(obs.at(10 + i, d) == b.at(i, d));
  }

  TEST_CASE("2 frames x 300 under m_max=1024: all 600 kept in order [TRIVIAL]") {
    auto picks = aggregation_plan({300, 300}, 1024, 7);
    REQUIRE(picks.size() == 600);
    for (std::size_t i = 0; i < 300; ++i) {
      CHECK(picks[i].frame == 0);
      CHECK(picks[i].row == i);
      CHECK(picks[300 + i].frame == 1);
      CHECK(picks[300 + i].row == i);
    }
  }

  TEST_CASE("5 frames x 300: exactly 1024 members of the union [DERIVED]") {
    Parameters<double> params;
    auto flow = Homeomorphism<double>::init(3, 8, FlowMode::NVP, 3, params);
    Rng rng(2);
    randomize(params, rng);
    std::vector<Tensor<double>> clouds;
    std::vector<Tensor<double>> codes;
    for (int f = 0; f < 5; ++f) {
      clouds.push_back(random_cloud(300, rng));
      codes.push_back(random_code(8, rng));
    }
    auto obs = aggregate_raw(flow, params, clouds, codes, 1024, 99);
    REQUIRE(obs.rows() == 1024);

    // membership: every row appears in the full unsubsampled mapped union
    std::set<std::array<double, 3>> full;
    for (int f = 0; f < 5; ++f) {
      auto mapped = flow.forward_raw(params, clouds[f], codes[f]);
      for (std::size_t i = 0; i < mapped.rows(); ++i)
        full.insert({mapped.at(i, 0), mapped.at(i, 1), mapped.at(i, 2)});
    }
    for (std::size_t i = 0; i < obs.rows(); ++i)
      CHECK(full.count({obs.at(i, 0), obs.at(i, 1), obs.at(i, 2)}) == 1);

    // same seed, same plan; different seed, different plan
    auto again = aggregate_raw(flow, params, clouds, codes, 1024, 99);
    CHECK(bit_identical(obs, again));
    auto other = aggregate_raw(flow, params, clouds, codes, 1024, 100);
    CHECK(!bit_identical(obs, other));
  }

  TEST_CASE("frame/code count mismatch is rejected [TRIVIAL]") {
    Parameters<double> params;
    auto flow = Homeomorphism<double>::init(3, 8, FlowMode::NVP, 0, params);
    Rng rng(3);
    auto cloud = random_cloud(10, rng);
    auto code = random_code(8, rng);
    CHECK_THROWS_AS(aggregate_raw(flow, params, {cloud, cloud}, {code}, 1024,
                                  0),
                    InputError);
  }

  TEST_CASE("taped aggregation matches raw [DERIVED]") {
    Parameters<double> params;
    FlowOptions opts;
    opts.hidden = 16;
    auto flow =
        Homeomorphism<double>::init(3, 8, FlowMode::NVP, 5, params, opts);
    Rng rng(4);
    randomize(params, rng);
    std::vector<Tensor<double>> clouds = {random_cloud(50, rng),
                                          random_cloud(60, rng),
                                          random_cloud(70, rng)};
    std::vector<Tensor<double>> codes = {random_code(8, rng),
                                         random_code(8, rng),
                                         random_code(8, rng)};
    auto raw = aggregate_raw(flow, params, clouds, codes, 100, 11);
    Tape<double> t(params);
    std::vector<Var> code_vars;
    for (const auto& c : codes) code_vars.push_back(t.input(c));
    Var taped = aggregate_taped(t, flow, clouds, code_vars, 100, 11);
    CHECK(max_abs_diff(t.value(taped), raw) < 1e-13);
  }
}

TEST_SUITE("geometry_code") {
  TEST_CASE("point permutation leaves g bit-identical [TRIVIAL]") {
    Parameters<double> params;
    CanonicalShape<double> shape(16, 32, 32);
    Rng rng(5);
    shape.init(params, rng);
    auto obs = random_cloud(80, rng);
    auto g = shape.geometry_code_raw(params, obs);
    CHECK(g.cols() == 16);
    Tensor<double> rev(obs.rows(), 3);
    for (std::size_t i = 0; i < obs.rows(); ++i)
      for (std::size_t d = 0; d < 3; ++d)
        rev.at(i, d) = obs.at(obs.rows() - 1 - i, d);
    CHECK(bit_identical(g, shape.geometry_code_raw(params, rev)));
  }

  TEST_CASE("distinct observations give distinct codes [DERIVED]") {
    Parameters<double> params;
    CanonicalShape<double> shape(16, 32, 32);
    Rng rng(6);
    shape.init(params, rng);
    auto a = shape.geometry_code_raw(params, random_cloud(40, rng));
    auto b = shape.geometry_code_raw(params, random_cloud(40, rng));
    CHECK(max_abs_diff(a, b) > 0.0);
  }

  TEST_CASE("empty observation is rejected [TRIVIAL]") {
    Parameters<double> params;
    CanonicalShape<double> shape(16, 32, 32);
    Rng rng(7);
    shape.init(params, rng);
    CHECK_THROWS_AS(shape.geometry_code_raw(params, Tensor<double>(0, 3)),
                    InputError);
  }
}

TEST_SUITE("occupancy") {
  TEST_CASE("zero psi answers 0.5 everywhere [TRIVIAL]") {
    Parameters<double> params;
    CanonicalShape<double> shape(8, 16, 16);
    Rng rng(8);
    shape.init(params, rng);
    // zero out the decoder; phi stays random so g is nontrivial
    for (const auto& name : params.names())
      if (name.rfind("psi/", 0) == 0)
        for (auto& v : params.at(name).values) v = 0.0;
    auto g = shape.geometry_code_raw(params, random_cloud(20, rng));
    auto probs = shape.occupancy_query_raw(params, random_cloud(50, rng), g);
    for (double v : probs.values) CHECK(v == 0.5);
  }

  TEST_CASE("identical queries answer identically [TRIVIAL]") {
    Parameters<double> params;
    CanonicalShape<double> shape(8, 16, 16);
    Rng rng(9);
    shape.init(params, rng);
    auto g = shape.geometry_code_raw(params, random_cloud(20, rng));
    auto q = random_cloud(10, rng);
    CHECK(bit_identical(shape.occupancy_query_raw(params, q, g),
                        shape.occupancy_query_raw(params, q, g)));
  }

  TEST_CASE("probability gradient wrt uvw matches FD [DERIVED]") {
    Parameters<double> params;
    CanonicalShape<double> shape(8, 16, 16);
    Rng rng(10);
    shape.init(params, rng);
    auto g = shape.geometry_code_raw(params, random_cloud(20, rng));
    auto uvw = random_cloud(1, rng);

    Tape<double> t(params);
    Var vin = t.input(uvw);
    Var prob = t.sigmoid(shape.occupancy_logits(t, vin, t.input(g)));
    t.backward(t.mean_all(prob));
    auto analytic = t.input_grad(vin);

    auto fd = finite_difference_grad<double>(
        [&](const Tensor<double>& x) {
          return shape.occupancy_query_raw(params, x, g).values[0];
        },
        uvw, 1e-5);
    for (std::size_t i = 0; i < 3; ++i) {
      double denom = std::max(
          {1e-6, std::abs(analytic.values[i]), std::abs(fd.values[i])});
      CHECK(std::abs(analytic.values[i] - fd.values[i]) / denom < 1e-4);
    }
  }

  TEST_CASE("identity flow: deformed field equals the canonical one [TRIVIAL]") {
    Parameters<double> params;
    auto flow = Homeomorphism<double>::init(3, 8, FlowMode::NVP, 11, params);
    CanonicalShape<double> shape(8, 16, 16);
    Rng rng(11);
    shape.init(params, rng);
    auto g = shape.geometry_code_raw(params, random_cloud(20, rng));
    auto q = random_cloud(30, rng);
    auto code = random_code(8, rng);
    CHECK(bit_identical(
        shape.deformed_occupancy_raw(params, flow, q, code, g),
        shape.occupancy_query_raw(params, q, g)));
  }

  TEST_CASE("different codes generally disagree [DERIVED]") {
    Parameters<double> params;
    FlowOptions opts;
    opts.hidden = 16;
    auto flow =
        Homeomorphism<double>::init(3, 8, FlowMode::NVP, 12, params, opts);
    CanonicalShape<double> shape(8, 16, 16);
    Rng rng(12);
    shape.init(params, rng);
    randomize(params, rng);
    auto g = shape.geometry_code_raw(params, random_cloud(20, rng));
    auto q = random_cloud(30, rng);
    auto o1 = shape.deformed_occupancy_raw(params, flow, q,
                                           random_code(8, rng), g);
    auto o2 = shape.deformed_occupancy_raw(params, flow, q,
                                           random_code(8, rng), g);
    CHECK(max_abs_diff(o1, o2) > 0.0);
  }

  TEST_CASE("occupancy commutes with correspondence to 1e-8 [DERIVED]") {
    Parameters<double> params;
    auto flow = Homeomorphism<double>::init(6, 16, FlowMode::NVP, 13, params);
    CanonicalShape<double> shape(16, 32, 32);
    Rng rng(13);
    shape.init(params, rng);
    randomize(params, rng);
    auto g = shape.geometry_code_raw(params, random_cloud(40, rng));
    auto p = random_cloud(1000, rng);
    auto ci = random_code(16, rng);
    auto cj = random_code(16, rng);
    auto moved = flow.correspondence_raw(params, p, ci, cj);
    auto oi = shape.deformed_occupancy_raw(params, flow, p, ci, g);
    auto oj = shape.deformed_occupancy_raw(params, flow, moved, cj, g);
    CHECK(max_abs_diff(oi, oj) < 1e-8);
  }

  TEST_CASE("parameter gradients through the full field match FD [DERIVED]") {
    Parameters<double> params;
    FlowOptions opts;
    opts.hidden = 8;
    auto flow = Homeomorphism<double>::with_patterns(
        {0, 1, 2}, 4, FlowMode::NVP, 14, params, opts);
    CanonicalShape<double> shape(4, 8, 8);
    Rng rng(14);
    shape.init(params, rng);
    randomize(params, rng);
    auto cloud = random_cloud(6, rng);
    auto code = random_code(4, rng);
    auto queries = random_cloud(4, rng);

    auto eval = [&]() {
      Tape<double> t(params);
      Var obs = flow.forward(t, t.input(cloud), t.input(code));
      Var g = shape.geometry_code(t, obs);
      Var uvw = flow.forward(t, t.input(queries), t.input(code));
      Var logits = shape.occupancy_logits(t, uvw, g);
      return t.value(t.mean_all(t.sigmoid(logits))).values[0];
    };
    Tape<double> t(params);
    Var obs = flow.forward(t, t.input(cloud), t.input(code));
    Var g = shape.geometry_code(t, obs);
    Var uvw = flow.forward(t, t.input(queries), t.input(code));
    Var logits = shape.occupancy_logits(t, uvw, g);
    auto grads = t.backward(t.mean_all(t.sigmoid(logits)));
    auto fd = finite_difference_param_grads<double>(params, eval, 1e-5);
    CHECK(max_rel_error(grads, fd) < 1e-4);
  }
}

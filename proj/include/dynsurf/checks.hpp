// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dynsurf/data.hpp"
#include "dynsurf/errors.hpp"
#include "dynsurf/gradcheck.hpp"
#include "dynsurf/model.hpp"
#include "dynsurf/rng.hpp"
#include "dynsurf/training.hpp"

namespace dynsurf {

// Runtime property suite behind the `check` verb: the structural guarantees
// (exact inversion, path-invariant correspondence, volume conservation,
// continuity, autodiff correctness) measured on live parameter values, with
// every tolerance configurable and a fault-injection hook for exercising the
// failure path.
struct CheckConfig {
  std::size_t invert_points = 10000;   // (point, code) pairs
  std::size_t cycle_points = 1000;     // (point, code-triple) cases
  std::size_t volume_samples = 1000000;
  std::size_t logdet_cases = 100;
  std::size_t continuity_paths = 4;
  std::size_t commute_points = 1000;
  std::size_t grad_draws = 3;          // random re-initializations
  double invert_tol = 1e-8;
  double cycle_tol = 1e-7;
  double volume_tol = 0.01;            // relative, cube volume = 1
  double logdet_tol = 1e-4;
  double continuity_factor = 1e4;      // coarse/fine displacement ratio bound
  double commute_tol = 1e-8;
  double grad_tol = 1e-4;
  std::uint64_t seed = 0;
  int skip_inverse_block = -1;  // >= 0: drop that block from H^-1 (fault test)

  void validate() const {
    if (invert_points == 0 || cycle_points == 0 || volume_samples == 0 ||
        logdet_cases == 0 || continuity_paths == 0 || commute_points == 0 ||
        grad_draws == 0)
      throw ConfigError("check sample counts must be positive");
    if (invert_tol <= 0 || cycle_tol <= 0 || volume_tol <= 0 ||
        logdet_tol <= 0 || continuity_factor <= 0 || commute_tol <= 0 ||
        grad_tol <= 0)
      throw ConfigError("check tolerances must be positive");
    if (skip_inverse_block < -1)
      throw ConfigError("skip_inverse_block must be -1 or a block index");
  }
};

struct CheckResult {
  std::string name;
  double measured = 0;
  double tolerance = 0;
  bool pass = false;
};

struct CheckReport {
  std::vector<CheckResult> results;

  bool all_pass() const {
    for (const auto& r : results)
      if (!r.pass) return false;
    return true;
  }
};

// Fan-in-scaled uniform noise into every registered tensor, including the
// zero-initialized conditioner outputs that otherwise pin the map to the
// identity. The scale keeps coupling-scale outputs out of tanh saturation,
// matching how the unit suite randomizes its stacks.
template <class Real>
void randomize_params(Parameters<Real>& params, Rng& rng, double scale = 0.5) {
  for (const auto& name : params.names()) {
    auto& t = params.at(name);
    double bound = scale / std::sqrt(static_cast<double>(t.rows()));
    for (auto& v : t.values) v = static_cast<Real>(rng.uniform(-bound, bound));
  }
}

namespace detail {

template <class Real>
Tensor<Real> check_points(Rng& rng, std::size_t n, double lo, double hi) {
  Tensor<Real> t(n, 3);
  for (auto& v : t.values) v = static_cast<Real>(rng.uniform(lo, hi));
  return t;
}

template <class Real>
Tensor<Real> check_code(Rng& rng, std::size_t d) {
  Tensor<Real> c(1, d);
  for (auto& v : c.values) v = static_cast<Real>(rng.uniform(-1.0, 1.0));
  return c;
}

template <class Real>
double linf_diff(const Tensor<Real>& a, const Tensor<Real>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.values[i]) -
                             static_cast<double>(b.values[i])));
  return m;
}

// The real inverse pass, minus the optionally skipped block. skip = -1 is
// exactly Homeomorphism::inverse_raw.
template <class Real>
Tensor<Real> inverse_with_skip(const Homeomorphism<Real>& flow,
                               const Parameters<Real>& params,
                               Tensor<Real> pts, const Tensor<Real>& code,
                               int skip) {
  for (std::size_t i = flow.block_count(); i-- > 0;)
    if (static_cast<int>(i) != skip)
      pts = flow.block_inverse_raw(i, params, pts, code);
  return pts;
}

template <class Real>
CheckResult invertibility_check(const Homeomorphism<Real>& flow,
                                const Parameters<Real>& params,
                                const CheckConfig& cfg, Rng& rng,
                                const std::string& name) {
  if (cfg.skip_inverse_block >= static_cast<int>(flow.block_count()))
    throw ConfigError("skip_inverse_block out of range: " +
                      std::to_string(cfg.skip_inverse_block));
  double measured = 0.0;
  std::size_t remaining = cfg.invert_points;
  while (remaining > 0) {
    std::size_t n = std::min<std::size_t>(100, remaining);
    remaining -= n;
    Tensor<Real> pts = check_points<Real>(rng, n, -2.0, 2.0);
    Tensor<Real> code = check_code<Real>(rng, flow.condition_dim());
    Tensor<Real> there = flow.forward_raw(params, pts, code);
    Tensor<Real> back = inverse_with_skip(flow, params, std::move(there),
                                          code, cfg.skip_inverse_block);
    measured = std::max(measured, linf_diff(back, pts));
  }
  return {name, measured, cfg.invert_tol, measured < cfg.invert_tol};
}

template <class Real>
CheckResult cycle_check(const Homeomorphism<Real>& flow,
                        const Parameters<Real>& params, const CheckConfig& cfg,
                        Rng& rng, const std::string& name) {
  double measured = 0.0;
  std::size_t remaining = cfg.cycle_points;
  while (remaining > 0) {
    std::size_t n = std::min<std::size_t>(100, remaining);
    remaining -= n;
    Tensor<Real> pts = check_points<Real>(rng, n, -2.0, 2.0);
    Tensor<Real> ci = check_code<Real>(rng, flow.condition_dim());
    Tensor<Real> cj = check_code<Real>(rng, flow.condition_dim());
    Tensor<Real> ck = check_code<Real>(rng, flow.condition_dim());
    Tensor<Real> two_hop = flow.correspondence_raw(
        params, flow.correspondence_raw(params, pts, ci, cj), cj, ck);
    Tensor<Real> direct = flow.correspondence_raw(params, pts, ci, ck);
    measured = std::max(measured, linf_diff(two_hop, direct));
  }
  return {name, measured, cfg.cycle_tol, measured < cfg.cycle_tol};
}

template <class Real>
CheckResult logdet_zero_check(const Homeomorphism<Real>& flow,
                              const Parameters<Real>& params,
                              const CheckConfig& /*cfg*/, Rng& rng,
                              const std::string& name) {
  double measured = 0.0;
  for (int draw = 0; draw < 10; ++draw) {
    Tensor<Real> pts = check_points<Real>(rng, 100, -2.0, 2.0);
    Tensor<Real> code = check_code<Real>(rng, flow.condition_dim());
    Tensor<Real> ld = flow.log_det_raw(params, pts, code);
    for (Real v : ld.values)
      measured = std::max(measured, std::abs(static_cast<double>(v)));
  }
  // Exact zero is the contract, so the tolerance is literal.
  return {name, measured, 0.0, measured == 0.0};
}

// Monte-Carlo volume of the image of the unit cube: bound the image with a
// padded box from a dense forward-mapped grid, then rejection-sample the box
// and test membership through the exact inverse.
template <class Real>
CheckResult volume_check(const Homeomorphism<Real>& flow,
                         const Parameters<Real>& params,
                         const CheckConfig& cfg, Rng& rng,
                         const std::string& name) {
  Tensor<Real> code = check_code<Real>(rng, flow.condition_dim());

  const std::size_t g = 17;
  Tensor<Real> grid(g * g * g, 3);
  for (std::size_t k = 0, row = 0; k < g; ++k)
    for (std::size_t j = 0; j < g; ++j)
      for (std::size_t i = 0; i < g; ++i, ++row) {
        grid.at(row, 0) = static_cast<Real>(i) / static_cast<Real>(g - 1);
        grid.at(row, 1) = static_cast<Real>(j) / static_cast<Real>(g - 1);
        grid.at(row, 2) = static_cast<Real>(k) / static_cast<Real>(g - 1);
      }
  Tensor<Real> image = flow.forward_raw(params, grid, code);
  std::array<double, 3> lo = {1e300, 1e300, 1e300};
  std::array<double, 3> hi = {-1e300, -1e300, -1e300};
  for (std::size_t r = 0; r < image.rows(); ++r)
    for (std::size_t d = 0; d < 3; ++d) {
      double v = static_cast<double>(image.at(r, d));
      lo[d] = std::min(lo[d], v);
      hi[d] = std::max(hi[d], v);
    }
  double box_volume = 1.0;
  for (std::size_t d = 0; d < 3; ++d) {
    double pad = std::max(0.05, 0.1 * (hi[d] - lo[d]));
    lo[d] -= pad;
    hi[d] += pad;
    box_volume *= hi[d] - lo[d];
  }

  std::size_t inside = 0, remaining = cfg.volume_samples;
  while (remaining > 0) {
    std::size_t n = std::min<std::size_t>(8192, remaining);
    remaining -= n;
    Tensor<Real> pts(n, 3);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t d = 0; d < 3; ++d)
        pts.at(r, d) = static_cast<Real>(rng.uniform(lo[d], hi[d]));
    Tensor<Real> pre = flow.inverse_raw(params, std::move(pts), code);
    for (std::size_t r = 0; r < n; ++r) {
      bool in = true;
      for (std::size_t d = 0; d < 3; ++d) {
        double v = static_cast<double>(pre.at(r, d));
        in = in && v >= 0.0 && v <= 1.0;
      }
      inside += in;
    }
  }
  double estimate = box_volume * static_cast<double>(inside) /
                    static_cast<double>(cfg.volume_samples);
  double measured = std::abs(estimate - 1.0);
  return {name, measured, cfg.volume_tol, measured < cfg.volume_tol};
}

template <class Real>
CheckResult logdet_fd_check(const Homeomorphism<Real>& flow,
                            const Parameters<Real>& params,
                            const CheckConfig& cfg, Rng& rng,
                            const std::string& name) {
  double measured = 0.0;
  const double h = 1e-5;
  for (std::size_t trial = 0; trial < cfg.logdet_cases; ++trial) {
    Tensor<Real> p = check_points<Real>(rng, 1, -2.0, 2.0);
    Tensor<Real> c = check_code<Real>(rng, flow.condition_dim());
    double jac[3][3];
    for (std::size_t col = 0; col < 3; ++col) {
      Tensor<Real> plus = p, minus = p;
      plus.at(0, col) += static_cast<Real>(h);
      minus.at(0, col) -= static_cast<Real>(h);
      Tensor<Real> fp = flow.forward_raw(params, plus, c);
      Tensor<Real> fm = flow.forward_raw(params, minus, c);
      for (std::size_t row = 0; row < 3; ++row)
        jac[row][col] = (static_cast<double>(fp.at(0, row)) -
                         static_cast<double>(fm.at(0, row))) /
                        (2 * h);
    }
    double det = jac[0][0] * (jac[1][1] * jac[2][2] - jac[1][2] * jac[2][1]) -
                 jac[0][1] * (jac[1][0] * jac[2][2] - jac[1][2] * jac[2][0]) +
                 jac[0][2] * (jac[1][0] * jac[2][1] - jac[1][1] * jac[2][0]);
    double numeric = std::log(std::abs(det));
    double analytic =
        static_cast<double>(flow.log_det_raw(params, p, c).values[0]);
    double rel = std::abs(analytic - numeric) /
                 std::max({1e-6, std::abs(analytic), std::abs(numeric)});
    measured = std::max(measured, rel);
  }
  return {name, measured, cfg.logdet_tol, measured < cfg.logdet_tol};
}

// Continuity along a code path c(alpha) = (1-alpha) c_i + alpha c_j: the
// largest displacement per 1e-3 step must shrink linearly when the step
// shrinks to 1e-5 (ratio bounded by continuity_factor), so the map cannot
// jump anywhere along the path.
template <class Real>
CheckResult continuity_check(const Homeomorphism<Real>& flow,
                             const Parameters<Real>& params,
                             const CheckConfig& cfg, Rng& rng,
                             const std::string& name) {
  double measured = 0.0;
  const double coarse = 1e-3, fine = 1e-5;
  for (std::size_t path = 0; path < cfg.continuity_paths; ++path) {
    Tensor<Real> pts = check_points<Real>(rng, 8, -1.0, 1.0);
    Tensor<Real> ci = check_code<Real>(rng, flow.condition_dim());
    Tensor<Real> cj = check_code<Real>(rng, flow.condition_dim());
    auto at = [&](double alpha) {
      Tensor<Real> c(1, flow.condition_dim());
      for (std::size_t d = 0; d < c.size(); ++d)
        c.values[d] = static_cast<Real>((1.0 - alpha) *
                          static_cast<double>(ci.values[d]) +
                      alpha * static_cast<double>(cj.values[d]));
      return flow.forward_raw(params, pts, c);
    };
    double worst_step = 0.0, worst_alpha = 0.0;
    Tensor<Real> prev = at(0.0);
    for (int s = 1; s <= 1000; ++s) {
      Tensor<Real> cur = at(coarse * s);
      double d = linf_diff(cur, prev);
      if (d > worst_step) {
        worst_step = d;
        worst_alpha = coarse * (s - 1);
      }
      prev = std::move(cur);
    }
    double fine_step =
        linf_diff(at(worst_alpha + fine), at(worst_alpha));
    double ratio = worst_step == 0.0
                       ? 0.0
                       : worst_step / std::max(fine_step, 1e-300);
    measured = std::max(measured, ratio);
  }
  return {name, measured, cfg.continuity_factor,
          measured < cfg.continuity_factor};
}

template <class Real>
CheckResult commutation_check(const Model<Real>& model, const CheckConfig& cfg,
                              Rng& rng, const std::string& name) {
  double measured = 0.0;
  std::size_t remaining = cfg.commute_points;
  while (remaining > 0) {
    std::size_t n = std::min<std::size_t>(100, remaining);
    remaining -= n;
    Tensor<Real> pts = check_points<Real>(rng, n, -1.0, 1.0);
    Tensor<Real> ci = check_code<Real>(rng, model.flow.condition_dim());
    Tensor<Real> cj = check_code<Real>(rng, model.flow.condition_dim());
    Tensor<Real> g = check_code<Real>(rng, model.shape.geometry_dim());
    Tensor<Real> occ_i = model.shape.deformed_occupancy_raw(
        model.params, model.flow, pts, ci, g);
    Tensor<Real> mapped =
        model.flow.correspondence_raw(model.params, pts, ci, cj);
    Tensor<Real> occ_j = model.shape.deformed_occupancy_raw(
        model.params, model.flow, mapped, cj, g);
    measured = std::max(measured, linf_diff(occ_i, occ_j));
  }
  return {name, measured, cfg.commute_tol, measured < cfg.commute_tol};
}

}  // namespace detail

// Autodiff vs central finite differences through the full training losses
// (reconstruction + correspondence) on a tiny complete model, re-randomized
// grad_draws times. Exercises every module's backward path at once.
inline CheckResult gradient_check(const CheckConfig& cfg) {
  double measured = 0.0;
  for (std::size_t draw = 0; draw < cfg.grad_draws; ++draw) {
    std::uint64_t seed = Rng::mix(cfg.seed, 0x96AD + draw);
    ModelConfig mc;
    mc.encoder = EncoderKind::ST;
    mc.mode = FlowMode::NVP;
    mc.patterns = {0, 1};
    mc.d_c = 4;
    mc.d_g = 4;
    mc.enc_width = 8;
    mc.cond_hidden = 8;
    mc.phi_width = 8;
    mc.psi_width = 8;
    mc.m_max = 32;
    mc.seed = seed;
    auto model = Model<double>::init(mc);
    Rng rng(Rng::mix(seed, 0x9A1));
    randomize_params(model.params, rng, 0.3);

    auto seq = generate_sequence(ShapeKind::TranslatingSphere, seed, 2, 12,
                                 100);
    TrainingData<double> data = TrainingData<double>::from(seq);
    TrainingConfig tc;
    tc.frames_per_iter = 2;
    tc.queries_per_frame = 8;
    tc.pairs_per_frame = 4;
    tc.agg_points = 16;
    tc.iters = 1;
    tc.seed = seed;
    IterationBatch batch = draw_batch(tc, seq.times.size(),
                                      seq.corr[0].rows(),
                                      seq.queries[0].rows(), 0);

    auto eval = [&]() {
      Tape<double> t(model.params);
      auto losses = build_losses(t, model, data, batch, tc);
      return t.value(losses.total).values[0];
    };
    Tape<double> t(model.params);
    auto losses = build_losses(t, model, data, batch, tc);
    Gradients<double> analytic = t.backward(losses.total);
    Gradients<double> numeric =
        finite_difference_param_grads<double>(model.params, eval, 1e-5);
    measured = std::max(measured, max_rel_error(analytic, numeric));
  }
  return {"gradients", measured, cfg.grad_tol, measured < cfg.grad_tol};
}

// Property suite on one model's live parameters. Mode-specific checks follow
// the stack: NICE stacks prove exact volume conservation, NVP stacks prove
// the analytic log-det. Names are stable identifiers for reports.
template <class Real>
CheckReport run_model_checks(const Model<Real>& model, const CheckConfig& cfg,
                             const std::string& prefix = "") {
  cfg.validate();
  Rng rng(Rng::mix(cfg.seed, 0xC4EC));
  CheckReport report;
  report.results.push_back(detail::invertibility_check(
      model.flow, model.params, cfg, rng, prefix + "invertibility"));
  report.results.push_back(detail::cycle_check(model.flow, model.params, cfg,
                                               rng, prefix + "cycle"));
  if (model.flow.mode() == FlowMode::NICE) {
    report.results.push_back(detail::logdet_zero_check(
        model.flow, model.params, cfg, rng, prefix + "logdet-zero"));
    report.results.push_back(detail::volume_check(model.flow, model.params,
                                                  cfg, rng,
                                                  prefix + "volume"));
  } else {
    report.results.push_back(detail::logdet_fd_check(
        model.flow, model.params, cfg, rng, prefix + "logdet-fd"));
  }
  report.results.push_back(detail::continuity_check(
      model.flow, model.params, cfg, rng, prefix + "continuity"));
  report.results.push_back(
      detail::commutation_check(model, cfg, rng, prefix + "commutation"));
  return report;
}

// No model given: run the suite on freshly randomized default-architecture
// NVP and NICE stacks, plus the autodiff check. This is what `check` does
// out of the box.
inline CheckReport run_default_checks(const CheckConfig& cfg) {
  cfg.validate();
  CheckReport report;
  for (FlowMode mode : {FlowMode::NVP, FlowMode::NICE}) {
    ModelConfig mc;
    mc.mode = mode;
    mc.seed = Rng::mix(cfg.seed, mode == FlowMode::NVP ? 0x11F : 0x11CE);
    auto model = Model<double>::init(mc);
    Rng rng(Rng::mix(mc.seed, 0xADD));
    randomize_params(model.params, rng);
    std::string prefix = std::string(flow_mode_name(mode)) + "/";
    CheckReport sub = run_model_checks(model, cfg, prefix);
    report.results.insert(report.results.end(), sub.results.begin(),
                          sub.results.end());
  }
  report.results.push_back(gradient_check(cfg));
  return report;
}

}  // namespace dynsurf

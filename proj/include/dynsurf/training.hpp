// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "dynsurf/adam.hpp"
#include "dynsurf/data.hpp"
#include "dynsurf/errors.hpp"
#include "dynsurf/losses.hpp"
#include "dynsurf/model.hpp"
#include "dynsurf/rng.hpp"
#include "dynsurf/tape.hpp"

namespace dynsurf {

struct TrainingConfig {
  double w_r = 1.0;  // reconstruction (occupancy BCE) weight
  double w_c = 1.0;  // correspondence weight; 0 drops that graph entirely
  int l_norm = 2;
  std::size_t frames_per_iter = 4;
  std::size_t queries_per_frame = 128;
  std::size_t pairs_per_frame = 32;
  std::size_t agg_points = 512;
  std::size_t iters = 2000;
  std::uint64_t seed = 0;
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<std::size_t> holdout;  // frames excluded from supervision
  double divergence_limit = 1e4;
  std::size_t log_every = 100;

  void validate() const {
    if (w_r < 0 || w_c < 0) throw ConfigError("loss weights must be >= 0");
    if (l_norm != 1 && l_norm != 2)
      throw ConfigError("correspondence norm must be l1 or l2");
    if (frames_per_iter == 0 || queries_per_frame == 0 ||
        pairs_per_frame == 0 || agg_points == 0)
      throw ConfigError("batch sizes must be positive");
    if (iters == 0) throw ConfigError("iters must be positive");
    if (lr <= 0) throw ConfigError("learning rate must be positive");
    if (divergence_limit <= 0)
      throw ConfigError("divergence limit must be positive");
    if (log_every == 0) throw ConfigError("log_every must be positive");
    for (std::size_t f : holdout)
      if (f == 0)
        throw ConfigError(
            "frame 0 anchors the correspondences and cannot be held out");
  }
};

struct LossEntry {
  std::size_t iter = 0;
  double total = 0, recon = 0, corr = 0;
};

struct LossReport {
  std::vector<LossEntry> history;
  const LossEntry& final_entry() const { return history.back(); }
};

// One iteration's supervision draw; a pure function of (config, sequence
// dims, iter), so tests can replay any step against the raw evaluation path.
struct IterationBatch {
  std::vector<std::size_t> frames;  // reconstruction frames
  std::vector<std::vector<std::size_t>> query_rows;  // per frame above
  std::vector<std::size_t> corr_frames;  // targets of frame-0 maps
  std::vector<std::vector<std::size_t>> corr_rows;   // per frame above
  std::uint64_t agg_seed = 0;
};

inline IterationBatch draw_batch(const TrainingConfig& cfg, std::size_t T,
                                 std::size_t N, std::size_t M,
                                 std::size_t iter) {
  std::set<std::size_t> held(cfg.holdout.begin(), cfg.holdout.end());
  for (std::size_t f : held)
    if (f >= T) throw ConfigError("holdout frame out of range");
  std::vector<std::size_t> supervised;
  for (std::size_t f = 0; f < T; ++f)
    if (!held.count(f)) supervised.push_back(f);

  Rng rng(Rng::mix(Rng::mix(cfg.seed, 0x17E4), iter));
  IterationBatch batch;
  batch.agg_seed = Rng::mix(Rng::mix(cfg.seed, 0xA66), iter);

  std::size_t fcount = std::min(cfg.frames_per_iter, supervised.size());
  for (std::size_t pick : rng.sample_indices(supervised.size(), fcount))
    batch.frames.push_back(supervised[pick]);
  for (std::size_t f = 0; f < batch.frames.size(); ++f)
    batch.query_rows.push_back(
        rng.sample_indices(M, std::min(cfg.queries_per_frame, M)));

  // correspondence targets: supervised frames other than the anchor
  std::vector<std::size_t> targets(supervised.begin() + 1, supervised.end());
  std::size_t ccount = std::min(cfg.frames_per_iter, targets.size());
  for (std::size_t pick : rng.sample_indices(targets.size(), ccount))
    batch.corr_frames.push_back(targets[pick]);
  for (std::size_t f = 0; f < batch.corr_frames.size(); ++f)
    batch.corr_rows.push_back(
        rng.sample_indices(N, std::min(cfg.pairs_per_frame, N)));
  return batch;
}

// Sequence payload converted to the training precision once, up front.
template <class Real>
struct TrainingData {
  std::vector<Tensor<Real>> clouds, queries, labels, corr;
  std::vector<Real> times, angles;

  static TrainingData from(const SyntheticSequence& seq) {
    auto cast = [](const std::vector<Tensor<double>>& src) {
      std::vector<Tensor<Real>> out;
      for (const auto& t : src) {
        Tensor<Real> r(t.rows(), t.cols());
        for (std::size_t i = 0; i < t.size(); ++i)
          r.values[i] = static_cast<Real>(t.values[i]);
        out.push_back(std::move(r));
      }
      return out;
    };
    TrainingData d;
    d.clouds = cast(seq.clouds);
    d.queries = cast(seq.queries);
    d.labels = cast(seq.labels);
    d.corr = cast(seq.corr);
    for (double t : seq.times) d.times.push_back(static_cast<Real>(t));
    for (double a : seq.angles) d.angles.push_back(static_cast<Real>(a));
    return d;
  }
};

template <class Real>
struct IterationLosses {
  Var total, recon, corr;
  bool has_corr = false;
};

namespace detail {

template <class Real>
Tensor<Real> gather_rows(const Tensor<Real>& src,
                         const std::vector<std::size_t>& rows) {
  Tensor<Real> out(rows.size(), src.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < src.cols(); ++c)
      out.at(i, c) = src.at(rows[i], c);
  return out;
}

}  // namespace detail

// Taped losses for one iteration. The reconstruction term compares the
// pulled-back canonical field against frame labels; the correspondence term
// compares frame-0 points mapped through canonical space against their
// analytic positions. Both are means over their draws.
template <class Real>
IterationLosses<Real> build_losses(Tape<Real>& tape, const Model<Real>& model,
                                   const TrainingData<Real>& data,
                                   const IterationBatch& batch,
                                   const TrainingConfig& cfg) {
  std::vector<Var> codes =
      model.encode_codes(tape, data.clouds, data.times, data.angles);
  Var obs = aggregate_taped(tape, model.flow, data.clouds, codes,
                            cfg.agg_points, batch.agg_seed);
  Var g = model.shape.geometry_code(tape, obs);

  IterationLosses<Real> out;
  Var recon;
  for (std::size_t f = 0; f < batch.frames.size(); ++f) {
    std::size_t frame = batch.frames[f];
    Tensor<Real> pts =
        detail::gather_rows(data.queries[frame], batch.query_rows[f]);
    Tensor<Real> labels =
        detail::gather_rows(data.labels[frame], batch.query_rows[f]);
    Var uvw = model.flow.forward(tape, tape.input(pts), codes[frame]);
    Var logits = model.shape.occupancy_logits(tape, uvw, g);
    Var term = bce_with_logits(tape, logits, labels);
    recon = f == 0 ? term : tape.add(recon, term);
  }
  if (batch.frames.empty()) throw InputError("no supervised frames to draw");
  out.recon =
      tape.scale(recon, Real(1) / static_cast<Real>(batch.frames.size()));

  out.has_corr = cfg.w_c > 0 && !batch.corr_frames.empty();
  if (out.has_corr) {
    Var corr;
    for (std::size_t f = 0; f < batch.corr_frames.size(); ++f) {
      std::size_t frame = batch.corr_frames[f];
      Tensor<Real> base =
          detail::gather_rows(data.corr[0], batch.corr_rows[f]);
      Tensor<Real> target =
          detail::gather_rows(data.corr[frame], batch.corr_rows[f]);
      Var pred = model.flow.correspondence(tape, tape.input(base), codes[0],
                                           codes[frame]);
      Var term = point_norm_loss(tape, pred, target, cfg.l_norm);
      corr = f == 0 ? term : tape.add(corr, term);
    }
    out.corr = tape.scale(
        corr, Real(1) / static_cast<Real>(batch.corr_frames.size()));
    out.total = tape.add(tape.scale(out.recon, static_cast<Real>(cfg.w_r)),
                         tape.scale(out.corr, static_cast<Real>(cfg.w_c)));
  } else {
    out.total = tape.scale(out.recon, static_cast<Real>(cfg.w_r));
  }
  return out;
}

// Full optimization loop. Mutates the model in place and reports the loss
// trajectory (iteration 0, every log_every-th, and the final iteration).
// Throws DivergenceError when the total loss explodes or turns non-finite,
// ContractError if the loss graph wires canonical coordinates straight into
// a deformed-frame comparison (audited once, on the first iteration).
template <class Real>
LossReport train(Model<Real>& model, const SyntheticSequence& seq,
                 const TrainingConfig& cfg) {
  cfg.validate();
  const std::size_t T = seq.times.size();
  if (cfg.holdout.size() + 1 >= T)
    throw ConfigError("holdout leaves no supervised frames");
  TrainingData<Real> data = TrainingData<Real>::from(seq);

  AdamConfig<Real> acfg;
  acfg.lr = static_cast<Real>(cfg.lr);
  acfg.beta1 = static_cast<Real>(cfg.beta1);
  acfg.beta2 = static_cast<Real>(cfg.beta2);
  acfg.eps = static_cast<Real>(cfg.eps);
  Adam<Real> opt(model.params, acfg);

  LossReport report;
  for (std::size_t iter = 0; iter < cfg.iters; ++iter) {
    IterationBatch batch = draw_batch(
        cfg, T, seq.corr[0].rows(), seq.queries[0].rows(), iter);
    Tape<Real> tape(model.params);
    IterationLosses<Real> losses =
        build_losses(tape, model, data, batch, cfg);

    if (iter == 0 && tape.compares_canonical_to_target(losses.total))
      throw ContractError(
          "loss graph compares canonical coordinates to frame targets");

    double total = static_cast<double>(tape.value(losses.total).values[0]);
    if (!std::isfinite(total) || total > cfg.divergence_limit) {
      std::string last = "none recorded";
      if (!report.history.empty()) {
        const LossEntry& e = report.history.back();
        last = "iter " + std::to_string(e.iter) + " recon " +
               std::to_string(e.recon) + " corr " + std::to_string(e.corr) +
               " total " + std::to_string(e.total);
      }
      throw DivergenceError("loss " + std::to_string(total) +
                            " at iteration " + std::to_string(iter) +
                            "; last finite losses: " + last);
    }

    if (iter % cfg.log_every == 0 || iter + 1 == cfg.iters) {
      LossEntry e;
      e.iter = iter;
      e.total = total;
      e.recon = static_cast<double>(tape.value(losses.recon).values[0]);
      e.corr = losses.has_corr
                   ? static_cast<double>(tape.value(losses.corr).values[0])
                   : 0.0;
      report.history.push_back(e);
    }

    Gradients<Real> grads = tape.backward(losses.total);
    opt.step(model.params, grads);
  }
  model.trained_iters += cfg.iters;
  return report;
}

}  // namespace dynsurf

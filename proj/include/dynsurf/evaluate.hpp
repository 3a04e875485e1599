// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "dynsurf/data.hpp"
#include "dynsurf/errors.hpp"
#include "dynsurf/meshing.hpp"
#include "dynsurf/metrics.hpp"
#include "dynsurf/model.hpp"
#include "dynsurf/rng.hpp"
#include "dynsurf/training.hpp"

namespace dynsurf {

struct EvalConfig {
  std::size_t iou_samples = 100000;    // volumetric draws per frame
  std::size_t chamfer_samples = 4096;  // surface draws per side per frame
  std::uint64_t seed = 0;
  MeshingConfig meshing;

  void validate() const {
    if (iou_samples == 0 || chamfer_samples == 0)
      throw ConfigError("evaluation sample counts must be positive");
    meshing.validate();
  }
};

struct FrameMetrics {
  double iou = 0, chamfer = 0, corr = 0;
};

struct EvalReport {
  std::vector<FrameMetrics> frames;
  double mean_iou = 0, mean_chamfer = 0, mean_corr = 0;
};

namespace detail {

inline void finish_means(EvalReport& r) {
  for (const auto& f : r.frames) {
    r.mean_iou += f.iou;
    r.mean_chamfer += f.chamfer;
    r.mean_corr += f.corr;
  }
  double n = static_cast<double>(r.frames.size());
  r.mean_iou /= n;
  r.mean_chamfer /= n;
  r.mean_corr /= n;
}

}  // namespace detail

// Volumetric, surface, and correspondence quality per frame:
//   - IoU of the thresholded predicted field against the analytic solid on
//     uniform volume samples,
//   - symmetric Chamfer distance between reconstructed-mesh samples and
//     clean analytic surface samples,
//   - mean L2 error of the frame-0 tracked points mapped to each frame.
// All sampling is seeded from cfg.seed, so reports are reproducible.
template <class Real>
EvalReport evaluate_model(const Model<Real>& model,
                          const SyntheticSequence& seq,
                          const EvalConfig& cfg) {
  cfg.validate();
  AnalyticShape shape = seq.shape();
  TrainingData<Real> data = TrainingData<Real>::from(seq);
  std::vector<Tensor<Real>> codes =
      model.encode_codes_raw(data.clouds, data.times, data.angles);
  Tensor<Real> g = model.geometry_raw(data.clouds, codes,
                                      Rng::mix(cfg.seed, 0xA66));
  ExtractResult meshes = extract_sequence(model, codes, g, cfg.meshing);

  Rng rng(Rng::mix(cfg.seed, 0xE7A1));
  const double bound = cfg.meshing.bound;
  const std::size_t chunk = cfg.meshing.chunk;

  EvalReport report;
  for (std::size_t f = 0; f < seq.times.size(); ++f) {
    double t = seq.times[f];
    FrameMetrics fm;

    std::vector<std::uint8_t> truth(cfg.iou_samples), pred(cfg.iou_samples);
    for (std::size_t start = 0; start < cfg.iou_samples; start += chunk) {
      std::size_t count = std::min(chunk, cfg.iou_samples - start);
      Tensor<Real> pts(count, 3);
      for (std::size_t i = 0; i < count; ++i) {
        std::array<double, 3> p = {rng.uniform(-bound, bound),
                                   rng.uniform(-bound, bound),
                                   rng.uniform(-bound, bound)};
        truth[start + i] = shape.occupied(p, t);
        for (std::size_t d = 0; d < 3; ++d)
          pts.at(i, d) = static_cast<Real>(p[d]);
      }
      Tensor<Real> occ = model.shape.deformed_occupancy_raw(
          model.params, model.flow, pts, codes[f], g);
      for (std::size_t i = 0; i < count; ++i)
        pred[start + i] = occ.values[i] > Real(0.5);
    }
    fm.iou = iou(pred, truth);

    TriangleMesh frame_mesh;
    frame_mesh.vertices = meshes.frame_vertices[f];
    frame_mesh.faces = meshes.faces;
    Tensor<double> ours =
        sample_mesh_surface(frame_mesh, cfg.chamfer_samples, rng);
    Tensor<double> theirs = shape.surface_sample(rng, t, cfg.chamfer_samples);
    fm.chamfer = chamfer(ours, theirs);

    Tensor<Real> base(seq.corr[0].rows(), 3);
    for (std::size_t i = 0; i < base.size(); ++i)
      base.values[i] = static_cast<Real>(seq.corr[0].values[i]);
    Tensor<Real> mapped = model.flow.correspondence_raw(model.params, base,
                                                        codes[0], codes[f]);
    fm.corr = correspondence_error(detail::to_double(mapped), seq.corr[f]);

    report.frames.push_back(fm);
  }
  detail::finish_means(report);
  return report;
}

// Ground truth scored against itself through the same metric code paths:
// perfect numbers out of this function mean the harness, not the model, is
// in order. IoU uses one shared label vector, Chamfer one shared sample
// set, correspondences the stored targets.
inline EvalReport evaluate_oracle(const SyntheticSequence& seq,
                                  const EvalConfig& cfg) {
  cfg.validate();
  AnalyticShape shape = seq.shape();
  Rng rng(Rng::mix(cfg.seed, 0xE7A1));
  const double bound = cfg.meshing.bound;

  EvalReport report;
  for (std::size_t f = 0; f < seq.times.size(); ++f) {
    double t = seq.times[f];
    FrameMetrics fm;
    std::vector<std::uint8_t> labels(cfg.iou_samples);
    for (auto& v : labels)
      v = shape.occupied({rng.uniform(-bound, bound),
                          rng.uniform(-bound, bound),
                          rng.uniform(-bound, bound)},
                         t);
    fm.iou = iou(labels, labels);
    Tensor<double> surf = shape.surface_sample(rng, t, cfg.chamfer_samples);
    fm.chamfer = chamfer(surf, surf);
    fm.corr = correspondence_error(seq.corr[f], seq.corr[f]);
    report.frames.push_back(fm);
  }
  detail::finish_means(report);
  return report;
}

}  // namespace dynsurf

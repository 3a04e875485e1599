// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dynsurf/encoders.hpp"
#include "dynsurf/errors.hpp"
#include "dynsurf/flow.hpp"
#include "dynsurf/mlp.hpp"
#include "dynsurf/params.hpp"
#include "dynsurf/rng.hpp"
#include "dynsurf/tape.hpp"
#include "dynsurf/tensor.hpp"

namespace dynsurf {

// One selected observation point: which frame's cloud and which row in it.
struct AggregationPick {
  std::uint32_t frame = 0;
  std::uint32_t row = 0;
};

// Which observation points make it into the canonical union. Selecting
// indices before mapping is equivalent to mapping everything and then
// subsampling (the map is pointwise), but skips the wasted work. Order is
// ascending in (frame, row), i.e. frame order when nothing is dropped.
inline std::vector<AggregationPick> aggregation_plan(
    const std::vector<std::size_t>& frame_sizes, std::size_t m_max,
    std::uint64_t seed) {
  std::size_t total = 0;
  for (std::size_t n : frame_sizes) total += n;
  std::vector<std::size_t> flat;
  if (total > m_max) {
    Rng rng(Rng::mix(seed, 0xA66u));
    flat = rng.sample_indices(total, m_max);
  } else {
    flat.resize(total);
    for (std::size_t i = 0; i < total; ++i) flat[i] = i;
  }
  std::vector<AggregationPick> picks;
  picks.reserve(flat.size());
  std::size_t frame = 0, base = 0;
  for (std::size_t idx : flat) {
    while (idx >= base + frame_sizes[frame]) base += frame_sizes[frame++];
    picks.push_back({static_cast<std::uint32_t>(frame),
                     static_cast<std::uint32_t>(idx - base)});
  }
  return picks;
}

// Canonical occupancy model: PointNet phi over the canonical observation
// gives the geometry code g; MLP psi decodes (uvw | g) into an occupancy
// logit. Probabilities appear only at the query/loss boundary.
template <class Real>
class CanonicalShape {
 public:
  CanonicalShape() = default;
  CanonicalShape(std::size_t d_g, std::size_t phi_width = 128,
                 std::size_t psi_width = 256)
      : d_g_(d_g),
        phi_(d_g, phi_width, "geom"),
        psi_("psi", {3 + d_g, psi_width, psi_width, psi_width, psi_width, 1}) {
  }

  void init(Parameters<Real>& params, Rng& rng) const {
    phi_.init(params, rng);
    psi_.init(params, rng);
  }

  std::size_t geometry_dim() const { return d_g_; }

  Tensor<Real> geometry_code_raw(const Parameters<Real>& p,
                                 const Tensor<Real>& obs) const {
    if (obs.rows() == 0) throw InputError("empty canonical observation");
    return phi_.encode_raw(p, obs);
  }

  Tensor<Real> occupancy_logits_raw(const Parameters<Real>& p,
                                    const Tensor<Real>& uvw,
                                    const Tensor<Real>& g) const {
    return psi_.forward_raw(p, with_code(uvw, g));
  }

  Tensor<Real> occupancy_query_raw(const Parameters<Real>& p,
                                   const Tensor<Real>& uvw,
                                   const Tensor<Real>& g) const {
    Tensor<Real> out = occupancy_logits_raw(p, uvw, g);
    for (auto& v : out.values) v = sigmoid_stable(v);
    return out;
  }

  // o(p; c) = sigmoid(psi(H(p; c); g)): the deformed-frame field is always
  // the canonical field pulled back through the map.
  Tensor<Real> deformed_occupancy_raw(const Parameters<Real>& p,
                                      const Homeomorphism<Real>& flow,
                                      const Tensor<Real>& pts,
                                      const Tensor<Real>& code,
                                      const Tensor<Real>& g) const {
    return occupancy_query_raw(p, flow.forward_raw(p, pts, code), g);
  }

  Var geometry_code(Tape<Real>& t, Var obs) const {
    Var feats_in = obs;
    Var code = phi_taped(t, feats_in);
    t.tag(code, Tag::Barrier);
    return code;
  }

  Var occupancy_logits(Tape<Real>& t, Var uvw, Var g) const {
    std::size_t K = t.value(uvw).rows();
    Var in = t.concat_cols(uvw, t.repeat_rows(g, K));
    Var logits = psi_.forward(t, in);
    t.tag(logits, Tag::Barrier);
    return logits;
  }

 private:
  Var phi_taped(Tape<Real>& t, Var obs) const {
    // PfEncoder::encode takes a raw tensor; the observation here is already
    // a tape node (it came through the flow), so rebuild the same graph.
    return phi_.encode_var(t, obs);
  }

  Tensor<Real> with_code(const Tensor<Real>& uvw, const Tensor<Real>& g) const {
    if (uvw.cols() != 3)
      throw DimensionError("canonical points must be [K,3], got " +
                           shape_str(uvw.shape));
    if (g.rows() != 1 || g.cols() != d_g_)
      throw DimensionError("geometry code must be [1," + std::to_string(d_g_) +
                           "], got " + shape_str(g.shape));
    Tensor<Real> in(uvw.rows(), 3 + d_g_);
    for (std::size_t i = 0; i < uvw.rows(); ++i) {
      for (std::size_t j = 0; j < 3; ++j) in.at(i, j) = uvw.at(i, j);
      for (std::size_t j = 0; j < d_g_; ++j)
        in.at(i, 3 + j) = g.values[j];
    }
    return in;
  }

  std::size_t d_g_ = 128;
  PfEncoder<Real> phi_;
  Mlp<Real> psi_;
};

// Union of all frames' clouds mapped into the canonical space with their own
// codes, subsampled to m_max by the shared plan.
template <class Real>
Tensor<Real> aggregate_raw(const Homeomorphism<Real>& flow,
                           const Parameters<Real>& p,
                           const std::vector<Tensor<Real>>& clouds,
                           const std::vector<Tensor<Real>>& codes,
                           std::size_t m_max, std::uint64_t seed) {
  if (clouds.size() != codes.size())
    throw InputError("aggregate: " + std::to_string(clouds.size()) +
                     " frames vs " + std::to_string(codes.size()) + " codes");
  std::vector<std::size_t> sizes;
  for (const auto& c : clouds) sizes.push_back(c.rows());
  auto picks = aggregation_plan(sizes, m_max, seed);

  Tensor<Real> out(picks.size(), 3);
  std::size_t row = 0;
  std::size_t i = 0;
  while (i < picks.size()) {
    std::size_t j = i;
    while (j < picks.size() && picks[j].frame == picks[i].frame) ++j;
    Tensor<Real> gathered(j - i, 3);
    for (std::size_t k = i; k < j; ++k)
      for (std::size_t d = 0; d < 3; ++d)
        gathered.at(k - i, d) = clouds[picks[i].frame].at(picks[k].row, d);
    Tensor<Real> mapped =
        flow.forward_raw(p, gathered, codes[picks[i].frame]);
    for (std::size_t k = 0; k < mapped.rows(); ++k, ++row)
      for (std::size_t d = 0; d < 3; ++d) out.at(row, d) = mapped.at(k, d);
    i = j;
  }
  return out;
}

// Taped variant for training: same plan, same order, gradients flow into the
// conditioners and whatever produced the codes.
template <class Real>
Var aggregate_taped(Tape<Real>& t, const Homeomorphism<Real>& flow,
                    const std::vector<Tensor<Real>>& clouds,
                    const std::vector<Var>& codes, std::size_t m_max,
                    std::uint64_t seed) {
  if (clouds.size() != codes.size())
    throw InputError("aggregate: frame/code count mismatch");
  std::vector<std::size_t> sizes;
  for (const auto& c : clouds) sizes.push_back(c.rows());
  auto picks = aggregation_plan(sizes, m_max, seed);

  Var out;
  bool first = true;
  std::size_t i = 0;
  while (i < picks.size()) {
    std::size_t j = i;
    while (j < picks.size() && picks[j].frame == picks[i].frame) ++j;
    Tensor<Real> gathered(j - i, 3);
    for (std::size_t k = i; k < j; ++k)
      for (std::size_t d = 0; d < 3; ++d)
        gathered.at(k - i, d) = clouds[picks[i].frame].at(picks[k].row, d);
    Var mapped = flow.forward(t, t.input(gathered), codes[picks[i].frame]);
    out = first ? mapped : t.concat_rows(out, mapped);
    first = false;
    i = j;
  }
  if (first) throw InputError("aggregate: empty observation");
  t.tag(out, Tag::Canonical);
  return out;
}

}  // namespace dynsurf

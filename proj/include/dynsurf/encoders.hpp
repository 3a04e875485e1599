// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dynsurf/errors.hpp"
#include "dynsurf/mlp.hpp"
#include "dynsurf/params.hpp"
#include "dynsurf/rng.hpp"
#include "dynsurf/tape.hpp"
#include "dynsurf/tensor.hpp"

namespace dynsurf {

enum class EncoderKind : std::uint8_t { PF, ST, SET };

inline const char* encoder_kind_name(EncoderKind k) {
  switch (k) {
    case EncoderKind::PF: return "pf";
    case EncoderKind::ST: return "st";
    default: return "set";
  }
}

inline EncoderKind parse_encoder_kind(const std::string& name) {
  if (name == "pf") return EncoderKind::PF;
  if (name == "st") return EncoderKind::ST;
  if (name == "set") return EncoderKind::SET;
  throw ConfigError("unknown encoder '" + name + "' (pf, st, set)");
}

// Per-frame PointNet: shared point MLP, max-pool over points, linear head.
// The pool makes the code exactly permutation- and duplication-invariant.
template <class Real>
class PfEncoder {
 public:
  PfEncoder() = default;
  PfEncoder(std::size_t d_c, std::size_t width = 128,
            std::string prefix = "enc")
      : trunk_(prefix + "/trunk", {3, width, width}, false, true),
        head_(prefix + "/head", {width, d_c}) {}

  void init(Parameters<Real>& params, Rng& rng) const {
    trunk_.init(params, rng);
    head_.init(params, rng);
  }

  Tensor<Real> encode_raw(const Parameters<Real>& p,
                          const Tensor<Real>& pts) const {
    require_frame(pts);
    Tensor<Real> feats = trunk_.forward_raw(p, pts);
    return head_.forward_raw(p, col_max_raw(feats));
  }

  Var encode(Tape<Real>& t, const Tensor<Real>& pts) const {
    require_frame(pts);
    return encode_var(t, t.input(pts));
  }

  // Same network over an existing tape node (e.g. mapped observations).
  Var encode_var(Tape<Real>& t, Var pts) const {
    Var feats = trunk_.forward(t, pts);
    return head_.forward(t, t.col_max(feats));
  }

  static void require_frame(const Tensor<Real>& pts) {
    if (pts.rows() == 0 || pts.cols() != 3)
      throw InputError("point cloud frame must be [N>=1,3], got " +
                       shape_str(pts.shape));
  }

  static Tensor<Real> col_max_raw(const Tensor<Real>& m) {
    Tensor<Real> out(1, m.cols());
    for (std::size_t j = 0; j < m.cols(); ++j) {
      Real best = m.at(0, j);
      for (std::size_t i = 1; i < m.rows(); ++i)
        if (m.at(i, j) > best) best = m.at(i, j);
      out.values[j] = best;
    }
    return out;
  }

 private:
  Mlp<Real> trunk_, head_;
};

// Spatio-temporal PointNet: point features over (x,y,z,t), pooled spatially
// per frame, a second temporal pool gives one context vector, and each frame
// head sees (frame feature | context). Codes therefore depend on the whole
// sequence, not just their own frame.
template <class Real>
class StEncoder {
 public:
  StEncoder() = default;
  StEncoder(std::size_t d_c, std::size_t width = 128,
            std::string prefix = "enc")
      : trunk_(prefix + "/trunk", {4, width, width}, false, true),
        head_(prefix + "/head", {2 * width, d_c}) {}

  void init(Parameters<Real>& params, Rng& rng) const {
    trunk_.init(params, rng);
    head_.init(params, rng);
  }

  // Frames must agree in N; timestamps are taken as given (normalization to
  // [0,1] happens where sequences are assembled).
  std::vector<Tensor<Real>> encode_raw(const Parameters<Real>& p,
                                       const std::vector<Tensor<Real>>& clouds,
                                       const std::vector<Real>& times) const {
    require_sequence(clouds, times);
    std::vector<Tensor<Real>> pooled;
    for (std::size_t f = 0; f < clouds.size(); ++f)
      pooled.push_back(PfEncoder<Real>::col_max_raw(
          trunk_.forward_raw(p, with_time(clouds[f], times[f]))));
    Tensor<Real> stacked(pooled.size(), pooled[0].cols());
    for (std::size_t f = 0; f < pooled.size(); ++f)
      for (std::size_t j = 0; j < pooled[f].cols(); ++j)
        stacked.at(f, j) = pooled[f].values[j];
    Tensor<Real> ctx = PfEncoder<Real>::col_max_raw(stacked);
    std::vector<Tensor<Real>> codes;
    for (auto& pf : pooled) {
      Tensor<Real> joint(1, pf.cols() + ctx.cols());
      for (std::size_t j = 0; j < pf.cols(); ++j) joint.values[j] = pf.values[j];
      for (std::size_t j = 0; j < ctx.cols(); ++j)
        joint.values[pf.cols() + j] = ctx.values[j];
      codes.push_back(head_.forward_raw(p, joint));
    }
    return codes;
  }

  std::vector<Var> encode(Tape<Real>& t,
                          const std::vector<Tensor<Real>>& clouds,
                          const std::vector<Real>& times) const {
    require_sequence(clouds, times);
    std::vector<Var> pooled;
    for (std::size_t f = 0; f < clouds.size(); ++f)
      pooled.push_back(t.col_max(
          trunk_.forward(t, t.input(with_time(clouds[f], times[f])))));
    Var stacked = pooled[0];
    for (std::size_t f = 1; f < pooled.size(); ++f)
      stacked = t.concat_rows(stacked, pooled[f]);
    Var ctx = t.col_max(stacked);
    std::vector<Var> codes;
    for (Var pf : pooled)
      codes.push_back(head_.forward(t, t.concat_cols(pf, ctx)));
    return codes;
  }

 private:
  static void require_sequence(const std::vector<Tensor<Real>>& clouds,
                               const std::vector<Real>& times) {
    if (clouds.empty()) throw InputError("st encoder: empty sequence");
    if (clouds.size() != times.size())
      throw InputError("st encoder: frame/timestamp count mismatch");
    for (const auto& c : clouds) {
      PfEncoder<Real>::require_frame(c);
      if (c.rows() != clouds[0].rows())
        throw InputError("st encoder: ragged frames (" +
                         std::to_string(c.rows()) + " vs " +
                         std::to_string(clouds[0].rows()) + " points)");
    }
  }

  static Tensor<Real> with_time(const Tensor<Real>& pts, Real time) {
    Tensor<Real> out(pts.rows(), 4);
    for (std::size_t i = 0; i < pts.rows(); ++i) {
      for (std::size_t j = 0; j < 3; ++j) out.at(i, j) = pts.at(i, j);
      out.at(i, 3) = time;
    }
    return out;
  }

  Mlp<Real> trunk_, head_;
};

// Set encoder for articulated inputs: phase 1 summarizes each frame like the
// PF encoder (into a width-sized feature), phase 2 max-pools those features
// into one order-free set code; codes for arbitrary articulation angles come
// from a query MLP on (angle | set code).
template <class Real>
class SetEncoder {
 public:
  SetEncoder() = default;
  SetEncoder(std::size_t d_c, std::size_t width = 128,
             std::string prefix = "enc")
      : width_(width),
        trunk_(prefix + "/trunk", {3, width, width}, false, true),
        frame_head_(prefix + "/frame_head", {width, width}),
        query_(prefix + "/query", {1 + width, width, d_c}) {}

  void init(Parameters<Real>& params, Rng& rng) const {
    trunk_.init(params, rng);
    frame_head_.init(params, rng);
    query_.init(params, rng);
  }

  Tensor<Real> set_code_raw(const Parameters<Real>& p,
                            const std::vector<Tensor<Real>>& clouds) const {
    if (clouds.empty()) throw InputError("set encoder: empty sequence");
    Tensor<Real> stacked(clouds.size(), width_);
    for (std::size_t f = 0; f < clouds.size(); ++f) {
      PfEncoder<Real>::require_frame(clouds[f]);
      Tensor<Real> code = frame_head_.forward_raw(
          p, PfEncoder<Real>::col_max_raw(trunk_.forward_raw(p, clouds[f])));
      for (std::size_t j = 0; j < width_; ++j) stacked.at(f, j) = code.values[j];
    }
    return PfEncoder<Real>::col_max_raw(stacked);
  }

  Tensor<Real> angle_query_raw(const Parameters<Real>& p, Real angle,
                               const Tensor<Real>& set_code) const {
    Tensor<Real> in(1, 1 + width_);
    in.values[0] = angle;
    for (std::size_t j = 0; j < width_; ++j)
      in.values[1 + j] = set_code.values[j];
    return query_.forward_raw(p, in);
  }

  // Codes for every frame of an angle-annotated sequence.
  std::vector<Tensor<Real>> encode_raw(const Parameters<Real>& p,
                                       const std::vector<Tensor<Real>>& clouds,
                                       const std::vector<Real>& angles) const {
    if (clouds.size() != angles.size())
      throw InputError("set encoder: every frame needs an articulation angle");
    Tensor<Real> set_code = set_code_raw(p, clouds);
    std::vector<Tensor<Real>> codes;
    for (Real a : angles) codes.push_back(angle_query_raw(p, a, set_code));
    return codes;
  }

  std::vector<Var> encode(Tape<Real>& t,
                          const std::vector<Tensor<Real>>& clouds,
                          const std::vector<Real>& angles) const {
    if (clouds.empty()) throw InputError("set encoder: empty sequence");
    if (clouds.size() != angles.size())
      throw InputError("set encoder: every frame needs an articulation angle");
    Var stacked;
    for (std::size_t f = 0; f < clouds.size(); ++f) {
      PfEncoder<Real>::require_frame(clouds[f]);
      Var code = frame_head_.forward(
          t, t.col_max(trunk_.forward(t, t.input(clouds[f]))));
      stacked = f == 0 ? code : t.concat_rows(stacked, code);
    }
    Var set_code = t.col_max(stacked);
    std::vector<Var> codes;
    for (Real a : angles) {
      Var in = t.concat_cols(t.input(Tensor<Real>::scalar(a)), set_code);
      codes.push_back(query_.forward(t, in));
    }
    return codes;
  }

 private:
  std::size_t width_ = 128;
  Mlp<Real> trunk_, frame_head_, query_;
};

}  // namespace dynsurf

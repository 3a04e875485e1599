// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
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

enum class FlowMode : std::uint8_t { NVP, NICE };

inline const char* flow_mode_name(FlowMode m) {
  return m == FlowMode::NVP ? "nvp" : "nice";
}

inline FlowMode parse_flow_mode(const std::string& name) {
  if (name == "nvp") return FlowMode::NVP;
  if (name == "nice") return FlowMode::NICE;
  throw ConfigError("unknown flow mode '" + name + "' (nvp, nice)");
}

struct FlowOptions {
  double s_clamp = 5.0;     // s output is s_clamp * tanh(raw)
  std::size_t hidden = 128; // conditioner width (two hidden layers)
  std::string prefix = "flow";
};

// Stack of conditional coupling blocks. Each block rewrites one active
// coordinate from the two passive ones plus the condition code:
//   forward: z' = z * exp(s(passive|c)) + t(passive|c)
//   inverse: z  = (z' - t) * exp(-s)
// NICE mode drops s entirely (translation-only, volume preserving). Both
// directions are closed-form, so the stack is a bijection of R^3 for any
// parameter values, trained or not.
template <class Real>
class Homeomorphism {
 public:
  struct Block {
    int active = 0;  // transformed coordinate; the other two are passive
    FlowMode mode = FlowMode::NVP;
    Mlp<Real> s_net; // absent (empty dims) in NICE mode
    Mlp<Real> t_net;
  };

  Homeomorphism() = default;

  // Split patterns from a seeded shuffle of the repeated cycle 0,1,2,... so
  // every coordinate stays active somewhere; B < 3 cannot cover all three.
  static Homeomorphism init(std::size_t B, std::size_t d_c, FlowMode mode,
                            std::uint64_t seed, Parameters<Real>& params,
                            FlowOptions opts = {}) {
    if (B < 3)
      throw ConfigError("homeomorphism needs B >= 3 blocks, got " +
                        std::to_string(B));
    std::vector<int> patterns(B);
    for (std::size_t i = 0; i < B; ++i) patterns[i] = static_cast<int>(i % 3);
    Rng rng(Rng::mix(seed, 0xF10Fu));
    rng.shuffle(patterns);
    return with_patterns(patterns, d_c, mode, seed, params, opts);
  }

  // Explicit patterns, no coverage requirement: lets tests build miniature
  // stacks (e.g. B=2) that the seeded factory would reject.
  static Homeomorphism with_patterns(const std::vector<int>& patterns,
                                     std::size_t d_c, FlowMode mode,
                                     std::uint64_t seed,
                                     Parameters<Real>& params,
                                     FlowOptions opts = {}) {
    std::vector<std::pair<int, FlowMode>> blocks;
    for (int a : patterns) blocks.emplace_back(a, mode);
    return with_blocks(blocks, d_c, seed, params, opts);
  }

  // Fully explicit construction, including per-block modes (mixed NICE/NVP
  // stacks compose fine; each block inverts itself).
  static Homeomorphism with_blocks(
      const std::vector<std::pair<int, FlowMode>>& spec, std::size_t d_c,
      std::uint64_t seed, Parameters<Real>& params, FlowOptions opts = {}) {
    if (spec.empty()) throw ConfigError("homeomorphism needs >= 1 block");
    for (const auto& [a, m] : spec)
      if (a < 0 || a > 2)
        throw ConfigError("split pattern active index out of range");
    Homeomorphism h;
    h.d_c_ = d_c;
    h.opts_ = opts;
    Rng rng(Rng::mix(seed, 0x1D11u));
    std::vector<std::size_t> dims = {2 + d_c, opts.hidden, opts.hidden, 1};
    for (std::size_t i = 0; i < spec.size(); ++i) {
      Block b;
      b.active = spec[i].first;
      b.mode = spec[i].second;
      std::string base = opts.prefix + "/b" + std::to_string(i);
      if (b.mode == FlowMode::NVP) {
        b.s_net = Mlp<Real>(base + "/s", dims, /*zero_init_last=*/true);
        b.s_net.init(params, rng);
      }
      b.t_net = Mlp<Real>(base + "/t", dims, /*zero_init_last=*/true);
      b.t_net.init(params, rng);
      h.blocks_.push_back(std::move(b));
    }
    return h;
  }

  // Uniform over blocks; meaningful for stacks built by the factories.
  FlowMode mode() const {
    for (const auto& b : blocks_)
      if (b.mode == FlowMode::NVP) return FlowMode::NVP;
    return FlowMode::NICE;
  }
  std::size_t condition_dim() const { return d_c_; }
  std::size_t block_count() const { return blocks_.size(); }
  const FlowOptions& options() const { return opts_; }
  const std::vector<Block>& blocks() const { return blocks_; }

  std::vector<int> patterns() const {
    std::vector<int> out;
    for (const auto& b : blocks_) out.push_back(b.active);
    return out;
  }

  // ---- raw (tape-free) evaluation ----

  Tensor<Real> block_forward_raw(std::size_t bi, const Parameters<Real>& p,
                                 const Tensor<Real>& pts,
                                 const Tensor<Real>& code) const {
    return block_apply_raw(bi, p, pts, code, /*inverse=*/false);
  }

  Tensor<Real> block_inverse_raw(std::size_t bi, const Parameters<Real>& p,
                                 const Tensor<Real>& pts,
                                 const Tensor<Real>& code) const {
    return block_apply_raw(bi, p, pts, code, /*inverse=*/true);
  }

  Tensor<Real> forward_raw(const Parameters<Real>& p, Tensor<Real> pts,
                           const Tensor<Real>& code) const {
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      pts = block_forward_raw(i, p, pts, code);
    return pts;
  }

  Tensor<Real> inverse_raw(const Parameters<Real>& p, Tensor<Real> pts,
                           const Tensor<Real>& code) const {
    for (std::size_t i = blocks_.size(); i-- > 0;)
      pts = block_inverse_raw(i, p, pts, code);
    return pts;
  }

  // F_ij = H^-1(H(points; c_i); c_j): frame-i coordinates to frame-j via the
  // canonical space. Cycle consistency is inherited from the factorization.
  Tensor<Real> correspondence_raw(const Parameters<Real>& p, Tensor<Real> pts,
                                  const Tensor<Real>& c_i,
                                  const Tensor<Real>& c_j) const {
    return inverse_raw(p, forward_raw(p, std::move(pts), c_i), c_j);
  }

  // log|det dH/dp| per point: the sum of s outputs along the stack (passive
  // coordinates contribute ones on the diagonal). Identically zero for NICE.
  Tensor<Real> log_det_raw(const Parameters<Real>& p, Tensor<Real> pts,
                           const Tensor<Real>& code) const {
    Tensor<Real> acc(pts.rows(), 1);
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      if (blocks_[bi].mode == FlowMode::NVP) {
        Tensor<Real> s = scale_output_raw(bi, p, pts, code);
        for (std::size_t k = 0; k < acc.rows(); ++k)
          acc.values[k] += s.values[k];
      }
      pts = block_forward_raw(bi, p, pts, code);
    }
    return acc;
  }

  // ---- taped evaluation (training path) ----

  Var forward(Tape<Real>& t, Var pts, Var code) const {
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      pts = block_taped(t, i, pts, code, /*inverse=*/false);
    return pts;
  }

  Var inverse(Tape<Real>& t, Var pts, Var code) const {
    for (std::size_t i = blocks_.size(); i-- > 0;)
      pts = block_taped(t, i, pts, code, /*inverse=*/true);
    return pts;
  }

  Var correspondence(Tape<Real>& t, Var pts, Var c_i, Var c_j) const {
    Var mid = forward(t, pts, c_i);
    t.tag(mid, Tag::Canonical);
    Var out = inverse(t, mid, c_j);
    t.tag(out, Tag::Barrier);
    return out;
  }

 private:
  void check_code(const Tensor<Real>& code) const {
    if (code.rows() != 1 || code.cols() != d_c_)
      throw DimensionError("condition code must be [1," + std::to_string(d_c_) +
                           "], got " + shape_str(code.shape));
  }

  // Conditioner input [K, 2 + d_c]: passive coords then the broadcast code.
  Tensor<Real> cond_input_raw(std::size_t bi, const Tensor<Real>& pts,
                              const Tensor<Real>& code) const {
    int a = blocks_[bi].active;
    int p0 = a == 0 ? 1 : 0;
    int p1 = a == 2 ? 1 : 2;
    std::size_t K = pts.rows();
    Tensor<Real> in(K, 2 + d_c_);
    for (std::size_t k = 0; k < K; ++k) {
      in.at(k, 0) = pts.at(k, static_cast<std::size_t>(p0));
      in.at(k, 1) = pts.at(k, static_cast<std::size_t>(p1));
      for (std::size_t j = 0; j < d_c_; ++j)
        in.at(k, 2 + j) = code.values[j];
    }
    return in;
  }

  Tensor<Real> scale_output_raw(std::size_t bi, const Parameters<Real>& p,
                                const Tensor<Real>& pts,
                                const Tensor<Real>& code) const {
    Tensor<Real> s = blocks_[bi].s_net.forward_raw(p, cond_input_raw(bi, pts, code));
    for (auto& x : s.values)
      x = static_cast<Real>(opts_.s_clamp) * std::tanh(x);
    return s;
  }

  Tensor<Real> block_apply_raw(std::size_t bi, const Parameters<Real>& p,
                               const Tensor<Real>& pts,
                               const Tensor<Real>& code, bool inverse) const {
    if (pts.cols() != 3)
      throw DimensionError("points must be [K,3], got " + shape_str(pts.shape));
    check_code(code);
    const Block& b = blocks_[bi];
    Tensor<Real> in = cond_input_raw(bi, pts, code);
    Tensor<Real> tr = b.t_net.forward_raw(p, in);
    Tensor<Real> out = pts;
    std::size_t a = static_cast<std::size_t>(b.active);
    if (b.mode == FlowMode::NICE) {
      for (std::size_t k = 0; k < pts.rows(); ++k)
        out.at(k, a) += inverse ? -tr.values[k] : tr.values[k];
    } else {
      Tensor<Real> s = blocks_[bi].s_net.forward_raw(p, in);
      for (std::size_t k = 0; k < pts.rows(); ++k) {
        Real sv = static_cast<Real>(opts_.s_clamp) * std::tanh(s.values[k]);
        Real z = pts.at(k, a);
        out.at(k, a) = inverse ? (z - tr.values[k]) * std::exp(-sv)
                               : z * std::exp(sv) + tr.values[k];
      }
    }
    if (!out.all_finite())
      throw NumericError("coupling block produced non-finite coordinates");
    return out;
  }

  Var block_taped(Tape<Real>& t, std::size_t bi, Var pts, Var code,
                  bool inverse) const {
    const Block& b = blocks_[bi];
    std::size_t a = static_cast<std::size_t>(b.active);
    std::size_t p0 = a == 0 ? 1 : 0;
    std::size_t p1 = a == 2 ? 1 : 2;
    std::size_t K = t.value(pts).rows();
    Var pass = t.concat_cols(t.slice_cols(pts, p0, 1), t.slice_cols(pts, p1, 1));
    Var in = t.concat_cols(pass, t.repeat_rows(code, K));
    Var tr = b.t_net.forward(t, in);
    Var z = t.slice_cols(pts, a, 1);
    Var zp;
    if (b.mode == FlowMode::NICE) {
      zp = inverse ? t.sub(z, tr) : t.add(z, tr);
    } else {
      Var s = t.scale(t.tanh(b.s_net.forward(t, in)),
                      static_cast<Real>(opts_.s_clamp));
      zp = inverse ? t.mul(t.sub(z, tr), t.exp(t.neg(s)))
                   : t.add(t.mul(z, t.exp(s)), tr);
    }
    // reassemble columns in x,y,z order
    Var c0 = a == 0 ? zp : t.slice_cols(pts, 0, 1);
    Var c1 = a == 1 ? zp : t.slice_cols(pts, 1, 1);
    Var c2 = a == 2 ? zp : t.slice_cols(pts, 2, 1);
    return t.concat_cols(c0, t.concat_cols(c1, c2));
  }

  std::size_t d_c_ = 64;
  FlowOptions opts_;
  std::vector<Block> blocks_;
};

}  // namespace dynsurf

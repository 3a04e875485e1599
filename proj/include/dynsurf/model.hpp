// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dynsurf/encoders.hpp"
#include "dynsurf/errors.hpp"
#include "dynsurf/flow.hpp"
#include "dynsurf/params.hpp"
#include "dynsurf/rng.hpp"
#include "dynsurf/shape.hpp"
#include "dynsurf/tensor.hpp"

namespace dynsurf {

struct ModelConfig {
  EncoderKind encoder = EncoderKind::ST;
  FlowMode mode = FlowMode::NVP;
  std::size_t blocks = 6;
  std::size_t d_c = 64;
  std::size_t d_g = 128;
  std::size_t enc_width = 128;
  std::size_t cond_hidden = 128;
  std::size_t phi_width = 128;
  std::size_t psi_width = 256;
  double s_clamp = 5.0;
  std::size_t m_max = 1024;
  std::uint64_t seed = 0;
  // Explicit split patterns bypass the seeded-cycle factory (test-scale
  // stacks below the B >= 3 coverage floor). Empty = derive from `blocks`.
  std::vector<int> patterns;

  void validate() const {
    if (d_c == 0 || d_g == 0) throw ConfigError("code dims must be positive");
    if (enc_width == 0 || cond_hidden == 0 || phi_width == 0 || psi_width == 0)
      throw ConfigError("widths must be positive");
    if (s_clamp <= 0) throw ConfigError("s_clamp must be positive");
    if (m_max == 0) throw ConfigError("m_max must be positive");
    if (patterns.empty() && blocks < 3)
      throw ConfigError("homeomorphism needs B >= 3 blocks, got " +
                        std::to_string(blocks));
  }
};

// The full trainable artifact: deformation encoder -> per-frame codes c_i,
// conditional homeomorphism H, canonical occupancy (phi, psi). Exactly one
// encoder member is live per config.
template <class Real>
struct Model {
  ModelConfig cfg;
  Parameters<Real> params;
  Homeomorphism<Real> flow;
  PfEncoder<Real> pf;
  StEncoder<Real> st;
  SetEncoder<Real> set;
  CanonicalShape<Real> shape;
  std::uint64_t trained_iters = 0;

  static Model init(const ModelConfig& cfg) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    FlowOptions fopts;
    fopts.s_clamp = cfg.s_clamp;
    fopts.hidden = cfg.cond_hidden;
    if (cfg.patterns.empty()) {
      m.flow = Homeomorphism<Real>::init(cfg.blocks, cfg.d_c, cfg.mode,
                                         Rng::mix(cfg.seed, 1), m.params,
                                         fopts);
    } else {
      m.flow = Homeomorphism<Real>::with_patterns(cfg.patterns, cfg.d_c,
                                                  cfg.mode,
                                                  Rng::mix(cfg.seed, 1),
                                                  m.params, fopts);
    }
    Rng enc_rng(Rng::mix(cfg.seed, 2));
    switch (cfg.encoder) {
      case EncoderKind::PF:
        m.pf = PfEncoder<Real>(cfg.d_c, cfg.enc_width);
        m.pf.init(m.params, enc_rng);
        break;
      case EncoderKind::ST:
        m.st = StEncoder<Real>(cfg.d_c, cfg.enc_width);
        m.st.init(m.params, enc_rng);
        break;
      case EncoderKind::SET:
        m.set = SetEncoder<Real>(cfg.d_c, cfg.enc_width);
        m.set.init(m.params, enc_rng);
        break;
    }
    Rng shape_rng(Rng::mix(cfg.seed, 3));
    m.shape = CanonicalShape<Real>(cfg.d_g, cfg.phi_width, cfg.psi_width);
    m.shape.init(m.params, shape_rng);
    return m;
  }

  // Per-frame deformation codes from the observations. `times` feeds the ST
  // encoder, `angles` the SET encoder; unused inputs are ignored.
  std::vector<Tensor<Real>> encode_codes_raw(
      const std::vector<Tensor<Real>>& clouds, const std::vector<Real>& times,
      const std::vector<Real>& angles) const {
    switch (cfg.encoder) {
      case EncoderKind::PF: {
        std::vector<Tensor<Real>> codes;
        for (const auto& c : clouds) codes.push_back(pf.encode_raw(params, c));
        return codes;
      }
      case EncoderKind::ST:
        return st.encode_raw(params, clouds, times);
      default:
        if (angles.size() != clouds.size())
          throw InputError("set encoder needs one articulation angle per frame");
        return set.encode_raw(params, clouds, angles);
    }
  }

  std::vector<Var> encode_codes(Tape<Real>& t,
                                const std::vector<Tensor<Real>>& clouds,
                                const std::vector<Real>& times,
                                const std::vector<Real>& angles) const {
    switch (cfg.encoder) {
      case EncoderKind::PF: {
        std::vector<Var> codes;
        for (const auto& c : clouds) codes.push_back(pf.encode(t, c));
        return codes;
      }
      case EncoderKind::ST:
        return st.encode(t, clouds, times);
      default:
        if (angles.size() != clouds.size())
          throw InputError("set encoder needs one articulation angle per frame");
        return set.encode(t, clouds, angles);
    }
  }

  // Geometry code from the canonical union of all observation clouds.
  Tensor<Real> geometry_raw(const std::vector<Tensor<Real>>& clouds,
                            const std::vector<Tensor<Real>>& codes,
                            std::uint64_t agg_seed) const {
    Tensor<Real> obs =
        aggregate_raw(flow, params, clouds, codes, cfg.m_max, agg_seed);
    return shape.geometry_code_raw(params, obs);
  }
};

}  // namespace dynsurf

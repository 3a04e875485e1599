// SPDX-License-Identifier: Apache-2.0
#include "dynsurf/model_io.hpp"

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "dynsurf/base64.hpp"
#include "dynsurf/errors.hpp"
#include "dynsurf/fsutil.hpp"

namespace dynsurf {

namespace {

using nlohmann::json;

const json& require_field(const json& j, const std::string& key) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError("missing field '" + key + "'");
  return *it;
}

template <class Real>
json param_field(const Tensor<Real>& t) {
  std::vector<double> wide(t.values.begin(), t.values.end());
  return {{"dtype", "f64"}, {"shape", t.shape}, {"data", encode_array(wide)}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.encoder =
      parse_encoder_kind(require_field(j, "encoder").get<std::string>());
  cfg.mode = parse_flow_mode(require_field(j, "mode").get<std::string>());
  cfg.blocks = require_field(j, "blocks").get<std::size_t>();
  cfg.d_c = require_field(j, "d_c").get<std::size_t>();
  cfg.d_g = require_field(j, "d_g").get<std::size_t>();
  cfg.enc_width = require_field(j, "enc_width").get<std::size_t>();
  cfg.cond_hidden = require_field(j, "cond_hidden").get<std::size_t>();
  cfg.phi_width = require_field(j, "phi_width").get<std::size_t>();
  cfg.psi_width = require_field(j, "psi_width").get<std::size_t>();
  cfg.s_clamp = require_field(j, "s_clamp").get<double>();
  cfg.m_max = require_field(j, "m_max").get<std::size_t>();
  cfg.seed = require_field(j, "seed").get<std::uint64_t>();
  cfg.patterns = require_field(j, "patterns").get<std::vector<int>>();
  return cfg;
}

}  // namespace

template <class Real>
void save_model(const Model<Real>& m, const std::filesystem::path& path) {
  json cfg = {{"encoder", encoder_kind_name(m.cfg.encoder)},
              {"mode", flow_mode_name(m.cfg.mode)},
              {"blocks", m.cfg.blocks},
              {"d_c", m.cfg.d_c},
              {"d_g", m.cfg.d_g},
              {"enc_width", m.cfg.enc_width},
              {"cond_hidden", m.cfg.cond_hidden},
              {"phi_width", m.cfg.phi_width},
              {"psi_width", m.cfg.psi_width},
              {"s_clamp", m.cfg.s_clamp},
              {"m_max", m.cfg.m_max},
              {"seed", m.cfg.seed},
              {"patterns", m.flow.patterns()}};
  json params = json::object();
  for (const auto& name : m.params.names())
    params[name] = param_field(m.params.at(name));
  json j = {{"format", 1},
            {"precision", precision_name<Real>()},
            {"trained_iters", m.trained_iters},
            {"config", std::move(cfg)},
            {"params", std::move(params)}};
  write_file_atomic(path, j.dump(2) + "\n");
}

template <class Real>
Model<Real> load_model(const std::filesystem::path& path) {
  std::string fname = path.filename().string();
  try {
    json j = json::parse(read_file(path));
    if (require_field(j, "format").get<int>() != 1)
      throw ParseError("unsupported format version");
    auto precision = require_field(j, "precision").get<std::string>();
    if (precision != precision_name<Real>())
      throw ParseError("precision is " + precision + ", expected " +
                       precision_name<Real>());
    ModelConfig cfg = config_from_json(require_field(j, "config"));
    Model<Real> m = Model<Real>::init(cfg);
    m.trained_iters = require_field(j, "trained_iters").get<std::uint64_t>();

    const json& params = require_field(j, "params");
    if (params.size() != m.params.count())
      throw ParseError("file holds " + std::to_string(params.size()) +
                       " parameters, architecture has " +
                       std::to_string(m.params.count()));
    for (const auto& name : m.params.names()) {
      auto it = params.find(name);
      if (it == params.end())
        throw ParseError("missing parameter '" + name + "'");
      const json& field = *it;
      if (require_field(field, "dtype").get<std::string>() != "f64")
        throw ParseError("parameter '" + name + "' must have dtype f64");
      auto shape =
          require_field(field, "shape").get<std::vector<std::size_t>>();
      Tensor<Real>& dst = m.params.at(name);
      if (shape != dst.shape)
        throw ParseError("parameter '" + name + "' has shape " +
                         shape_str(shape) + ", expected " +
                         shape_str(dst.shape));
      auto data =
          decode_array<double>(require_field(field, "data").get<std::string>());
      if (data.size() != dst.size())
        throw ParseError("parameter '" + name + "' holds " +
                         std::to_string(data.size()) + " values, expected " +
                         std::to_string(dst.size()));
      for (std::size_t i = 0; i < data.size(); ++i)
        dst.values[i] = static_cast<Real>(data[i]);
    }
    return m;
  } catch (const json::exception& e) {
    throw ParseError(fname + ": " + std::string(e.what()));
  } catch (const ParseError& e) {
    throw ParseError(fname + ": " + std::string(e.what()));
  } catch (const ConfigError& e) {
    throw ParseError(fname + ": " + std::string(e.what()));
  }
}

std::string model_file_precision(const std::filesystem::path& path) {
  try {
    json j = json::parse(read_file(path));
    return require_field(j, "precision").get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError(path.filename().string() + ": " + std::string(e.what()));
  }
}

template void save_model<float>(const Model<float>&,
                                const std::filesystem::path&);
template void save_model<double>(const Model<double>&,
                                 const std::filesystem::path&);
template Model<float> load_model<float>(const std::filesystem::path&);
template Model<double> load_model<double>(const std::filesystem::path&);

}  // namespace dynsurf

// SPDX-License-Identifier: Apache-2.0
//
// Model serialization tests: bit-identical round trips (parameters, config,
// and model outputs), precision tagging, and malformed-file rejection.
// Oracle markers: [TRIVIAL] hand-checkable, [DERIVED] computed independently
// and frozen here.
#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynsurf/base64.hpp"
#include "dynsurf/errors.hpp"
#include "dynsurf/fsutil.hpp"
#include "dynsurf/model.hpp"
#include "dynsurf/model_io.hpp"
#include "dynsurf/rng.hpp"

using namespace dynsurf;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("dynsurf_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ModelConfig tiny_cfg() {
  ModelConfig cfg;
  cfg.encoder = EncoderKind::ST;
  cfg.mode = FlowMode::NVP;
  cfg.patterns = {0, 1, 2};
  cfg.d_c = 8;
  cfg.d_g = 8;
  cfg.enc_width = 16;
  cfg.cond_hidden = 16;
  cfg.phi_width = 16;
  cfg.psi_width = 8;
  cfg.m_max = 64;
  cfg.seed = 11;
  return cfg;
}

// Zero-init last layers would otherwise serialize as all-zero arrays; jitter
// makes every stored value informative.
template <class Real>
void jitter(Model<Real>& m, std::uint64_t seed) {
  Rng rng(seed);
  for (const auto& name : m.params.names())
    for (auto& v : m.params.at(name).values)
      v += static_cast<Real>(0.1 * rng.gaussian());
}

template <class Real>
Tensor<Real> random_points(Rng& rng, std::size_t n) {
  Tensor<Real> t(n, 3);
  for (auto& v : t.values)
    v = static_cast<Real>(rng.uniform(-0.5, 0.5));
  return t;
}

template <class Real>
bool params_identical(const Model<Real>& a, const Model<Real>& b) {
  if (a.params.names() != b.params.names()) return false;
  for (const auto& name : a.params.names()) {
    const auto& ta = a.params.at(name);
    const auto& tb = b.params.at(name);
    if (ta.shape != tb.shape) return false;
    for (std::size_t i = 0; i < ta.size(); ++i)
      if (ta.values[i] != tb.values[i]) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("model_io") {
  TEST_CASE("round trip is bit-identical: params, config, outputs [TRIVIAL]") {
    fs::path dir = fresh_dir("model_roundtrip");
    auto m = Model<double>::init(tiny_cfg());
    jitter(m, 301);
    m.trained_iters = 77;
    save_model(m, dir / "model.json");

    auto r = load_model<double>(dir / "model.json");
    CHECK(r.cfg.encoder == m.cfg.encoder);
    CHECK(r.cfg.mode == m.cfg.mode);
    CHECK(r.cfg.d_c == m.cfg.d_c);
    CHECK(r.cfg.d_g == m.cfg.d_g);
    CHECK(r.cfg.s_clamp == m.cfg.s_clamp);
    CHECK(r.cfg.m_max == m.cfg.m_max);
    CHECK(r.cfg.seed == m.cfg.seed);
    CHECK(r.flow.patterns() == m.flow.patterns());
    CHECK(r.trained_iters == 77);
    CHECK(params_identical(m, r));

    // The contract is behavioral: every output bit matches, end to end.
    Rng rng(302);
    auto pts = random_points<double>(rng, 40);
    std::vector<Tensor<double>> clouds = {random_points<double>(rng, 30),
                                          random_points<double>(rng, 30)};
    std::vector<double> times = {0.0, 1.0};
    auto codes = m.encode_codes_raw(clouds, times, {});
    auto codes_r = r.encode_codes_raw(clouds, times, {});
    for (std::size_t f = 0; f < codes.size(); ++f)
      for (std::size_t i = 0; i < codes[f].size(); ++i)
        CHECK(codes[f].values[i] == codes_r[f].values[i]);
    auto fwd = m.flow.forward_raw(m.params, pts, codes[0]);
    auto fwd_r = r.flow.forward_raw(r.params, pts, codes_r[0]);
    auto g = m.geometry_raw(clouds, codes, 7);
    auto g_r = r.geometry_raw(clouds, codes_r, 7);
    auto occ = m.shape.occupancy_query_raw(m.params, fwd, g);
    auto occ_r = r.shape.occupancy_query_raw(r.params, fwd_r, g_r);
    for (std::size_t i = 0; i < fwd.size(); ++i)
      CHECK(fwd.values[i] == fwd_r.values[i]);
    for (std::size_t i = 0; i < occ.size(); ++i)
      CHECK(occ.values[i] == occ_r.values[i]);
  }

  TEST_CASE("save-load-save produces identical bytes [TRIVIAL]") {
    fs::path dir = fresh_dir("model_bytes");
    auto m = Model<double>::init(tiny_cfg());
    jitter(m, 303);
    save_model(m, dir / "a.json");
    auto r = load_model<double>(dir / "a.json");
    save_model(r, dir / "b.json");
    CHECK(read_file(dir / "a.json") == read_file(dir / "b.json"));
  }

  TEST_CASE("seeded pattern factory resolves into the file [DERIVED]") {
    fs::path dir = fresh_dir("model_patterns");
    ModelConfig cfg = tiny_cfg();
    cfg.patterns.clear();
    cfg.blocks = 5;
    auto m = Model<double>::init(cfg);
    save_model(m, dir / "model.json");

    auto j = nlohmann::json::parse(read_file(dir / "model.json"));
    auto stored = j["config"]["patterns"].get<std::vector<int>>();
    REQUIRE(stored.size() == 5);
    CHECK(std::set<int>(stored.begin(), stored.end()) ==
          std::set<int>{0, 1, 2});

    auto r = load_model<double>(dir / "model.json");
    CHECK(r.flow.patterns() == m.flow.patterns());
    CHECK(r.params.names() == m.params.names());
    CHECK(params_identical(m, r));
  }

  TEST_CASE("float models: precision tag, exact round trip [TRIVIAL]") {
    fs::path dir = fresh_dir("model_f32");
    auto m = Model<float>::init(tiny_cfg());
    jitter(m, 304);
    save_model(m, dir / "model.json");
    CHECK(model_file_precision(dir / "model.json") == "f32");

    auto r = load_model<float>(dir / "model.json");
    CHECK(params_identical(m, r));

    // Mismatched instantiation is an error, not a silent cast.
    CHECK_THROWS_WITH_AS(load_model<double>(dir / "model.json"),
                         doctest::Contains("precision is f32"), ParseError);

    auto d = Model<double>::init(tiny_cfg());
    save_model(d, dir / "model64.json");
    CHECK(model_file_precision(dir / "model64.json") == "f64");
    CHECK_THROWS_WITH_AS(load_model<float>(dir / "model64.json"),
                         doctest::Contains("precision is f64"), ParseError);
  }

  TEST_CASE("malformed files are rejected by name [TRIVIAL]") {
    fs::path dir = fresh_dir("model_malformed");
    auto m = Model<double>::init(tiny_cfg());
    jitter(m, 305);
    save_model(m, dir / "good.json");
    auto good = nlohmann::json::parse(read_file(dir / "good.json"));
    std::string victim = m.params.names().front();

    auto expect = [&](const nlohmann::json& j, const std::string& needle) {
      write_file_atomic(dir / "bad.json", j.dump() + "\n");
      CHECK_THROWS_WITH_AS(load_model<double>(dir / "bad.json"),
                           doctest::Contains(needle.c_str()), ParseError);
    };

    SUBCASE("missing top-level field") {
      auto j = good;
      j.erase("params");
      expect(j, "missing field 'params'");
    }
    SUBCASE("future format version") {
      auto j = good;
      j["format"] = 2;
      expect(j, "unsupported format version");
    }
    SUBCASE("unknown encoder") {
      auto j = good;
      j["config"]["encoder"] = "cnn";
      expect(j, "unknown encoder");
    }
    SUBCASE("invalid config") {
      auto j = good;
      j["config"]["d_g"] = 0;
      expect(j, "code dims");
    }
    SUBCASE("wrong dtype") {
      auto j = good;
      j["params"][victim]["dtype"] = "f32";
      expect(j, "must have dtype f64");
    }
    SUBCASE("wrong shape") {
      auto j = good;
      j["params"][victim]["shape"] = {1, 1};
      expect(j, "has shape");
    }
    SUBCASE("truncated data") {
      auto j = good;
      j["params"][victim]["data"] = encode_array(std::vector<double>{1.0});
      expect(j, "holds 1 values");
    }
    SUBCASE("renamed parameter") {
      auto j = good;
      auto field = j["params"][victim];
      j["params"].erase(victim);
      j["params"]["nosuch"] = field;
      expect(j, "missing parameter '" + std::string(victim) + "'");
    }
    SUBCASE("dropped parameter") {
      auto j = good;
      j["params"].erase(victim);
      expect(j, "parameters");
    }
    SUBCASE("not json at all") {
      write_file_atomic(dir / "bad.json", "not json\n");
      CHECK_THROWS_AS(load_model<double>(dir / "bad.json"), ParseError);
    }
    SUBCASE("missing file") {
      CHECK_THROWS_AS(load_model<double>(dir / "absent.json"), IoError);
    }
  }
}

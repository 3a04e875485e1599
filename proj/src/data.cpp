// SPDX-License-Identifier: Apache-2.0
#include "dynsurf/data.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <utility>

#include <json.hpp>

#include "dynsurf/base64.hpp"
#include "dynsurf/errors.hpp"
#include "dynsurf/fsutil.hpp"

// Arrays travel as base64 of their little-endian byte image; this code
// memcpy's them straight out of memory.
static_assert(std::endian::native == std::endian::little,
              "dataset format assumes a little-endian host");

namespace dynsurf {

namespace {

using nlohmann::json;

// Round through float32 so in-memory supervision matches the on-disk
// encoding bit for bit.  noinline is load-bearing: GCC 11's SLP vectorizer
// drops the narrowing conversion when it pairs up inlined copies of this
// round trip (observed at -O3 -march=native, even through bit_cast), which
// silently stored full-precision doubles.  Out of line, the scalar
// cvtsd2ss/cvtss2sd pair always survives.
[[gnu::noinline]] double quant(double x) {
  return static_cast<double>(static_cast<float>(x));
}

std::array<double, 3> rot_z(const std::array<double, 3>& p, double theta) {
  double c = std::cos(theta), s = std::sin(theta);
  return {c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]};
}

// ---- hinge_pair geometry (fixed; only the swing range is drawn) ----------
constexpr double kHingeGap = 0.06;    // inner |x| of each box
constexpr double kHingeReach = 0.40;  // outer |x|
constexpr double kHingeHalfY = 0.05;
constexpr double kHingeHalfZ = 0.15;

bool in_hinge_box(const std::array<double, 3>& p, bool positive_x) {
  double x = positive_x ? p[0] : -p[0];
  return x >= kHingeGap && x <= kHingeReach && std::abs(p[1]) <= kHingeHalfY &&
         std::abs(p[2]) <= kHingeHalfZ;
}

// ---- bending_bar kinematics ----------------------------------------------
// Constant-curvature bend about z: arc-length coordinate s along the bar,
// offset y across it. kappa -> 0 degenerates to the identity.
std::array<double, 3> bar_bend(const std::array<double, 3>& rest,
                               double kappa) {
  if (std::abs(kappa) < 1e-12) return rest;
  double radius = 1.0 / kappa;
  double arm = radius - rest[1];
  return {arm * std::sin(kappa * rest[0]),
          radius - arm * std::cos(kappa * rest[0]), rest[2]};
}

std::array<double, 3> bar_unbend(const std::array<double, 3>& p,
                                 double kappa) {
  if (std::abs(kappa) < 1e-12) return p;
  double radius = 1.0 / kappa;
  double dx = p[0], dy = radius - p[1];
  return {std::atan2(dx, dy) / kappa, radius - std::hypot(dx, dy), p[2]};
}

std::array<double, 3> gaussian_unit(Rng& rng) {
  for (;;) {
    std::array<double, 3> v = {rng.gaussian(), rng.gaussian(), rng.gaussian()};
    double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (n > 1e-12) return {v[0] / n, v[1] / n, v[2] / n};
  }
}

// Uniform-by-area point on an axis-aligned box surface.
std::array<double, 3> box_surface_point(Rng& rng, double x0, double x1,
                                        double y0, double y1, double z0,
                                        double z1) {
  double dx = x1 - x0, dy = y1 - y0, dz = z1 - z0;
  double ax = dy * dz, ay = dx * dz, az = dx * dy;  // per face
  double faces[6] = {ax, ax, ay, ay, az, az};
  double total = 2 * (ax + ay + az);
  double u = rng.uniform(0.0, total);
  int f = 0;
  while (f < 5 && u > faces[f]) u -= faces[f++];
  double a = rng.uniform(0.0, 1.0), b = rng.uniform(0.0, 1.0);
  switch (f) {
    case 0: return {x0, y0 + a * dy, z0 + b * dz};
    case 1: return {x1, y0 + a * dy, z0 + b * dz};
    case 2: return {x0 + a * dx, y0, z0 + b * dz};
    case 3: return {x0 + a * dx, y1, z0 + b * dz};
    case 4: return {x0 + a * dx, y0 + b * dy, z0};
    default: return {x0 + a * dx, y0 + b * dy, z1};
  }
}

}  // namespace

ShapeKind parse_shape_kind(const std::string& name) {
  if (name == "translating_sphere") return ShapeKind::TranslatingSphere;
  if (name == "scaling_sphere") return ShapeKind::ScalingSphere;
  if (name == "bending_bar") return ShapeKind::BendingBar;
  if (name == "hinge_pair") return ShapeKind::HingePair;
  throw ConfigError("unknown shape kind '" + name + "'");
}

const char* shape_kind_name(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::TranslatingSphere: return "translating_sphere";
    case ShapeKind::ScalingSphere: return "scaling_sphere";
    case ShapeKind::BendingBar: return "bending_bar";
    case ShapeKind::HingePair: return "hinge_pair";
  }
  return "?";
}

AnalyticShape::AnalyticShape(ShapeKind kind,
                             std::map<std::string, double> params)
    : kind_(kind), params_(std::move(params)) {}

double AnalyticShape::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end())
    throw ParseError("missing shape parameter '" + name + "' for " +
                     shape_kind_name(kind_));
  return it->second;
}

AnalyticShape AnalyticShape::random(ShapeKind kind, Rng& rng) {
  std::map<std::string, double> p;
  switch (kind) {
    case ShapeKind::TranslatingSphere: {
      p["radius"] = rng.uniform(0.15, 0.25);
      p["amp"] = rng.uniform(0.25, 0.40);
      auto dir = gaussian_unit(rng);
      p["dir_x"] = dir[0];
      p["dir_y"] = dir[1];
      p["dir_z"] = dir[2];
      break;
    }
    case ShapeKind::ScalingSphere:
      p["radius"] = rng.uniform(0.15, 0.22);
      p["grow"] = rng.uniform(0.30, 0.50);
      break;
    case ShapeKind::BendingBar:
      p["length"] = 0.7;
      p["width"] = rng.uniform(0.06, 0.10);
      p["height"] = rng.uniform(0.06, 0.10);
      p["theta_max"] = rng.uniform(M_PI / 6, M_PI / 3);
      break;
    case ShapeKind::HingePair:
      p["theta_max"] = rng.uniform(M_PI / 9, M_PI / 6);
      break;
  }
  return AnalyticShape(kind, std::move(p));
}

AnalyticShape AnalyticShape::from_params(
    ShapeKind kind, const std::map<std::string, double>& params) {
  AnalyticShape shape(kind, params);
  static const char* const kRequired[4][6] = {
      {"radius", "amp", "dir_x", "dir_y", "dir_z", nullptr},
      {"radius", "grow", nullptr},
      {"length", "width", "height", "theta_max", nullptr},
      {"theta_max", nullptr},
  };
  for (const char* const* name = kRequired[static_cast<int>(kind)]; *name;
       ++name)
    shape.get(*name);
  return shape;
}

double AnalyticShape::angle(double t) const {
  switch (kind_) {
    case ShapeKind::TranslatingSphere:
    case ShapeKind::ScalingSphere:
      return t;
    case ShapeKind::BendingBar:
      return get("theta_max") * t;
    case ShapeKind::HingePair:
      return get("theta_max") * (2 * t - 1);
  }
  return t;
}

bool AnalyticShape::occupied(const std::array<double, 3>& p, double t) const {
  switch (kind_) {
    case ShapeKind::TranslatingSphere: {
      double a = get("amp") * (t - 0.5);
      double dx = p[0] - get("dir_x") * a;
      double dy = p[1] - get("dir_y") * a;
      double dz = p[2] - get("dir_z") * a;
      double r = get("radius");
      return dx * dx + dy * dy + dz * dz <= r * r;
    }
    case ShapeKind::ScalingSphere: {
      double r = get("radius") * (1 + get("grow") * t);
      return p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= r * r;
    }
    case ShapeKind::BendingBar: {
      double kappa = angle(t) / get("length");
      auto rest = bar_unbend(p, kappa);
      return std::abs(rest[0]) <= get("length") / 2 &&
             std::abs(rest[1]) <= get("width") / 2 &&
             std::abs(rest[2]) <= get("height") / 2;
    }
    case ShapeKind::HingePair: {
      if (in_hinge_box(p, false)) return true;
      return in_hinge_box(rot_z(p, -angle(t)), true);
    }
  }
  return false;
}

std::array<double, 3> AnalyticShape::correspond(const std::array<double, 3>& p,
                                                double t_i, double t_j) const {
  if (t_i == t_j) return p;
  switch (kind_) {
    case ShapeKind::TranslatingSphere: {
      double d = get("amp") * (t_j - 0.5) - get("amp") * (t_i - 0.5);
      return {p[0] + get("dir_x") * d, p[1] + get("dir_y") * d,
              p[2] + get("dir_z") * d};
    }
    case ShapeKind::ScalingSphere: {
      double s = (1 + get("grow") * t_j) / (1 + get("grow") * t_i);
      return {p[0] * s, p[1] * s, p[2] * s};
    }
    case ShapeKind::BendingBar: {
      double len = get("length");
      return bar_bend(bar_unbend(p, angle(t_i) / len), angle(t_j) / len);
    }
    case ShapeKind::HingePair: {
      auto rest = rot_z(p, -angle(t_i));
      if (in_hinge_box(rest, true)) return rot_z(rest, angle(t_j));
      return p;  // static box (or off-solid); identity
    }
  }
  return p;
}

Tensor<double> AnalyticShape::surface_sample(Rng& rng, double t,
                                             std::size_t n) const {
  Tensor<double> out(n, 3);
  auto put = [&](std::size_t i, const std::array<double, 3>& p) {
    out.at(i, 0) = p[0];
    out.at(i, 1) = p[1];
    out.at(i, 2) = p[2];
  };
  switch (kind_) {
    case ShapeKind::TranslatingSphere: {
      double r = get("radius"), a = get("amp") * (t - 0.5);
      std::array<double, 3> c = {get("dir_x") * a, get("dir_y") * a,
                                 get("dir_z") * a};
      for (std::size_t i = 0; i < n; ++i) {
        auto u = gaussian_unit(rng);
        put(i, {c[0] + r * u[0], c[1] + r * u[1], c[2] + r * u[2]});
      }
      break;
    }
    case ShapeKind::ScalingSphere: {
      double r = get("radius") * (1 + get("grow") * t);
      for (std::size_t i = 0; i < n; ++i) {
        auto u = gaussian_unit(rng);
        put(i, {r * u[0], r * u[1], r * u[2]});
      }
      break;
    }
    case ShapeKind::BendingBar: {
      double len = get("length"), w = get("width"), h = get("height");
      double kappa = angle(t) / len;
      // Deformed face areas: the outer side face stretches by 1 + kappa*w/2,
      // the inner shrinks by the mirror factor, top/bottom keep L*w (the
      // linear density 1 - kappa*y integrates to zero asymmetry), caps are
      // untouched. Rejection below keeps top/bottom uniform per unit
      // deformed area.
      double top = len * w;
      double outer = len * h * (1 + kappa * w / 2);
      double inner = len * h * (1 - kappa * w / 2);
      double cap = w * h;
      double faces[6] = {top, top, outer, inner, cap, cap};
      double total = 0;
      for (double f : faces) total += f;
      for (std::size_t i = 0; i < n; ++i) {
        double u = rng.uniform(0.0, total);
        int f = 0;
        while (f < 5 && u > faces[f]) u -= faces[f++];
        std::array<double, 3> rest{};
        if (f <= 1) {  // z = +-h/2, density (1 - kappa*y)
          rest[2] = f == 0 ? h / 2 : -h / 2;
          rest[0] = rng.uniform(-len / 2, len / 2);
          for (;;) {
            double y = rng.uniform(-w / 2, w / 2);
            if (rng.uniform(0.0, 1.0) <=
                (1 - kappa * y) / (1 + kappa * w / 2)) {
              rest[1] = y;
              break;
            }
          }
        } else if (f == 2 || f == 3) {  // y = -+w/2 side faces
          rest[1] = f == 2 ? -w / 2 : w / 2;
          rest[0] = rng.uniform(-len / 2, len / 2);
          rest[2] = rng.uniform(-h / 2, h / 2);
        } else {  // end caps
          rest[0] = f == 4 ? -len / 2 : len / 2;
          rest[1] = rng.uniform(-w / 2, w / 2);
          rest[2] = rng.uniform(-h / 2, h / 2);
        }
        put(i, bar_bend(rest, kappa));
      }
      break;
    }
    case ShapeKind::HingePair: {
      double theta = angle(t);
      for (std::size_t i = 0; i < n; ++i) {
        bool moving = rng.uniform_index(2) == 1;  // equal areas
        auto p = moving ? box_surface_point(rng, kHingeGap, kHingeReach,
                                            -kHingeHalfY, kHingeHalfY,
                                            -kHingeHalfZ, kHingeHalfZ)
                        : box_surface_point(rng, -kHingeReach, -kHingeGap,
                                            -kHingeHalfY, kHingeHalfY,
                                            -kHingeHalfZ, kHingeHalfZ);
        put(i, moving ? rot_z(p, theta) : p);
      }
      break;
    }
  }
  return out;
}

AnalyticShape SyntheticSequence::shape() const {
  return AnalyticShape::from_params(parse_shape_kind(kind), shape_params);
}

SyntheticSequence generate_sequence(ShapeKind kind, std::uint64_t seed,
                                    std::size_t T, std::size_t N,
                                    std::size_t M, double bound,
                                    double noise_sigma) {
  if (T < 2) throw ConfigError("sequence needs T >= 2 frames");
  if (N < 10) throw ConfigError("sequence needs N >= 10 cloud points");
  if (M < 100) throw ConfigError("sequence needs M >= 100 queries");
  if (bound <= 0) throw ConfigError("bound must be positive");

  Rng shape_rng(Rng::mix(seed, 0xBEEFu));
  AnalyticShape shape = AnalyticShape::random(kind, shape_rng);
  Rng rng(Rng::mix(seed, 0xDA7Au));

  SyntheticSequence seq;
  seq.kind = shape_kind_name(kind);
  seq.seed = seed;
  seq.shape_params = shape.params();
  for (std::size_t i = 0; i < T; ++i) {
    double t = quant(static_cast<double>(i) / static_cast<double>(T - 1));
    seq.times.push_back(t);
    seq.angles.push_back(quant(shape.angle(t)));
  }

  // Tracked correspondence points: a clean frame-0 surface sample, mapped
  // analytically to every frame (exact doubles; quantized only on disk).
  Tensor<double> base = shape.surface_sample(rng, seq.times[0], N);

  for (std::size_t i = 0; i < T; ++i) {
    double t = seq.times[i];

    Tensor<double> cloud = shape.surface_sample(rng, t, N);
    for (auto& v : cloud.values) v = quant(v + noise_sigma * rng.gaussian());
    seq.clouds.push_back(std::move(cloud));

    Tensor<double> queries(M, 3);
    Tensor<double> labels(M, 1);
    std::size_t uniform_count = M / 2;
    for (std::size_t j = 0; j < M; ++j) {
      std::array<double, 3> q;
      if (j < uniform_count) {
        for (auto& c : q) c = rng.uniform(-bound, bound);
      } else {
        Tensor<double> s = shape.surface_sample(rng, t, 1);
        for (std::size_t d = 0; d < 3; ++d)
          q[d] = s.values[d] + kNearSurfaceSigma * rng.gaussian();
      }
      for (std::size_t d = 0; d < 3; ++d) queries.at(j, d) = quant(q[d]);
      labels.values[j] =
          shape.occupied({queries.at(j, 0), queries.at(j, 1), queries.at(j, 2)},
                         t)
              ? 1.0
              : 0.0;
    }
    seq.queries.push_back(std::move(queries));
    seq.labels.push_back(std::move(labels));

    Tensor<double> mapped(N, 3);
    for (std::size_t k = 0; k < N; ++k) {
      auto m = shape.correspond({base.at(k, 0), base.at(k, 1), base.at(k, 2)},
                                seq.times[0], t);
      for (std::size_t d = 0; d < 3; ++d) mapped.at(k, d) = m[d];
    }
    seq.corr.push_back(std::move(mapped));
  }
  return seq;
}

Dataset generate_dataset(ShapeKind kind, std::uint64_t seed,
                         std::size_t sequences, std::size_t T, std::size_t N,
                         std::size_t M, double bound) {
  if (sequences < 1) throw ConfigError("dataset needs at least one sequence");
  Dataset ds;
  ds.kind = shape_kind_name(kind);
  ds.seed = seed;
  ds.frames = T;
  ds.cloud_points = N;
  ds.query_points = M;
  ds.bound = bound;
  for (std::size_t s = 0; s < sequences; ++s)
    ds.sequences.push_back(generate_sequence(
        kind, Rng::mix(seed, 0x5E9000u + s), T, N, M, bound));
  return ds;
}

namespace {

json f32_field(const std::vector<double>& flat,
               std::vector<std::size_t> shape) {
  std::vector<float> f(flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i)
    f[i] = static_cast<float>(flat[i]);
  return {{"dtype", "f32"}, {"shape", shape}, {"data", encode_array(f)}};
}

json u8_field(const std::vector<std::uint8_t>& flat,
              std::vector<std::size_t> shape) {
  return {{"dtype", "u8"}, {"shape", shape}, {"data", encode_array(flat)}};
}

std::vector<double> flatten(const std::vector<Tensor<double>>& ts) {
  std::vector<double> out;
  for (const auto& t : ts)
    out.insert(out.end(), t.values.begin(), t.values.end());
  return out;
}

std::string seq_filename(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "seq_%03zu.json", index);
  return buf;
}

const json& require_field(const json& j, const std::string& key) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError("missing field '" + key + "'");
  return *it;
}

// Decode an array field, enforcing dtype and exact shape.
template <class T>
std::vector<T> read_array(const json& j, const std::string& key,
                          const char* dtype,
                          const std::vector<std::size_t>& want_shape) {
  const json& field = require_field(j, key);
  if (require_field(field, "dtype").get<std::string>() != dtype)
    throw ParseError("field '" + key + "' must have dtype " + dtype);
  auto shape = require_field(field, "shape").get<std::vector<std::size_t>>();
  if (shape != want_shape) {
    throw ParseError("field '" + key + "' has shape " + shape_str(shape) +
                     ", expected " + shape_str(want_shape));
  }
  std::size_t count = 1;
  for (std::size_t s : shape) count *= s;
  auto data =
      decode_array<T>(require_field(field, "data").get<std::string>());
  if (data.size() != count)
    throw ParseError("field '" + key + "' holds " +
                     std::to_string(data.size()) + " values, expected " +
                     std::to_string(count));
  return data;
}

std::vector<Tensor<double>> unflatten(const std::vector<float>& flat,
                                      std::size_t frames, std::size_t rows,
                                      std::size_t cols) {
  std::vector<Tensor<double>> out;
  for (std::size_t f = 0; f < frames; ++f) {
    Tensor<double> t(rows, cols);
    for (std::size_t i = 0; i < rows * cols; ++i)
      t.values[i] = static_cast<double>(flat[f * rows * cols + i]);
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  json meta = {{"format", 1},
               {"kind", ds.kind},
               {"seed", ds.seed},
               {"T", ds.frames},
               {"N", ds.cloud_points},
               {"M", ds.query_points},
               {"bound", ds.bound},
               {"sequences", ds.sequences.size()}};
  write_file_atomic(dir / "meta.json", meta.dump(2) + "\n");

  for (std::size_t s = 0; s < ds.sequences.size(); ++s) {
    const SyntheticSequence& q = ds.sequences[s];
    std::size_t T = q.times.size(), N = q.clouds[0].rows(),
                M = q.queries[0].rows();
    std::vector<std::uint8_t> lab;
    for (const auto& fr : q.labels)
      for (double v : fr.values) lab.push_back(v != 0.0 ? 1 : 0);
    json j = {{"kind", q.kind},
              {"seed", q.seed},
              {"shape", q.shape_params},
              {"times", f32_field(q.times, {T})},
              {"angles", f32_field(q.angles, {T})},
              {"clouds", f32_field(flatten(q.clouds), {T, N, 3})},
              {"queries", f32_field(flatten(q.queries), {T, M, 3})},
              {"labels", u8_field(lab, {T, M})},
              {"corr", f32_field(flatten(q.corr), {T, N, 3})}};
    write_file_atomic(dir / seq_filename(s), j.dump(2) + "\n");
  }
}

Dataset load_dataset(const std::filesystem::path& dir) {
  auto meta_path = dir / "meta.json";
  if (!std::filesystem::exists(meta_path))
    throw ParseError("meta.json: not found under " + dir.string());

  Dataset ds;
  std::size_t count = 0;
  try {
    json meta = json::parse(read_file(meta_path));
    if (require_field(meta, "format").get<int>() != 1)
      throw ParseError("unsupported format version");
    ds.kind = require_field(meta, "kind").get<std::string>();
    parse_shape_kind(ds.kind);
    ds.seed = require_field(meta, "seed").get<std::uint64_t>();
    ds.frames = require_field(meta, "T").get<std::size_t>();
    ds.cloud_points = require_field(meta, "N").get<std::size_t>();
    ds.query_points = require_field(meta, "M").get<std::size_t>();
    ds.bound = require_field(meta, "bound").get<double>();
    count = require_field(meta, "sequences").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ParseError("meta.json: " + std::string(e.what()));
  } catch (const ParseError& e) {
    throw ParseError("meta.json: " + std::string(e.what()));
  } catch (const ConfigError& e) {
    throw ParseError("meta.json: " + std::string(e.what()));
  }

  std::size_t T = ds.frames, N = ds.cloud_points, M = ds.query_points;
  for (std::size_t s = 0; s < count; ++s) {
    std::string fname = seq_filename(s);
    try {
      json j = json::parse(read_file(dir / fname));
      SyntheticSequence q;
      q.kind = require_field(j, "kind").get<std::string>();
      parse_shape_kind(q.kind);
      q.seed = require_field(j, "seed").get<std::uint64_t>();
      q.shape_params = require_field(j, "shape")
                           .get<std::map<std::string, double>>();
      auto times = read_array<float>(j, "times", "f32", {T});
      auto angles = read_array<float>(j, "angles", "f32", {T});
      for (std::size_t i = 0; i < T; ++i) {
        q.times.push_back(static_cast<double>(times[i]));
        q.angles.push_back(static_cast<double>(angles[i]));
      }
      q.clouds =
          unflatten(read_array<float>(j, "clouds", "f32", {T, N, 3}), T, N, 3);
      q.queries = unflatten(read_array<float>(j, "queries", "f32", {T, M, 3}),
                            T, M, 3);
      q.corr =
          unflatten(read_array<float>(j, "corr", "f32", {T, N, 3}), T, N, 3);
      auto lab = read_array<std::uint8_t>(j, "labels", "u8", {T, M});
      for (std::size_t f = 0; f < T; ++f) {
        Tensor<double> l(M, 1);
        for (std::size_t i = 0; i < M; ++i) {
          std::uint8_t v = lab[f * M + i];
          if (v > 1)
            throw ParseError("field 'labels' has non-binary value " +
                             std::to_string(int(v)));
          l.values[i] = v;
        }
        q.labels.push_back(std::move(l));
      }
      q.shape();  // validates kind/params pairing early
      ds.sequences.push_back(std::move(q));
    } catch (const json::exception& e) {
      throw ParseError(fname + ": " + std::string(e.what()));
    } catch (const ParseError& e) {
      throw ParseError(fname + ": " + std::string(e.what()));
    } catch (const ConfigError& e) {
      throw ParseError(fname + ": " + std::string(e.what()));
    }
  }
  return ds;
}

}  // namespace dynsurf

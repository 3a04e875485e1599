// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dynsurf/rng.hpp"
#include "dynsurf/tensor.hpp"

namespace dynsurf {

enum class ShapeKind : std::uint8_t {
  TranslatingSphere,
  ScalingSphere,
  BendingBar,
  HingePair,
};

ShapeKind parse_shape_kind(const std::string& name);  // unknown -> ConfigError
const char* shape_kind_name(ShapeKind kind);

// A deforming solid with everything decidable in closed form: occupancy at
// any (point, time), the deformation map between any two times (bijective on
// the solid), and area-uniform surface sampling. Ground truth for training
// and evaluation comes from these three, never from the model.
class AnalyticShape {
 public:
  static AnalyticShape random(ShapeKind kind, Rng& rng);
  static AnalyticShape from_params(ShapeKind kind,
                                   const std::map<std::string, double>& params);

  ShapeKind kind() const { return kind_; }
  const std::map<std::string, double>& params() const { return params_; }

  bool occupied(const std::array<double, 3>& p, double t) const;
  std::array<double, 3> correspond(const std::array<double, 3>& p, double t_i,
                                   double t_j) const;
  Tensor<double> surface_sample(Rng& rng, double t, std::size_t n) const;

  // Scalar articulation driver for the SET encoder: the hinge/bend angle
  // where one exists, normalized time otherwise.
  double angle(double t) const;

 private:
  AnalyticShape(ShapeKind kind, std::map<std::string, double> params);
  double get(const std::string& name) const;

  ShapeKind kind_;
  std::map<std::string, double> params_;
};

// One generated sequence plus its exact supervision. Clouds, queries, and
// their labels are float32-quantized up front (labels computed on the
// quantized points), so the in-memory arrays mean exactly what the files
// store. Correspondence targets stay full-precision doubles in memory — the
// analytic-map identities hold exactly there — and quantize only on disk.
struct SyntheticSequence {
  std::string kind;
  std::uint64_t seed = 0;
  std::map<std::string, double> shape_params;
  std::vector<double> times;             // T, in [0,1]
  std::vector<double> angles;            // T, AnalyticShape::angle at times
  std::vector<Tensor<double>> clouds;    // T x [N,3], noisy observations
  std::vector<Tensor<double>> queries;   // T x [M,3]
  std::vector<Tensor<double>> labels;    // T x [M,1], 0/1
  std::vector<Tensor<double>> corr;      // T x [N,3]; corr[0] = tracked points

  AnalyticShape shape() const;
};

struct Dataset {
  std::string kind;
  std::uint64_t seed = 0;
  std::size_t frames = 17;       // T
  std::size_t cloud_points = 300;  // N
  std::size_t query_points = 2048;  // M
  double bound = 0.6;            // queries uniform in [-bound, bound]^3
  std::vector<SyntheticSequence> sequences;
};

inline constexpr double kCloudNoiseSigma = 0.005;
inline constexpr double kNearSurfaceSigma = 0.05;

SyntheticSequence generate_sequence(ShapeKind kind, std::uint64_t seed,
                                    std::size_t T, std::size_t N,
                                    std::size_t M, double bound = 0.6,
                                    double noise_sigma = kCloudNoiseSigma);

Dataset generate_dataset(ShapeKind kind, std::uint64_t seed,
                         std::size_t sequences = 1, std::size_t T = 17,
                         std::size_t N = 300, std::size_t M = 2048,
                         double bound = 0.6);

void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace dynsurf

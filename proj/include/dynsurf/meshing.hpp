// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dynsurf/errors.hpp"
#include "dynsurf/marching_cubes.hpp"
#include "dynsurf/model.hpp"
#include "dynsurf/tensor.hpp"

namespace dynsurf {

struct MeshingConfig {
  std::size_t resolution = 64;  // cells per axis
  double iso = 0.5;
  double bound = 0.6;           // grid spans [-bound, bound]^3
  std::size_t chunk = 8192;     // field-evaluation batch size

  void validate() const {
    if (resolution < 8)
      throw ConfigError("meshing resolution must be >= 8, got " +
                        std::to_string(resolution));
    if (!(iso > 0.0 && iso < 1.0))
      throw ConfigError("iso level must lie strictly inside (0, 1)");
    if (bound <= 0.0) throw ConfigError("meshing bound must be positive");
    if (chunk == 0) throw ConfigError("meshing chunk must be positive");
  }
};

// One reconstructed animation: per-frame vertex arrays over one shared
// triangulation. Surface extraction runs once (on the first frame); every
// other frame reuses its connectivity through the canonical anchors.
struct ExtractResult {
  std::vector<Tensor<double>> frame_vertices;        // [V, 3] each
  Tensor<double> canonical_vertices;                 // the shared anchors
  std::vector<std::array<std::uint32_t, 3>> faces;   // shared
  std::uint64_t mc_calls = 0;  // marching-cubes invocations consumed here
};

namespace detail {

template <class Real>
Tensor<Real> to_real(const Tensor<double>& t) {
  Tensor<Real> out(t.rows(), t.cols());
  for (std::size_t i = 0; i < t.size(); ++i)
    out.values[i] = static_cast<Real>(t.values[i]);
  return out;
}

template <class Real>
Tensor<double> to_double(const Tensor<Real>& t) {
  Tensor<double> out(t.rows(), t.cols());
  for (std::size_t i = 0; i < t.size(); ++i)
    out.values[i] = static_cast<double>(t.values[i]);
  return out;
}

}  // namespace detail

// Occupancy of frame `code` sampled on the regular grid: the canonical
// field pulled back through the map, evaluated in deformed coordinates.
template <class Real>
OccupancyGrid sample_occupancy_grid(const Model<Real>& model,
                                    const Tensor<Real>& code,
                                    const Tensor<Real>& g,
                                    const MeshingConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.resolution + 1;
  OccupancyGrid grid;
  grid.nx = grid.ny = grid.nz = n;
  grid.origin = {-cfg.bound, -cfg.bound, -cfg.bound};
  grid.spacing = 2.0 * cfg.bound / static_cast<double>(cfg.resolution);
  grid.values.resize(n * n * n);

  std::vector<double> coord(n);
  for (std::size_t i = 0; i < n; ++i)
    coord[i] = grid.origin[0] + grid.spacing * static_cast<double>(i);

  const std::size_t total = n * n * n;
  for (std::size_t start = 0; start < total; start += cfg.chunk) {
    const std::size_t count = std::min(cfg.chunk, total - start);
    Tensor<Real> pts(count, 3);
    for (std::size_t r = 0; r < count; ++r) {
      std::size_t flat = start + r;
      pts.at(r, 0) = static_cast<Real>(coord[flat % n]);
      pts.at(r, 1) = static_cast<Real>(coord[(flat / n) % n]);
      pts.at(r, 2) = static_cast<Real>(coord[flat / (n * n)]);
    }
    Tensor<Real> uvw = model.flow.forward_raw(model.params, pts, code);
    Tensor<Real> occ =
        model.shape.occupancy_query_raw(model.params, uvw, g);
    for (std::size_t r = 0; r < count; ++r)
      grid.values[start + r] = static_cast<double>(occ.values[r]);
  }
  return grid;
}

// Mesh every frame of a sequence with shared connectivity: marching cubes
// runs once on the first frame, its vertices are lifted to the canonical
// pose through that frame's map, and each output frame re-poses those
// anchors through its own inverse map. Throws NoSurfaceError when the iso
// level is empty inside the grid.
template <class Real>
ExtractResult extract_sequence(const Model<Real>& model,
                               const std::vector<Tensor<Real>>& codes,
                               const Tensor<Real>& g,
                               const MeshingConfig& cfg) {
  cfg.validate();
  if (codes.empty()) throw InputError("extract_sequence needs >= 1 frame");

  const std::uint64_t calls_before = marching_cubes_invocations();
  OccupancyGrid grid = sample_occupancy_grid(model, codes[0], g, cfg);
  TriangleMesh first = marching_cubes(grid, cfg.iso);
  if (first.faces.empty())
    throw NoSurfaceError("no surface crosses the iso level at resolution " +
                         std::to_string(cfg.resolution));

  Tensor<Real> anchors = model.flow.forward_raw(
      model.params, detail::to_real<Real>(first.vertices), codes[0]);

  ExtractResult out;
  out.canonical_vertices = detail::to_double(anchors);
  out.faces = std::move(first.faces);
  out.frame_vertices.reserve(codes.size());
  for (const auto& code : codes)
    out.frame_vertices.push_back(detail::to_double(
        model.flow.inverse_raw(model.params, anchors, code)));
  out.mc_calls = marching_cubes_invocations() - calls_before;
  return out;
}

}  // namespace dynsurf

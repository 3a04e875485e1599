// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dynsurf/tensor.hpp"

namespace dynsurf {

// Regular scalar grid of nx*ny*nz node samples (x fastest). Node (i,j,k)
// sits at origin + spacing * (i,j,k).
struct OccupancyGrid {
  std::size_t nx = 0, ny = 0, nz = 0;
  std::array<double, 3> origin = {0.0, 0.0, 0.0};
  double spacing = 1.0;
  std::vector<double> values;

  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return values[(k * ny + j) * nx + i];
  }
};

struct TriangleMesh {
  Tensor<double> vertices;                          // [V, 3]
  std::vector<std::array<std::uint32_t, 3>> faces;  // CCW seen from outside
};

// Classic 256-case marching cubes at level `iso` (field > iso counts as
// inside). Vertices on shared cell edges are welded, so closed level sets
// come out watertight. Throws DimensionError on malformed grids.
TriangleMesh marching_cubes(const OccupancyGrid& grid, double iso);

// Process-wide call count. The sequence-reconstruction contract is one
// extraction per sequence -- not per frame -- and tests pin that here.
std::uint64_t marching_cubes_invocations();

}  // namespace dynsurf

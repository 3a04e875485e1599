// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "dynsurf/marching_cubes.hpp"
#include "dynsurf/rng.hpp"
#include "dynsurf/tensor.hpp"

namespace dynsurf {

// Intersection over union of two binary label sets. Two empty sets agree
// perfectly (1.0); mismatched lengths raise InputError.
double iou(const std::vector<std::uint8_t>& a,
           const std::vector<std::uint8_t>& b);

// Symmetric Chamfer distance between two point sets [*, 3]: the average of
// mean nearest-neighbour distances in both directions, unsquared L2.
// Either side empty raises InputError.
double chamfer(const Tensor<double>& a, const Tensor<double>& b);

// Mean L2 distance between paired rows of [N, 3] tensors.
double correspondence_error(const Tensor<double>& pred,
                            const Tensor<double>& target);

// Area-weighted uniform surface samples from a triangle mesh, [count, 3].
// Degenerate input (no faces / zero total area) raises InputError.
Tensor<double> sample_mesh_surface(const TriangleMesh& mesh,
                                   std::size_t count, Rng& rng);

}  // namespace dynsurf

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dynsurf/marching_cubes.hpp"
#include "dynsurf/tensor.hpp"

namespace dynsurf {

// Wavefront OBJ text for one triangle mesh: optional `# ...` header line,
// then "v x y z" (9 significant digits) and 1-based "f a b c" rows. The
// face block depends only on `faces`, so meshes sharing connectivity
// produce byte-identical face sections.
std::string obj_text(const Tensor<double>& vertices,
                     const std::vector<std::array<std::uint32_t, 3>>& faces,
                     const std::string& comment = "");

void write_obj(const std::filesystem::path& path,
               const Tensor<double>& vertices,
               const std::vector<std::array<std::uint32_t, 3>>& faces,
               const std::string& comment = "");

// Minimal reader for the subset obj_text emits (v/f rows, # comments).
// Out-of-range or non-triangular faces raise ParseError.
TriangleMesh parse_obj(const std::string& text);

// frame_0000.obj, frame_0001.obj, ... under `dir` with shared `faces`.
void write_obj_sequence(
    const std::filesystem::path& dir,
    const std::vector<Tensor<double>>& frame_vertices,
    const std::vector<std::array<std::uint32_t, 3>>& faces);

}  // namespace dynsurf

// SPDX-License-Identifier: Apache-2.0
#include "dynsurf/obj_io.hpp"

#include <cstdio>
#include <sstream>

#include "dynsurf/errors.hpp"
#include "dynsurf/fsutil.hpp"

namespace dynsurf {

std::string obj_text(const Tensor<double>& vertices,
                     const std::vector<std::array<std::uint32_t, 3>>& faces,
                     const std::string& comment) {
  if (vertices.cols() != 3)
    throw DimensionError("obj vertices must be [V, 3], got " +
                         shape_str(vertices));
  std::string out;
  out.reserve(32 * vertices.rows() + 24 * faces.size());
  if (!comment.empty()) out += "# " + comment + "\n";
  char line[96];
  for (std::size_t i = 0; i < vertices.rows(); ++i) {
    std::snprintf(line, sizeof line, "v %.9g %.9g %.9g\n", vertices.at(i, 0),
                  vertices.at(i, 1), vertices.at(i, 2));
    out += line;
  }
  for (const auto& f : faces) {
    std::snprintf(line, sizeof line, "f %u %u %u\n", f[0] + 1, f[1] + 1,
                  f[2] + 1);
    out += line;
  }
  return out;
}

void write_obj(const std::filesystem::path& path,
               const Tensor<double>& vertices,
               const std::vector<std::array<std::uint32_t, 3>>& faces,
               const std::string& comment) {
  write_file_atomic(path, obj_text(vertices, faces, comment));
}

TriangleMesh parse_obj(const std::string& text) {
  std::vector<double> verts;
  std::vector<std::array<std::uint32_t, 3>> faces;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string tag;
    row >> tag;
    if (tag == "v") {
      double x, y, z;
      if (!(row >> x >> y >> z))
        throw ParseError("obj line " + std::to_string(lineno) +
                         ": malformed vertex");
      verts.insert(verts.end(), {x, y, z});
    } else if (tag == "f") {
      long long a, b, c;
      if (!(row >> a >> b >> c))
        throw ParseError("obj line " + std::to_string(lineno) +
                         ": malformed face");
      long long extra;
      if (row >> extra)
        throw ParseError("obj line " + std::to_string(lineno) +
                         ": only triangles are supported");
      long long n = static_cast<long long>(verts.size() / 3);
      for (long long v : {a, b, c})
        if (v < 1 || v > n)
          throw ParseError("obj line " + std::to_string(lineno) +
                           ": face index out of range");
      faces.push_back({static_cast<std::uint32_t>(a - 1),
                       static_cast<std::uint32_t>(b - 1),
                       static_cast<std::uint32_t>(c - 1)});
    }
    // other tags (vn, vt, o, ...) are ignored
  }
  TriangleMesh mesh;
  mesh.vertices = Tensor<double>(verts.size() / 3, 3);
  mesh.vertices.values = std::move(verts);
  mesh.faces = std::move(faces);
  return mesh;
}

void write_obj_sequence(
    const std::filesystem::path& dir,
    const std::vector<Tensor<double>>& frame_vertices,
    const std::vector<std::array<std::uint32_t, 3>>& faces) {
  std::filesystem::create_directories(dir);
  for (std::size_t f = 0; f < frame_vertices.size(); ++f) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04zu.obj", f);
    write_obj(dir / name, frame_vertices[f], faces,
              "frame " + std::to_string(f));
  }
}

}  // namespace dynsurf

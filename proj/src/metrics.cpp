// SPDX-License-Identifier: Apache-2.0
#include "dynsurf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dynsurf/errors.hpp"

namespace dynsurf {

double iou(const std::vector<std::uint8_t>& a,
           const std::vector<std::uint8_t>& b) {
  if (a.size() != b.size())
    throw InputError("iou needs equally sized label sets, got " +
                     std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    bool va = a[i] != 0, vb = b[i] != 0;
    inter += va && vb;
    uni += va || vb;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

double mean_nearest(const Tensor<double>& from, const Tensor<double>& to) {
  double total = 0.0;
  for (std::size_t i = 0; i < from.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    double x = from.at(i, 0), y = from.at(i, 1), z = from.at(i, 2);
    for (std::size_t j = 0; j < to.rows(); ++j) {
      double dx = x - to.at(j, 0), dy = y - to.at(j, 1), dz = z - to.at(j, 2);
      best = std::min(best, dx * dx + dy * dy + dz * dz);
    }
    total += std::sqrt(best);
  }
  return total / static_cast<double>(from.rows());
}

void expect_points(const Tensor<double>& t, const char* side) {
  if (t.cols() != 3)
    throw InputError(std::string(side) + " point set must be [*, 3], got " +
                     shape_str(t));
  if (t.rows() == 0)
    throw InputError(std::string(side) + " point set is empty");
}

}  // namespace

double chamfer(const Tensor<double>& a, const Tensor<double>& b) {
  expect_points(a, "first");
  expect_points(b, "second");
  return 0.5 * (mean_nearest(a, b) + mean_nearest(b, a));
}

double correspondence_error(const Tensor<double>& pred,
                            const Tensor<double>& target) {
  expect_points(pred, "predicted");
  expect_points(target, "target");
  if (pred.rows() != target.rows())
    throw InputError("correspondence sets must pair up row for row, got " +
                     shape_str(pred) + " vs " + shape_str(target));
  double total = 0.0;
  for (std::size_t i = 0; i < pred.rows(); ++i) {
    double dx = pred.at(i, 0) - target.at(i, 0);
    double dy = pred.at(i, 1) - target.at(i, 1);
    double dz = pred.at(i, 2) - target.at(i, 2);
    total += std::sqrt(dx * dx + dy * dy + dz * dz);
  }
  return total / static_cast<double>(pred.rows());
}

Tensor<double> sample_mesh_surface(const TriangleMesh& mesh,
                                   std::size_t count, Rng& rng) {
  if (mesh.faces.empty()) throw InputError("cannot sample an empty mesh");
  std::vector<double> cumulative(mesh.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const double* a = &mesh.vertices.values[mesh.faces[f][0] * 3];
    const double* b = &mesh.vertices.values[mesh.faces[f][1] * 3];
    const double* c = &mesh.vertices.values[mesh.faces[f][2] * 3];
    double ux = b[0] - a[0], uy = b[1] - a[1], uz = b[2] - a[2];
    double vx = c[0] - a[0], vy = c[1] - a[1], vz = c[2] - a[2];
    double cx = uy * vz - uz * vy;
    double cy = uz * vx - ux * vz;
    double cz = ux * vy - uy * vx;
    total += 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
    cumulative[f] = total;
  }
  if (total <= 0.0) throw InputError("mesh has zero surface area");

  Tensor<double> out(count, 3);
  for (std::size_t i = 0; i < count; ++i) {
    double pick = rng.uniform(0.0, total);
    std::size_t f = static_cast<std::size_t>(
        std::lower_bound(cumulative.begin(), cumulative.end(), pick) -
        cumulative.begin());
    if (f >= mesh.faces.size()) f = mesh.faces.size() - 1;
    const double* a = &mesh.vertices.values[mesh.faces[f][0] * 3];
    const double* b = &mesh.vertices.values[mesh.faces[f][1] * 3];
    const double* c = &mesh.vertices.values[mesh.faces[f][2] * 3];
    // square-root warp gives uniform barycentric coverage
    double su = std::sqrt(rng.uniform(0.0, 1.0));
    double v = rng.uniform(0.0, 1.0);
    double wa = 1.0 - su, wb = su * (1.0 - v), wc = su * v;
    for (int d = 0; d < 3; ++d)
      out.at(i, d) = wa * a[d] + wb * b[d] + wc * c[d];
  }
  return out;
}

}  // namespace dynsurf

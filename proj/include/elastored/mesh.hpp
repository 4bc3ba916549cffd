#pragma once

#include <Eigen/Core>

#include <array>
#include <map>
#include <string>
#include <vector>

#include "elastored/errors.hpp"
#include "elastored/types.hpp"

namespace elastored {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Boundary-condition layout for a rectangular block. The default is the
/// quasi-static compression setup: bottom edge fixed vertically, bottom-left
/// corner fixed horizontally.
struct BoundarySpec {
  bool bottom_fixed_y = true;
  bool bottom_fixed_x = false;
  bool corner_fixed_x = true;
  /// Additional prescribed dofs; overrides the flags for the same dof.
  std::map<int, double> extra;
};

/// Uniform triangulation of [0, width] x [0, height]. Node (i, j) sits at
/// (i * width / nx, j * height / ny) and has index j * (nx + 1) + i. Dof 2n is
/// the x component of node n, 2n + 1 the y component.
struct Mesh {
  int nx = 0;
  int ny = 0;
  double width = 0.0;
  double height = 0.0;
  std::vector<Point> nodes;
  std::vector<std::array<int, 3>> elements;
  /// dof -> prescribed value, ordered by dof.
  std::map<int, double> dirichlet;

  int node_count() const { return int(nodes.size()); }
  int dof_count() const { return 2 * node_count(); }
  int node_index(int i, int j) const { return j * (nx + 1) + i; }
  RasterDims raster() const { return {ny + 1, nx + 1}; }

  double signed_area(int e) const {
    const auto& t = elements.at(std::size_t(e));
    const Point& a = nodes[std::size_t(t[0])];
    const Point& b = nodes[std::size_t(t[1])];
    const Point& c = nodes[std::size_t(t[2])];
    return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
  }
};

/// Plane-strain isotropic material; only Poisson's ratio is carried since the
/// modulus is the unknown field.
struct MaterialModel {
  double poisson_ratio = 0.45;

  void validate() const {
    if (!(poisson_ratio >= 0.0 && poisson_ratio <= 0.49))
      throw InvalidArgument("poisson_ratio must lie in [0, 0.49], got " +
                            std::to_string(poisson_ratio));
  }
};

inline std::map<int, double> boundary_dofs(int nx, int ny, const BoundarySpec& bc) {
  (void)ny;
  std::map<int, double> out;
  for (int i = 0; i <= nx; ++i) {
    if (bc.bottom_fixed_y) out[2 * i + 1] = 0.0;
    if (bc.bottom_fixed_x) out[2 * i] = 0.0;
  }
  if (bc.corner_fixed_x) out[0] = 0.0;
  for (const auto& [dof, value] : bc.extra) out[dof] = value;
  return out;
}

inline Mesh build_rect_mesh(int nx, int ny, double width, double height,
                            const BoundarySpec& bc = {}) {
  if (nx < 1 || ny < 1) throw InvalidArgument("build_rect_mesh: nx and ny must be >= 1");
  if (!(width > 0.0) || !(height > 0.0))
    throw InvalidArgument("build_rect_mesh: width and height must be positive");

  Mesh m;
  m.nx = nx;
  m.ny = ny;
  m.width = width;
  m.height = height;
  m.nodes.reserve(std::size_t(nx + 1) * std::size_t(ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      m.nodes.push_back({width * double(i) / nx, height * double(j) / ny});

  m.elements.reserve(std::size_t(2 * nx * ny));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int n00 = m.node_index(i, j);
      const int n10 = m.node_index(i + 1, j);
      const int n01 = m.node_index(i, j + 1);
      const int n11 = m.node_index(i + 1, j + 1);
      m.elements.push_back({n00, n10, n11});
      m.elements.push_back({n00, n11, n01});
    }
  }

  m.dirichlet = boundary_dofs(nx, ny, bc);
  const int ndof = m.dof_count();
  for (const auto& [dof, value] : m.dirichlet) {
    (void)value;
    if (dof < 0 || dof >= ndof)
      throw InvalidArgument("build_rect_mesh: constrained dof " + std::to_string(dof) +
                            " out of range");
  }
  return m;
}

/// Consistent nodal loads for a uniform normal traction of magnitude
/// `pressure` pushing down on the top edge (negative y direction).
inline ForceField top_traction(const Mesh& mesh, double pressure) {
  ForceField f = ForceField::zeros(mesh.dof_count());
  const double seg = mesh.width / mesh.nx;
  for (int i = 0; i < mesh.nx; ++i) {
    const int a = mesh.node_index(i, mesh.ny);
    const int b = mesh.node_index(i + 1, mesh.ny);
    f[2 * a + 1] -= 0.5 * pressure * seg;
    f[2 * b + 1] -= 0.5 * pressure * seg;
  }
  return f;
}

}  // namespace elastored

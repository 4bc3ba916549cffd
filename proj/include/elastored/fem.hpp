#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <cmath>
#include <string>
#include <vector>

#include "elastored/errors.hpp"
#include "elastored/mesh.hpp"
#include "elastored/types.hpp"

namespace elastored {

using SparseMatrix = Eigen::SparseMatrix<double>;
using ElementMatrix = Eigen::Matrix<double, 6, 6>;

/// Global stiffness K(E) together with the E = 1 element matrices it was
/// scattered from.
struct StiffnessSystem {
  SparseMatrix K;
  std::vector<ElementMatrix> unit_element_stiffnesses;
};

/// Plane-strain constitutive matrix for E = 1 in Voigt order (xx, yy, xy).
inline Eigen::Matrix3d plane_strain_unit_constitutive(const MaterialModel& mat) {
  mat.validate();
  const double nu = mat.poisson_ratio;
  const double s = 1.0 / ((1.0 + nu) * (1.0 - 2.0 * nu));
  Eigen::Matrix3d c;
  c << 1.0 - nu, nu, 0.0,
       nu, 1.0 - nu, 0.0,
       0.0, 0.0, 0.5 * (1.0 - 2.0 * nu);
  return s * c;
}

/// Constant-strain-triangle stiffness A * B^T C0 B for E = 1. Local dof order
/// is (x0, y0, x1, y1, x2, y2).
inline ElementMatrix unit_element_stiffness(const Mesh& mesh, const MaterialModel& mat,
                                            int elem) {
  if (elem < 0 || elem >= int(mesh.elements.size()))
    throw InvalidArgument("unit_element_stiffness: element index out of range");
  const auto& t = mesh.elements[std::size_t(elem)];
  const Point& p0 = mesh.nodes[std::size_t(t[0])];
  const Point& p1 = mesh.nodes[std::size_t(t[1])];
  const Point& p2 = mesh.nodes[std::size_t(t[2])];

  const double area = mesh.signed_area(elem);
  const double scale = std::abs(p1.x - p0.x) + std::abs(p2.x - p0.x) +
                       std::abs(p1.y - p0.y) + std::abs(p2.y - p0.y);
  if (!(area > 1e-14 * scale * scale))
    throw GeometryError("element " + std::to_string(elem) +
                        " is degenerate or clockwise (signed area " + std::to_string(area) + ")");

  const double b[3] = {p1.y - p2.y, p2.y - p0.y, p0.y - p1.y};
  const double c[3] = {p2.x - p1.x, p0.x - p2.x, p1.x - p0.x};

  Eigen::Matrix<double, 3, 6> B = Eigen::Matrix<double, 3, 6>::Zero();
  for (int k = 0; k < 3; ++k) {
    B(0, 2 * k) = b[k];
    B(1, 2 * k + 1) = c[k];
    B(2, 2 * k) = c[k];
    B(2, 2 * k + 1) = b[k];
  }
  B /= 2.0 * area;

  const ElementMatrix ke = area * (B.transpose() * plane_strain_unit_constitutive(mat) * B);
  // Symmetrize to kill rounding asymmetry; K = K^T must hold exactly.
  return 0.5 * (ke + ke.transpose());
}

inline std::vector<ElementMatrix> unit_element_stiffnesses(const Mesh& mesh,
                                                           const MaterialModel& mat) {
  std::vector<ElementMatrix> out;
  out.reserve(mesh.elements.size());
  for (int e = 0; e < int(mesh.elements.size()); ++e)
    out.push_back(unit_element_stiffness(mesh, mat, e));
  return out;
}

inline void check_positive(const ElasticityField& E, const char* where) {
  for (Eigen::Index i = 0; i < E.size(); ++i)
    if (!(E[i] > 0.0))
      throw DomainError(std::string(where) + ": elasticity entry " + std::to_string(i) +
                        " is not positive (" + std::to_string(E[i]) + ")");
}

namespace detail {

inline int global_dof(const std::array<int, 3>& tri, int local) {
  return 2 * tri[std::size_t(local / 2)] + (local % 2);
}

/// Scatters sum_e weight_e * Ke into a 2N x 2N sparse matrix. Triplets are
/// emitted in element order, so the summation order per entry is fixed.
inline SparseMatrix scatter_stiffness(const Mesh& mesh, const std::vector<ElementMatrix>& unit,
                                      const Vector& element_weight) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(unit.size() * 36);
  for (std::size_t e = 0; e < unit.size(); ++e) {
    const auto& tri = mesh.elements[e];
    const double w = element_weight[Eigen::Index(e)];
    for (int a = 0; a < 6; ++a)
      for (int b = 0; b < 6; ++b)
        trip.emplace_back(global_dof(tri, a), global_dof(tri, b), w * unit[e](a, b));
  }
  SparseMatrix K(mesh.dof_count(), mesh.dof_count());
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

inline Vector element_means(const Mesh& mesh, const ElasticityField& E) {
  Vector w(Eigen::Index(mesh.elements.size()));
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    const auto& t = mesh.elements[e];
    w[Eigen::Index(e)] = (E[t[0]] + E[t[1]] + E[t[2]]) / 3.0;
  }
  return w;
}

}  // namespace detail

/// K(E) with nodal E averaged onto each element. Skips the positivity check
/// so linearity can be tested with arbitrary E.
inline SparseMatrix assemble_K_unchecked(const Mesh& mesh, const std::vector<ElementMatrix>& unit,
                                         const ElasticityField& E) {
  require_size(E.size(), mesh.node_count(), "assemble_K");
  return detail::scatter_stiffness(mesh, unit, detail::element_means(mesh, E));
}

inline StiffnessSystem assemble_K(const Mesh& mesh, const MaterialModel& mat,
                                  const ElasticityField& E) {
  require_size(E.size(), mesh.node_count(), "assemble_K");
  check_positive(E, "assemble_K");
  StiffnessSystem sys;
  sys.unit_element_stiffnesses = unit_element_stiffnesses(mesh, mat);
  sys.K = assemble_K_unchecked(mesh, sys.unit_element_stiffnesses, E);
  return sys;
}

/// D(u), the 2N x N operator with D(u) E = K(E) u.
inline SparseMatrix assemble_D(const Mesh& mesh, const std::vector<ElementMatrix>& unit,
                               const DisplacementField& u) {
  require_size(u.size(), mesh.dof_count(), "assemble_D");
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(mesh.elements.size() * 18);
  Eigen::Matrix<double, 6, 1> ue;
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    const auto& tri = mesh.elements[e];
    for (int a = 0; a < 6; ++a) ue[a] = u[detail::global_dof(tri, a)];
    const Eigen::Matrix<double, 6, 1> fe = unit[e] * ue / 3.0;
    for (int node = 0; node < 3; ++node)
      for (int a = 0; a < 6; ++a) trip.emplace_back(detail::global_dof(tri, a), tri[std::size_t(node)], fe[a]);
  }
  SparseMatrix D(mesh.dof_count(), mesh.node_count());
  D.setFromTriplets(trip.begin(), trip.end());
  return D;
}

inline SparseMatrix assemble_D(const Mesh& mesh, const MaterialModel& mat,
                               const DisplacementField& u) {
  return assemble_D(mesh, unit_element_stiffnesses(mesh, mat), u);
}

/// Solves K(E) u = f on the free dofs with prescribed values on the
/// constrained ones, by elimination and a sparse Cholesky factorization.
inline DisplacementField solve_forward(const Mesh& mesh, const SparseMatrix& K,
                                       const ForceField& f) {
  const int ndof = mesh.dof_count();
  require_size(f.size(), ndof, "solve_forward");
  if (mesh.dirichlet.empty())
    throw SingularSystemError("solve_forward: no Dirichlet constraints; rigid-body motion is free");

  std::vector<int> free_index(std::size_t(ndof), -1);
  int nfree = 0;
  for (int d = 0; d < ndof; ++d)
    if (!mesh.dirichlet.count(d)) free_index[std::size_t(d)] = nfree++;

  Vector prescribed = Vector::Zero(ndof);
  for (const auto& [dof, value] : mesh.dirichlet) prescribed[dof] = value;

  Vector rhs(nfree);
  for (int d = 0; d < ndof; ++d)
    if (free_index[std::size_t(d)] >= 0) rhs[free_index[std::size_t(d)]] = f[d];
  const Vector lift = K * prescribed;
  for (int d = 0; d < ndof; ++d)
    if (free_index[std::size_t(d)] >= 0) rhs[free_index[std::size_t(d)]] -= lift[d];

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(std::size_t(K.nonZeros()));
  for (int col = 0; col < K.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(K, col); it; ++it) {
      const int r = free_index[std::size_t(it.row())];
      const int c = free_index[std::size_t(it.col())];
      if (r >= 0 && c >= 0) trip.emplace_back(r, c, it.value());
    }
  SparseMatrix Kff(nfree, nfree);
  Kff.setFromTriplets(trip.begin(), trip.end());

  Eigen::SimplicialLLT<SparseMatrix> llt(Kff);
  if (llt.info() != Eigen::Success)
    throw SingularSystemError("solve_forward: reduced stiffness is not positive definite");
  Vector uf = llt.solve(rhs);
  Vector res = rhs - Kff * uf;
  const double rhs_norm = rhs.norm();
  if (rhs_norm > 0.0 && res.norm() > 1e-10 * rhs_norm) {
    uf += llt.solve(res);
    res = rhs - Kff * uf;
  }
  if (!uf.allFinite() || (rhs_norm > 0.0 && res.norm() > 1e-10 * rhs_norm))
    throw SingularSystemError("solve_forward: residual " + std::to_string(res.norm() / rhs_norm) +
                              " above 1e-10");

  DisplacementField u(prescribed);
  for (int d = 0; d < ndof; ++d)
    if (free_index[std::size_t(d)] >= 0) u[d] = uf[free_index[std::size_t(d)]];
  return u;
}

inline DisplacementField solve_forward(const Mesh& mesh, const MaterialModel& mat,
                                       const ElasticityField& E, const ForceField& f) {
  return solve_forward(mesh, assemble_K(mesh, mat, E).K, f);
}

}  // namespace elastored

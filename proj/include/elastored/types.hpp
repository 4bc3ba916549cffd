#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <string>

#include "elastored/errors.hpp"

namespace elastored {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A vector of nodal quantities tagged with its physical meaning so that an
/// elasticity field cannot be passed where a displacement is expected.
template <class Tag>
struct NodalVector {
  Vector values;

  NodalVector() = default;
  explicit NodalVector(Vector v) : values(std::move(v)) {}
  static NodalVector zeros(Eigen::Index n) { return NodalVector(Vector::Zero(n)); }
  static NodalVector constant(Eigen::Index n, double c) {
    return NodalVector(Vector::Constant(n, c));
  }

  Eigen::Index size() const { return values.size(); }
  double operator[](Eigen::Index i) const { return values[i]; }
  double& operator[](Eigen::Index i) { return values[i]; }

  friend bool operator==(const NodalVector& a, const NodalVector& b) {
    return a.values.size() == b.values.size() && a.values == b.values;
  }
};

struct ElasticityTag;
struct DisplacementTag;
struct ForceTag;

/// Young's modulus per node; 1.0 corresponds to 100 kPa.
using ElasticityField = NodalVector<ElasticityTag>;
/// Interleaved (x, y) nodal displacements, length 2N.
using DisplacementField = NodalVector<DisplacementTag>;
/// Interleaved (x, y) nodal forces, length 2N.
using ForceField = NodalVector<ForceTag>;

/// Shape of the nodal raster: rows = ny + 1, cols = nx + 1.
/// Node (i, j) maps to raster (row j, col i), row-major.
struct RasterDims {
  int rows = 0;
  int cols = 0;

  Eigen::Index size() const { return Eigen::Index(rows) * cols; }
  friend bool operator==(const RasterDims&, const RasterDims&) = default;
};

inline void require_size(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want)
    throw InvalidArgument(std::string(what) + ": expected length " + std::to_string(want) +
                          ", got " + std::to_string(got));
}

inline double rms(const Vector& v) {
  return v.size() == 0 ? 0.0 : std::sqrt(v.squaredNorm() / double(v.size()));
}

}  // namespace elastored

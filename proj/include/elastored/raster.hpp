#pragma once

#include <Eigen/Core>

#include "elastored/types.hpp"

namespace elastored {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Half-sample symmetric reflection of an index into [0, n):
/// ... 2 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
/// A symmetric kernel applied with this boundary is a symmetric operator
/// and preserves constants.
inline int reflect_index(int i, int n) {
  const int period = 2 * n;
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

inline RowMajorMatrix to_raster(const Vector& field, const RasterDims& dims) {
  require_size(field.size(), dims.size(), "to_raster");
  return Eigen::Map<const RowMajorMatrix>(field.data(), dims.rows, dims.cols);
}

inline Vector from_raster(const RowMajorMatrix& raster) {
  return Eigen::Map<const Vector>(raster.data(), raster.size());
}

}  // namespace elastored

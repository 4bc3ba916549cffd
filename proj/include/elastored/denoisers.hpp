#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "elastored/cnn.hpp"
#include "elastored/errors.hpp"
#include "elastored/raster.hpp"
#include "elastored/rng.hpp"
#include "elastored/types.hpp"

namespace elastored {

struct IdentityDenoiser {};
struct ZeroDenoiser {};

/// Separable normalized Gaussian, radius ceil(3 sigma).
struct GaussianBlur {
  double sigma_px = 1.0;
};

/// size x size median window (size odd).
struct MedianFilter {
  int size = 3;
};

/// ROF model min_u 1/2 |u - f|^2 + weight * TV(u) solved with Chambolle's
/// dual projection iteration.
struct TotalVariation {
  double weight = 0.05;
  int iterations = 100;
  double tau = 0.125;
};

struct CnnDenoiser {
  std::shared_ptr<const CnnModel> model;
  std::string weights_path;
};

using DenoiserKind =
    std::variant<IdentityDenoiser, ZeroDenoiser, GaussianBlur, MedianFilter, TotalVariation, CnnDenoiser>;

/// A denoiser C: field -> field acting on the nodal raster view.
struct Denoiser {
  DenoiserKind kind;
  RasterDims dims;

  std::string name() const {
    return std::visit(
        [](const auto& k) -> std::string {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, IdentityDenoiser>) return "identity";
          else if constexpr (std::is_same_v<K, ZeroDenoiser>) return "zero";
          else if constexpr (std::is_same_v<K, GaussianBlur>) return "gaussian_blur";
          else if constexpr (std::is_same_v<K, MedianFilter>) return "median";
          else if constexpr (std::is_same_v<K, TotalVariation>) return "tv";
          else return "cnn";
        },
        kind);
  }
};

inline Denoiser cnn_denoiser(const std::string& weights_path, RasterDims dims) {
  auto model = std::make_shared<const CnnModel>(cnn_load(weights_path));
  return {CnnDenoiser{std::move(model), weights_path}, dims};
}

inline std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) return {1.0};
  const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
  std::vector<double> k(std::size_t(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[std::size_t(i + radius)] = std::exp(-0.5 * double(i * i) / (sigma * sigma));
    sum += k[std::size_t(i + radius)];
  }
  for (double& v : k) v /= sum;
  return k;
}

namespace detail {

inline RowMajorMatrix blur(const RowMajorMatrix& img, double sigma) {
  const std::vector<double> k = gaussian_kernel(sigma);
  const int radius = int(k.size() / 2);
  const int rows = int(img.rows());
  const int cols = int(img.cols());
  RowMajorMatrix tmp(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double s = 0.0;
      for (int t = -radius; t <= radius; ++t)
        s += k[std::size_t(t + radius)] * img(r, reflect_index(c + t, cols));
      tmp(r, c) = s;
    }
  RowMajorMatrix out(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double s = 0.0;
      for (int t = -radius; t <= radius; ++t)
        s += k[std::size_t(t + radius)] * tmp(reflect_index(r + t, rows), c);
      out(r, c) = s;
    }
  return out;
}

inline RowMajorMatrix median(const RowMajorMatrix& img, int size) {
  if (size < 1 || size % 2 == 0) throw InvalidArgument("median window size must be odd and >= 1");
  const int h = size / 2;
  const int rows = int(img.rows());
  const int cols = int(img.cols());
  RowMajorMatrix out(rows, cols);
  std::vector<double> win(std::size_t(size * size));
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      std::size_t n = 0;
      for (int dr = -h; dr <= h; ++dr)
        for (int dc = -h; dc <= h; ++dc)
          win[n++] = img(reflect_index(r + dr, rows), reflect_index(c + dc, cols));
      auto mid = win.begin() + std::ptrdiff_t(win.size() / 2);
      std::nth_element(win.begin(), mid, win.end());
      out(r, c) = *mid;
    }
  return out;
}

// Forward differences with a zero last row/column (Neumann boundary).
inline void gradient(const RowMajorMatrix& u, RowMajorMatrix& gx, RowMajorMatrix& gy) {
  const Eigen::Index rows = u.rows(), cols = u.cols();
  gx.setZero(rows, cols);
  gy.setZero(rows, cols);
  if (cols > 1) gx.leftCols(cols - 1) = u.rightCols(cols - 1) - u.leftCols(cols - 1);
  if (rows > 1) gy.topRows(rows - 1) = u.bottomRows(rows - 1) - u.topRows(rows - 1);
}

// Negative adjoint of gradient().
inline RowMajorMatrix divergence(const RowMajorMatrix& px, const RowMajorMatrix& py) {
  const Eigen::Index rows = px.rows(), cols = px.cols();
  RowMajorMatrix d = RowMajorMatrix::Zero(rows, cols);
  if (cols > 1) {
    d.leftCols(cols - 1) += px.leftCols(cols - 1);
    d.rightCols(cols - 1) -= px.leftCols(cols - 1);
  }
  if (rows > 1) {
    d.topRows(rows - 1) += py.topRows(rows - 1);
    d.bottomRows(rows - 1) -= py.topRows(rows - 1);
  }
  return d;
}

inline RowMajorMatrix tv_chambolle(const RowMajorMatrix& f, const TotalVariation& tv) {
  if (!(tv.weight > 0.0) || tv.iterations <= 0) return f;
  RowMajorMatrix px = RowMajorMatrix::Zero(f.rows(), f.cols());
  RowMajorMatrix py = px;
  RowMajorMatrix gx, gy;
  for (int it = 0; it < tv.iterations; ++it) {
    gradient(divergence(px, py) - f / tv.weight, gx, gy);
    const RowMajorMatrix denom =
        (1.0 + tv.tau * (gx.array().square() + gy.array().square()).sqrt()).matrix();
    px = ((px + tv.tau * gx).array() / denom.array()).matrix();
    py = ((py + tv.tau * gy).array() / denom.array()).matrix();
  }
  return f - tv.weight * divergence(px, py);
}

}  // namespace detail

inline Vector denoise(const Denoiser& d, const Vector& field) {
  require_size(field.size(), d.dims.size(), "denoise");
  return std::visit(
      [&](const auto& k) -> Vector {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, IdentityDenoiser>) {
          return field;
        } else if constexpr (std::is_same_v<K, ZeroDenoiser>) {
          return Vector::Zero(field.size());
        } else if constexpr (std::is_same_v<K, GaussianBlur>) {
          return from_raster(detail::blur(to_raster(field, d.dims), k.sigma_px));
        } else if constexpr (std::is_same_v<K, MedianFilter>) {
          return from_raster(detail::median(to_raster(field, d.dims), k.size));
        } else if constexpr (std::is_same_v<K, TotalVariation>) {
          return from_raster(detail::tv_chambolle(to_raster(field, d.dims), k));
        } else {
          if (!k.model) throw LoadError("cnn denoiser has no loaded weights");
          return cnn_infer(*k.model, field, d.dims);
        }
      },
      d.kind);
}

inline ElasticityField denoise(const Denoiser& d, const ElasticityField& E) {
  return ElasticityField(denoise(d, E.values));
}

/// RED regularizer gradient: E - C(E). No differentiation of C.
inline Vector red_grad(const Denoiser& d, const Vector& E) { return E - denoise(d, E); }

/// RED regularizer value: 1/2 E^T (E - C(E)).
inline double red_value(const Denoiser& d, const Vector& E) { return 0.5 * E.dot(red_grad(d, E)); }

struct RedConditionReport {
  double homogeneity_defect = 0.0;
  double passivity_estimate = 0.0;
  bool passed = false;
};

inline constexpr double kRedConditionTolerance = 1e-3;

/// Local homogeneity defect |C((1+delta)E) - (1+delta)C(E)| / |E| averaged over
/// the samples, and a power-iteration estimate of the Jacobian norm built from
/// finite-difference directional derivatives (maximum over samples).
inline RedConditionReport check_red_conditions(const Denoiser& d, const std::vector<Vector>& samples,
                                               int power_iterations = 50) {
  if (samples.empty()) throw InvalidArgument("check_red_conditions: need at least one sample");
  constexpr double delta = 1e-3;
  RedConditionReport rep;

  double hsum = 0.0;
  for (const Vector& E : samples) {
    const double en = E.norm();
    const Vector diff = denoise(d, Vector((1.0 + delta) * E)) - (1.0 + delta) * denoise(d, E);
    hsum += en > 0.0 ? diff.norm() / en : diff.norm();
  }
  rep.homogeneity_defect = hsum / double(samples.size());

  Xoshiro256 rng(0x5eedULL);
  for (const Vector& E : samples) {
    const Vector base = denoise(d, E);
    const double en = std::max(E.norm(), 1e-12);
    Vector v(E.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
    v.normalize();
    double estimate = 0.0;
    for (int it = 0; it < power_iterations; ++it) {
      const double h = 1e-5 * en;  // |v| = 1
      Vector jv = (denoise(d, Vector(E + h * v)) - base) / h;
      estimate = jv.norm();
      if (!(estimate > 0.0)) break;
      v = jv / estimate;
    }
    rep.passivity_estimate = std::max(rep.passivity_estimate, estimate);
  }
  rep.passed = rep.passivity_estimate <= 1.0 + kRedConditionTolerance &&
               rep.homogeneity_defect <= kRedConditionTolerance;
  return rep;
}

}  // namespace elastored

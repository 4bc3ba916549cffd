#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "elastored/errors.hpp"
#include "elastored/fem.hpp"
#include "elastored/mesh.hpp"
#include "elastored/rng.hpp"
#include "elastored/types.hpp"

namespace elastored {

/// Binary inclusion mask on the nodal raster (1 = inclusion).
struct Mask {
  RasterDims dims;
  std::vector<std::uint8_t> data;

  static Mask empty(RasterDims d) { return {d, std::vector<std::uint8_t>(std::size_t(d.size()), 0)}; }
  bool at(int r, int c) const { return data[std::size_t(r * dims.cols + c)] != 0; }
  std::size_t count() const {
    std::size_t n = 0;
    for (auto v : data) n += v != 0;
    return n;
  }
  double fraction() const { return data.empty() ? 0.0 : double(count()) / double(data.size()); }
};

// Shape parameters are in normalized domain coordinates, (0,0) bottom-left and
// (1,1) top-right.
struct DiscShape {
  double cx = 0.5, cy = 0.5, radius = 0.2;
};
struct EllipseShape {
  double cx = 0.5, cy = 0.5, semi_x = 0.25, semi_y = 0.15, angle = 0.0;
};
struct TwoDiscsShape {
  DiscShape first{0.3, 0.5, 0.12};
  DiscShape second{0.7, 0.5, 0.12};
};
using MaskShape = std::variant<DiscShape, EllipseShape, TwoDiscsShape>;

namespace detail {

inline void require_inside(double cx, double cy, double ex, double ey) {
  constexpr double eps = 1e-12;
  if (cx - ex < -eps || cx + ex > 1.0 + eps || cy - ey < -eps || cy + ey > 1.0 + eps)
    throw InvalidArgument("inclusion does not fit inside the domain");
}

inline void paint_disc(Mask& m, const DiscShape& d) {
  require_inside(d.cx, d.cy, d.radius, d.radius);
  if (!(d.radius > 0.0)) return;
  for (int r = 0; r < m.dims.rows; ++r)
    for (int c = 0; c < m.dims.cols; ++c) {
      const double x = double(c) / (m.dims.cols - 1) - d.cx;
      const double y = double(r) / (m.dims.rows - 1) - d.cy;
      if (x * x + y * y <= d.radius * d.radius) m.data[std::size_t(r * m.dims.cols + c)] = 1;
    }
}

inline void paint_ellipse(Mask& m, const EllipseShape& e) {
  const double ca = std::cos(e.angle), sa = std::sin(e.angle);
  const double ex = std::sqrt(std::pow(e.semi_x * ca, 2) + std::pow(e.semi_y * sa, 2));
  const double ey = std::sqrt(std::pow(e.semi_x * sa, 2) + std::pow(e.semi_y * ca, 2));
  require_inside(e.cx, e.cy, ex, ey);
  if (!(e.semi_x > 0.0) || !(e.semi_y > 0.0)) return;
  for (int r = 0; r < m.dims.rows; ++r)
    for (int c = 0; c < m.dims.cols; ++c) {
      const double x = double(c) / (m.dims.cols - 1) - e.cx;
      const double y = double(r) / (m.dims.rows - 1) - e.cy;
      const double u = (ca * x + sa * y) / e.semi_x;
      const double v = (-sa * x + ca * y) / e.semi_y;
      if (u * u + v * v <= 1.0) m.data[std::size_t(r * m.dims.cols + c)] = 1;
    }
}

}  // namespace detail

inline Mask generate_mask(const MaskShape& shape, RasterDims dims) {
  if (dims.rows < 2 || dims.cols < 2) throw InvalidArgument("generate_mask: raster must be at least 2x2");
  Mask m = Mask::empty(dims);
  std::visit(
      [&](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, DiscShape>) {
          detail::paint_disc(m, s);
        } else if constexpr (std::is_same_v<S, EllipseShape>) {
          detail::paint_ellipse(m, s);
        } else {
          detail::paint_disc(m, s.first);
          detail::paint_disc(m, s.second);
        }
      },
      shape);
  return m;
}

enum class ShapeFamily { disc, ellipse, two_discs };

/// Draws random shape parameters for `family` until the inclusion covers
/// between 2% and 40% of the raster.
inline Mask random_mask(ShapeFamily family, RasterDims dims, std::uint64_t seed) {
  Xoshiro256 rng(seed);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    MaskShape shape;
    if (family == ShapeFamily::disc) {
      const double r = rng.uniform(0.1, 0.3);
      shape = DiscShape{rng.uniform(r, 1.0 - r), rng.uniform(r, 1.0 - r), r};
    } else if (family == ShapeFamily::ellipse) {
      const double a = rng.uniform(0.1, 0.3), b = rng.uniform(0.08, 0.25);
      const double ext = std::max(a, b);
      shape = EllipseShape{rng.uniform(ext, 1.0 - ext), rng.uniform(ext, 1.0 - ext), a, b,
                           rng.uniform(0.0, std::numbers::pi)};
    } else {
      const double r1 = rng.uniform(0.08, 0.18), r2 = rng.uniform(0.08, 0.18);
      DiscShape d1{rng.uniform(r1, 1.0 - r1), rng.uniform(r1, 1.0 - r1), r1};
      DiscShape d2{rng.uniform(r2, 1.0 - r2), rng.uniform(r2, 1.0 - r2), r2};
      const double gap = std::hypot(d1.cx - d2.cx, d1.cy - d2.cy) - r1 - r2;
      if (gap < 0.1) continue;
      shape = TwoDiscsShape{d1, d2};
    }
    Mask m = generate_mask(shape, dims);
    if (m.fraction() >= 0.02 && m.fraction() <= 0.40) return m;
  }
  throw InvalidArgument("random_mask: could not place an inclusion covering 2%-40% of the raster");
}

struct ValueRange {
  double low = 0.0;
  double high = 0.0;
};

struct PhantomSpec {
  Mask mask;
  ValueRange background{0.10, 0.15};
  ValueRange inclusion{0.30, 0.80};
  std::uint64_t seed = 0;
  /// When set, the inclusion value is ratio * background instead of an
  /// independent draw.
  std::optional<double> fixed_ratio;
};

inline constexpr double kMinContrast = 2.0;
inline constexpr double kMaxContrast = 8.0;

/// One uniform value for the background and one for the inclusion, redrawn
/// until the inclusion/background ratio lies in [2, 8].
inline ElasticityField draw_phantom(const PhantomSpec& spec) {
  const auto& bg = spec.background;
  const auto& inc = spec.inclusion;
  if (!(bg.low > 0.0 && bg.high >= bg.low && inc.low > 0.0 && inc.high >= inc.low))
    throw InvalidArgument("draw_phantom: value ranges must be positive and ordered");
  if (spec.fixed_ratio && !(*spec.fixed_ratio >= kMinContrast && *spec.fixed_ratio <= kMaxContrast))
    throw InvalidArgument("draw_phantom: fixed ratio must lie in [2, 8]");

  Xoshiro256 rng(spec.seed);
  double vb = 0.0, vi = 0.0;
  for (int attempt = 0;; ++attempt) {
    if (attempt == 10000) throw InvalidArgument("draw_phantom: ranges cannot satisfy the 2-8 ratio");
    vb = rng.uniform(bg.low, bg.high);
    vi = spec.fixed_ratio ? *spec.fixed_ratio * vb : rng.uniform(inc.low, inc.high);
    const double ratio = vi / vb;
    if (ratio >= kMinContrast && ratio <= kMaxContrast) break;
  }
  ElasticityField E(Vector(Eigen::Index(spec.mask.data.size())));
  for (std::size_t i = 0; i < spec.mask.data.size(); ++i)
    E[Eigen::Index(i)] = spec.mask.data[i] ? vi : vb;
  return E;
}

/// Force-noise level: either an absolute standard deviation or an SNR in dB
/// relative to RMS(f_true).
struct ForceNoiseSigma {
  double sigma = 0.0;
};
struct ForceNoiseSnr {
  double snr_db = 40.0;
};
using ForceNoiseSpec = std::variant<ForceNoiseSigma, ForceNoiseSnr>;

inline double sigma_for_snr(double signal_rms, double snr_db) {
  if (std::isinf(snr_db) && snr_db > 0) return 0.0;
  return signal_rms * std::pow(10.0, -snr_db / 20.0);
}

struct ObservationSet {
  DisplacementField u_clean;
  DisplacementField u_m;
  ForceField f_true;
  ForceField f;
  double sigma_n = 0.0;
  double sigma_w = 0.0;
  double snr_db = 0.0;
};

/// Clean displacements under a uniform top compression plus noisy copies:
/// u_m = u + n, n ~ N(0, sigma_n^2 I) with sigma_n = RMS(u) 10^(-snr/20), and
/// f = f_true + w. f_true includes the support reactions so that
/// K(E_true) u_clean = f_true holds on every dof.
inline ObservationSet make_observations(const Mesh& mesh, const MaterialModel& mat,
                                        const ElasticityField& E_true, double traction,
                                        double snr_db, const ForceNoiseSpec& force_noise,
                                        std::uint64_t seed) {
  if (std::isnan(snr_db) || (std::isinf(snr_db) && snr_db < 0))
    throw InvalidArgument("make_observations: snr_db must be finite or +inf");
  const StiffnessSystem sys = assemble_K(mesh, mat, E_true);
  ObservationSet obs;
  obs.snr_db = snr_db;
  obs.u_clean = solve_forward(mesh, sys.K, top_traction(mesh, traction));
  obs.f_true = ForceField(Vector(sys.K * obs.u_clean.values));
  obs.sigma_n = sigma_for_snr(rms(obs.u_clean.values), snr_db);
  obs.sigma_w = std::visit(
      [&](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, ForceNoiseSigma>) return s.sigma;
        else return sigma_for_snr(rms(obs.f_true.values), s.snr_db);
      },
      force_noise);
  if (!(obs.sigma_w >= 0.0)) throw InvalidArgument("make_observations: sigma_w must be >= 0");

  Xoshiro256 rng(seed);
  const Eigen::Index n = obs.u_clean.size();
  obs.u_m = obs.u_clean;
  obs.f = obs.f_true;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = rng.normal();
    if (obs.sigma_n > 0.0) obs.u_m[i] += obs.sigma_n * z;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = rng.normal();
    if (obs.sigma_w > 0.0) obs.f[i] += obs.sigma_w * z;
  }
  return obs;
}

}  // namespace elastored

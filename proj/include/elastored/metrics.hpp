#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "elastored/phantom.hpp"
#include "elastored/red_solver.hpp"
#include "elastored/types.hpp"

namespace elastored {

struct Metrics {
  double rmse = 0.0;
  double psnr = 0.0;             // +inf when rmse == 0
  std::optional<double> cnr;     // only when both mask regions are nonempty
};

/// PSNR uses the peak |truth| as signal level; CNR is measured on the
/// estimate: |mu_inc - mu_bg| / sqrt(var_inc + var_bg).
inline Metrics evaluate(const Vector& truth, const Vector& estimate, const Mask* mask = nullptr) {
  require_size(estimate.size(), truth.size(), "evaluate");
  Metrics m;
  m.rmse = rms(estimate - truth);
  const double peak = truth.cwiseAbs().maxCoeff();
  m.psnr = m.rmse == 0.0 ? std::numeric_limits<double>::infinity() : 20.0 * std::log10(peak / m.rmse);
  if (mask) {
    require_size(Eigen::Index(mask->data.size()), truth.size(), "evaluate(mask)");
    double s[2] = {0, 0}, s2[2] = {0, 0};
    std::size_t n[2] = {0, 0};
    for (std::size_t i = 0; i < mask->data.size(); ++i) {
      const int k = mask->data[i] ? 1 : 0;
      const double v = estimate[Eigen::Index(i)];
      s[k] += v;
      s2[k] += v * v;
      ++n[k];
    }
    if (n[0] > 0 && n[1] > 0) {
      double mu[2], var[2];
      for (int k = 0; k < 2; ++k) {
        mu[k] = s[k] / double(n[k]);
        var[k] = std::max(0.0, s2[k] / double(n[k]) - mu[k] * mu[k]);
      }
      const double denom = std::sqrt(var[0] + var[1]);
      m.cnr = denom > 0.0 ? std::abs(mu[1] - mu[0]) / denom : std::numeric_limits<double>::infinity();
    }
  }
  return m;
}

/// Row through the inclusion centroid; the middle row when the mask is empty.
inline int inclusion_center_row(const Mask& mask) {
  double sum = 0.0;
  std::size_t n = 0;
  for (int r = 0; r < mask.dims.rows; ++r)
    for (int c = 0; c < mask.dims.cols; ++c)
      if (mask.at(r, c)) {
        sum += r;
        ++n;
      }
  return n ? int(std::lround(sum / double(n))) : mask.dims.rows / 2;
}

inline Vector profile(const Vector& field, RasterDims dims, int row) {
  require_size(field.size(), dims.size(), "profile");
  if (row < 0 || row >= dims.rows) throw InvalidArgument("profile: row out of range");
  return field.segment(Eigen::Index(row) * dims.cols, dims.cols);
}

/// Mean absolute deviation between two profiles.
inline double profile_mad(const Vector& a, const Vector& b) {
  require_size(b.size(), a.size(), "profile_mad");
  return (a - b).cwiseAbs().mean();
}

inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string trace_csv(const std::vector<TraceRecord>& trace) {
  std::ostringstream os;
  os << "outer,inner,g,R,lambda,lambda_R,neg_log_likelihood,grad_g_norm,grad_R_norm,step_norm,step_size\n";
  for (const auto& t : trace)
    os << t.outer << ',' << t.inner << ',' << format_double(t.g) << ',' << format_double(t.R) << ','
       << format_double(t.lambda) << ',' << format_double(t.lambda_R) << ','
       << format_double(t.neg_log_likelihood) << ',' << format_double(t.grad_g_norm) << ','
       << format_double(t.grad_R_norm) << ',' << format_double(t.step_norm) << ','
       << format_double(t.step_size) << '\n';
  return os.str();
}

/// col, x (normalized), value[, truth]
inline std::string profile_csv(const Vector& values, const Vector* truth = nullptr) {
  std::ostringstream os;
  os << "col,x,value" << (truth ? ",truth" : "") << '\n';
  const Eigen::Index n = values.size();
  for (Eigen::Index c = 0; c < n; ++c) {
    os << c << ',' << format_double(n > 1 ? double(c) / double(n - 1) : 0.0) << ','
       << format_double(values[c]);
    if (truth) os << ',' << format_double((*truth)[c]);
    os << '\n';
  }
  return os.str();
}

}  // namespace elastored

#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cmath>
#include <limits>

#include "elastored/errors.hpp"
#include "elastored/fem.hpp"
#include "elastored/types.hpp"

namespace elastored {

/// Isotropic noise levels: force noise w ~ N(0, sigma_w^2 I) and displacement
/// noise n ~ N(0, sigma_n^2 I).
struct NoiseModel {
  double sigma_w = 0.0;
  double sigma_n = 0.0;
};

/// Factorized signal-dependent covariance
///   Gamma(E) = sigma_w^2 I + sigma_n^2 K(E) K(E)^T.
/// Gamma^{-1} is only ever applied through triangular solves.
class GammaFactor {
 public:
  GammaFactor(const SparseMatrix& K, const NoiseModel& noise) {
    if (!(noise.sigma_w >= 0.0) || !(noise.sigma_n >= 0.0))
      throw InvalidArgument("GammaFactor: noise levels must be non-negative");
    const Eigen::Index n = K.rows();
    if (noise.sigma_n > 0.0) {
      const SparseMatrix kkt = (K * SparseMatrix(K.transpose())).pruned();
      gamma_ = (noise.sigma_n * noise.sigma_n) * Matrix(kkt);
      // Products of the two triangles may differ in the last bit.
      gamma_ = (0.5 * (gamma_ + gamma_.transpose())).eval();
      gamma_.diagonal().array() += noise.sigma_w * noise.sigma_w;
    } else {
      gamma_ = Matrix::Zero(n, n);
      gamma_.diagonal().setConstant(noise.sigma_w * noise.sigma_w);
    }
    llt_.compute(gamma_);
    // Rounding leaves tiny positive pivots on a numerically singular Gamma.
    const double floor = double(n) * std::numeric_limits<double>::epsilon() *
                         (n > 0 ? gamma_.diagonal().maxCoeff() : 0.0);
    if (llt_.info() != Eigen::Success ||
        !(llt_.matrixLLT().diagonal().array().square() > floor).all())
      throw NotSpdError("Gamma is not positive definite (sigma_w = " +
                        std::to_string(noise.sigma_w) + ")");
    log_det_ = 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
  }

  const Matrix& gamma() const { return gamma_; }
  Matrix lower() const { return llt_.matrixL(); }
  double log_det() const { return log_det_; }
  Eigen::Index dim() const { return gamma_.rows(); }

  /// Gamma^{-1} v via forward and back substitution.
  Vector solve(const Vector& v) const {
    require_size(v.size(), dim(), "GammaFactor::solve");
    return llt_.solve(v);
  }

 private:
  Matrix gamma_;
  Eigen::LLT<Matrix> llt_;
  double log_det_ = 0.0;
};

inline GammaFactor compute_gamma(const StiffnessSystem& sys, const NoiseModel& noise) {
  return GammaFactor(sys.K, noise);
}

/// r = f - D(u^m) E
inline Vector fidelity_residual(const ElasticityField& E, const SparseMatrix& D_um,
                                const ForceField& f) {
  require_size(E.size(), D_um.cols(), "fidelity_residual(E)");
  require_size(f.size(), D_um.rows(), "fidelity_residual(f)");
  return f.values - D_um * E.values;
}

/// g(E) = 1/2 r^T Gamma^{-1} r
inline double data_fidelity(const ElasticityField& E, const SparseMatrix& D_um,
                            const ForceField& f, const GammaFactor& gammaf) {
  const Vector r = fidelity_residual(E, D_um, f);
  return 0.5 * r.dot(gammaf.solve(r));
}

/// grad g(E) = -D(u^m)^T Gamma^{-1} r, Gamma held fixed.
inline Vector data_fidelity_grad(const ElasticityField& E, const SparseMatrix& D_um,
                                 const ForceField& f, const GammaFactor& gammaf) {
  const Vector r = fidelity_residual(E, D_um, f);
  return -(D_um.transpose() * gammaf.solve(r));
}

/// g(E) + (N/2) log|Gamma| with N the node count. Monitoring only: the
/// log-determinant is never differentiated.
inline double neg_log_likelihood(const ElasticityField& E, const SparseMatrix& D_um,
                                 const ForceField& f, const GammaFactor& gammaf) {
  const double nodes = double(D_um.cols());
  return data_fidelity(E, D_um, f, gammaf) + 0.5 * nodes * gammaf.log_det();
}

}  // namespace elastored

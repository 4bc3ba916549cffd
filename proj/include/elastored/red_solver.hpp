#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "elastored/denoisers.hpp"
#include "elastored/errors.hpp"
#include "elastored/fem.hpp"
#include "elastored/mesh.hpp"
#include "elastored/stat_model.hpp"
#include "elastored/types.hpp"

namespace elastored {

enum class InitKind { ml, constant };

struct SolverConfig {
  /// Fixed step size; empty means 1 / L_hat with
  /// L_hat = |D^T Gamma^{-1} D| (power iteration) + 2 lambda.
  std::optional<double> step;
  /// Regularization weight; empty means |grad g(E_init)|.
  std::optional<double> lambda;
  int outer_iters = 20;
  int inner_iters = 50;
  /// Iteration budget of the unregularized (ML) estimate.
  int ml_iters = 20000;
  double tol = 1e-6;
  double e_min = 1e-4;
  InitKind e_init = InitKind::ml;
  double init_value = 0.12;
  bool lambda_refresh = false;
  int max_backtracks = 40;
  int divergence_limit = 10;
  int power_iterations = 30;

  void validate() const {
    if (step && !(*step > 0.0)) throw InvalidArgument("SolverConfig: step must be positive");
    if (lambda && !(*lambda >= 0.0)) throw InvalidArgument("SolverConfig: lambda must be >= 0");
    if (!(tol > 0.0)) throw InvalidArgument("SolverConfig: tol must be positive");
    if (!(e_min > 0.0)) throw InvalidArgument("SolverConfig: e_min must be positive");
    if (!(init_value > 0.0)) throw InvalidArgument("SolverConfig: init_value must be positive");
    if (outer_iters < 1 || inner_iters < 1 || ml_iters < 1)
      throw InvalidArgument("SolverConfig: iteration counts must be >= 1");
  }
};

/// One accepted gradient step.
struct TraceRecord {
  int outer = 0;
  int inner = 0;
  double g = 0.0;
  double R = 0.0;
  double lambda = 0.0;
  double lambda_R = 0.0;
  double neg_log_likelihood = 0.0;
  double grad_g_norm = 0.0;
  double grad_R_norm = 0.0;
  double step_norm = 0.0;
  double step_size = 0.0;
};

struct ReconstructionResult {
  ElasticityField E_hat;
  std::vector<TraceRecord> trace;
  int outer_iterations = 0;
  bool converged = false;
  double lambda = 0.0;
};

/// E <- max(e_min, E - step (grad_g + lambda grad_R)), entrywise.
inline Vector gd_step(const Vector& E, const Vector& grad_g, const Vector& grad_R, double step,
                      double lambda, double e_min) {
  require_size(grad_g.size(), E.size(), "gd_step(grad_g)");
  require_size(grad_R.size(), E.size(), "gd_step(grad_R)");
  Vector out = E - step * (grad_g + lambda * grad_R);
  return out.cwiseMax(e_min);
}

/// lambda = |grad g(E_init)|_2, the RED passivity bound taken with equality.
inline double auto_lambda(const Vector& grad_g_at_init) { return grad_g_at_init.norm(); }

namespace detail {

using InverseMetric = std::function<Vector(const Vector&)>;

/// Fidelity 1/2 r^T W r with W given by `apply_metric`, plus lambda R(E).
struct Objective {
  const SparseMatrix& D;
  const Vector& f;
  InverseMetric apply_metric;
  const Denoiser* denoiser = nullptr;  // null: no regularizer
  double lambda = 0.0;
  double log_det = 0.0;                // of Gamma, for the monitored likelihood

  struct Eval {
    Vector E;
    Vector weighted_residual;  // W r
    Vector grad_R;             // E - C(E)
    double g = 0.0;
    double R = 0.0;
    double total() const { return g + lambda_R; }
    double lambda_R = 0.0;
  };

  Eval evaluate(Vector E) const {
    Eval ev;
    const Vector r = f - D * E;
    ev.weighted_residual = apply_metric(r);
    ev.g = 0.5 * r.dot(ev.weighted_residual);
    if (denoiser) {
      ev.grad_R = red_grad(*denoiser, E);
      ev.R = 0.5 * E.dot(ev.grad_R);
    } else {
      ev.grad_R = Vector::Zero(E.size());
    }
    ev.lambda_R = lambda * ev.R;
    ev.E = std::move(E);
    return ev;
  }

  Vector grad_g(const Eval& ev) const { return -(D.transpose() * ev.weighted_residual); }

  /// Power iteration for |D^T W D|.
  double lipschitz(int iterations) const {
    Vector v = Vector::Ones(D.cols()).normalized();
    double est = 0.0;
    for (int k = 0; k < iterations; ++k) {
      const Vector w = D.transpose() * apply_metric(D * v);
      est = w.norm();
      if (!(est > 0.0)) break;
      v = w / est;
    }
    return est;
  }
};

struct InnerOutcome {
  Vector E;
  bool stalled = false;  // relative change fell below tol
};

/// Projected gradient descent with Gamma and lambda fixed; the step is halved
/// whenever the objective would increase.
inline InnerOutcome projected_gd(const Objective& obj, Vector E, double step, int iterations,
                                 const SolverConfig& cfg, int outer,
                                 std::vector<TraceRecord>& trace) {
  Objective::Eval cur = obj.evaluate(std::move(E));
  int increases = 0;
  InnerOutcome out;
  for (int it = 0; it < iterations; ++it) {
    const Vector gg = obj.grad_g(cur);
    Objective::Eval next;
    bool accepted = false;
    for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
      next = obj.evaluate(gd_step(cur.E, gg, cur.grad_R, step, obj.lambda, cfg.e_min));
      if (next.total() <= cur.total()) {
        accepted = true;
        break;
      }
      if (bt < cfg.max_backtracks) step *= 0.5;
    }
    increases = accepted ? 0 : increases + 1;
    if (increases >= cfg.divergence_limit)
      throw StepSizeError("objective increased on " + std::to_string(increases) +
                          " consecutive steps; use a smaller step size");

    const double step_norm = (next.E - cur.E).norm();
    TraceRecord rec;
    rec.outer = outer;
    rec.inner = it;
    rec.g = next.g;
    rec.R = next.R;
    rec.lambda = obj.lambda;
    rec.lambda_R = next.lambda_R;
    rec.neg_log_likelihood = next.g + 0.5 * double(obj.D.cols()) * obj.log_det;
    rec.grad_g_norm = gg.norm();
    rec.grad_R_norm = cur.grad_R.norm();
    rec.step_norm = step_norm;
    rec.step_size = step;
    trace.push_back(rec);

    const double base = cur.E.norm();
    cur = std::move(next);
    if (step_norm <= cfg.tol * base) {
      out.stalled = true;
      break;
    }
  }
  out.E = std::move(cur.E);
  return out;
}

inline double resolve_step(const SolverConfig& cfg, const Objective& obj) {
  if (cfg.step) return *cfg.step;
  const double L = obj.lipschitz(cfg.power_iterations) + 2.0 * obj.lambda;
  if (!(L > 0.0)) return 1.0;
  return 1.0 / L;
}

inline void check_observations(const Mesh& mesh, const ForceField& f, const DisplacementField& u_m) {
  require_size(f.size(), mesh.dof_count(), "force observations");
  require_size(u_m.size(), mesh.dof_count(), "displacement observations");
  if (!f.values.allFinite() || !u_m.values.allFinite())
    throw InvalidArgument("observations contain non-finite values");
}

}  // namespace detail

/// Unregularized estimate: minimizes 1/2 |f - D(u_m) E|^2 (Gamma = I) under
/// E >= e_min by projected gradient descent from a constant field.
inline ReconstructionResult ml_estimate(const Mesh& mesh, const MaterialModel& mat,
                                        const ForceField& f, const DisplacementField& u_m,
                                        const SolverConfig& cfg) {
  cfg.validate();
  detail::check_observations(mesh, f, u_m);
  const SparseMatrix D = assemble_D(mesh, mat, u_m);
  detail::Objective obj{D, f.values, [](const Vector& r) { return r; }};

  ReconstructionResult res;
  const double step = detail::resolve_step(cfg, obj);
  const Vector E0 = Vector::Constant(mesh.node_count(), cfg.init_value);
  auto inner = detail::projected_gd(obj, E0, step, cfg.ml_iters, cfg, 0, res.trace);
  res.E_hat = ElasticityField(std::move(inner.E));
  res.outer_iterations = 1;
  res.converged = inner.stalled;
  return res;
}

/// Fixed-point reconstruction: Gamma(E) is refreshed from the current iterate,
/// then `inner_iters` projected GD steps run on g(E) + lambda R(E) with Gamma
/// held fixed, until the outer relative change drops below tol.
inline ReconstructionResult reconstruct(const Mesh& mesh, const MaterialModel& mat,
                                        const ForceField& f, const DisplacementField& u_m,
                                        const NoiseModel& noise, const Denoiser& denoiser,
                                        const SolverConfig& cfg, const ElasticityField& E_init) {
  cfg.validate();
  detail::check_observations(mesh, f, u_m);
  require_size(E_init.size(), mesh.node_count(), "reconstruct(E_init)");
  require_size(denoiser.dims.size(), mesh.node_count(), "reconstruct(denoiser raster)");
  if (!(noise.sigma_w > 0.0)) throw InvalidArgument("reconstruct: sigma_w must be positive");

  const std::vector<ElementMatrix> unit = unit_element_stiffnesses(mesh, mat);
  const SparseMatrix D = assemble_D(mesh, unit, u_m);

  ReconstructionResult res;
  Vector E = E_init.values.cwiseMax(cfg.e_min);
  std::optional<double> lambda = cfg.lambda;

  for (int outer = 0; outer < cfg.outer_iters; ++outer) {
    const GammaFactor gamma(assemble_K_unchecked(mesh, unit, ElasticityField(E)), noise);
    detail::Objective obj{D, f.values, [&gamma](const Vector& r) { return gamma.solve(r); },
                          &denoiser, 0.0, gamma.log_det()};
    if (!lambda || (cfg.lambda_refresh && !cfg.lambda)) {
      const auto ev = obj.evaluate(E);
      lambda = auto_lambda(obj.grad_g(ev));
    }
    obj.lambda = *lambda;

    const double step = detail::resolve_step(cfg, obj);
    const Vector before = E;
    auto inner = detail::projected_gd(obj, E, step, cfg.inner_iters, cfg, outer, res.trace);
    E = std::move(inner.E);
    res.outer_iterations = outer + 1;

    const double change = (E - before).norm() / std::max(before.norm(), 1e-300);
    if (change < cfg.tol) {
      res.converged = true;
      break;
    }
  }
  res.E_hat = ElasticityField(std::move(E));
  res.lambda = lambda.value_or(0.0);
  return res;
}

inline ReconstructionResult reconstruct(const Mesh& mesh, const MaterialModel& mat,
                                        const ForceField& f, const DisplacementField& u_m,
                                        const NoiseModel& noise, const Denoiser& denoiser,
                                        const SolverConfig& cfg) {
  const ElasticityField init = cfg.e_init == InitKind::ml
                                   ? ml_estimate(mesh, mat, f, u_m, cfg).E_hat
                                   : ElasticityField::constant(mesh.node_count(), cfg.init_value);
  return reconstruct(mesh, mat, f, u_m, noise, denoiser, cfg, init);
}

}  // namespace elastored

#include <gtest/gtest.h>

#include <random>

#include "elastored/metrics.hpp"
#include "elastored/phantom.hpp"
#include "elastored/red_solver.hpp"

using namespace elastored;

namespace {

struct Clean {
  Mesh mesh;
  MaterialModel mat;
  ElasticityField E_true;
  DisplacementField u;
  ForceField f;

  Clean(int n, ElasticityField E) : mesh(build_rect_mesh(n, n, 1.0, 1.0)), E_true(std::move(E)) {
    const auto sys = assemble_K(mesh, mat, E_true);
    u = solve_forward(mesh, sys.K, top_traction(mesh, 0.01));
    f = ForceField(sys.K * u.values);
  }
};

ElasticityField disc_phantom(int n, double ratio) {
  PhantomSpec spec;
  spec.mask = generate_mask(DiscShape{0.5, 0.5, 0.2}, {n + 1, n + 1});
  spec.fixed_ratio = ratio;
  spec.seed = 1;
  return draw_phantom(spec);
}

}  // namespace

TEST(GdStep, ZeroGradientsLeaveEUnchanged) {
  const Vector E{{0.2, 0.3, 0.4}};
  const Vector z = Vector::Zero(3);
  EXPECT_TRUE(gd_step(E, z, z, 0.7, 3.0, 1e-4) == E);
}

TEST(GdStep, LambdaZeroIsPureFidelityStep) {
  const Vector E{{0.2, 0.3}};
  const Vector g{{1.0, -2.0}};
  const Vector r{{100.0, 100.0}};
  const Vector out = gd_step(E, g, r, 0.01, 0.0, 1e-4);
  EXPECT_DOUBLE_EQ(out[0], 0.2 - 0.01);
  EXPECT_DOUBLE_EQ(out[1], 0.3 + 0.02);
}

TEST(GdStep, NegativeEntryLandsOnFloor) {
  const Vector E{{0.2, 0.3}};
  const Vector g{{100.0, 0.0}};
  const Vector out = gd_step(E, g, Vector::Zero(2), 1.0, 0.0, 1e-4);
  EXPECT_EQ(out[0], 1e-4);
  EXPECT_EQ(out[1], 0.3);
  EXPECT_THROW(gd_step(E, Vector::Zero(3), Vector::Zero(2), 1.0, 0.0, 1e-4), InvalidArgument);
}

TEST(AutoLambda, EuclideanNorm) {
  EXPECT_EQ(auto_lambda(Vector{{3.0, 4.0, 0.0, 0.0}}), 5.0);
  EXPECT_EQ(auto_lambda(Vector::Zero(6)), 0.0);
}

TEST(SolverConfig, Validation) {
  SolverConfig c;
  EXPECT_NO_THROW(c.validate());
  c.step = 0.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.lambda = -1.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.tol = 0.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.e_min = 0.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.inner_iters = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(MlEstimate, StationaryAtCleanTruth) {
  SolverConfig cfg;
  Clean c(6, ElasticityField::constant(49, cfg.init_value));
  cfg.ml_iters = 5;
  const auto res = ml_estimate(c.mesh, c.mat, c.f, c.u, cfg);
  EXPECT_LE((res.E_hat.values - c.E_true.values).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(res.trace.front().grad_g_norm, 1e-12);
  EXPECT_TRUE(res.converged);
}

TEST(MlEstimate, CleanDataFidelityConverges) {
  Clean c(8, disc_phantom(8, 3.0));
  SolverConfig cfg;
  cfg.tol = 1e-15;
  cfg.ml_iters = 40000;  // plain GD is linear-rate on this conditioning
  const auto res = ml_estimate(c.mesh, c.mat, c.f, c.u, cfg);
  const double initial = 0.5 * (c.f.values - assemble_D(c.mesh, c.mat, c.u) *
                                                 Vector::Constant(c.mesh.node_count(), cfg.init_value))
                                   .squaredNorm();
  EXPECT_LE(res.trace.back().g, 1e-8 * initial);
  EXPECT_GE(res.E_hat.values.minCoeff(), cfg.e_min);
}

TEST(MlEstimate, RejectsMismatchedObservations) {
  Clean c(4, ElasticityField::constant(25, 0.2));
  EXPECT_THROW(ml_estimate(c.mesh, c.mat, ForceField(Vector::Zero(3)), c.u, SolverConfig{}), InvalidArgument);
  Vector bad = c.u.values;
  bad[0] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(ml_estimate(c.mesh, c.mat, c.f, DisplacementField(bad), SolverConfig{}), InvalidArgument);
}

TEST(MlEstimate, DivergenceRaisesStepSizeError) {
  Clean c(4, disc_phantom(4, 3.0));
  SolverConfig cfg;
  cfg.step = 1e6;
  cfg.max_backtracks = 0;
  try {
    ml_estimate(c.mesh, c.mat, c.f, c.u, cfg);
    FAIL() << "expected StepSizeError";
  } catch (const StepSizeError& e) {
    EXPECT_EQ(e.code(), "step_size");
  }
}

class Reconstruct : public ::testing::Test {
 protected:
  Clean c{8, disc_phantom(8, 3.0)};
  ObservationSet obs = make_observations(c.mesh, c.mat, c.E_true, 0.01, 35.0, ForceNoiseSnr{40.0}, 3);
  NoiseModel noise{obs.sigma_w, obs.sigma_n};
  RasterDims dims = c.mesh.raster();
  ElasticityField init = ElasticityField::constant(c.mesh.node_count(), 0.12);
};

TEST_F(Reconstruct, IdentityDenoiserIgnoresLambda) {
  SolverConfig cfg;
  cfg.outer_iters = 3;
  cfg.inner_iters = 20;
  cfg.lambda = 0.0;
  const Denoiser id{IdentityDenoiser{}, dims};
  const auto a = reconstruct(c.mesh, c.mat, obs.f, obs.u_m, noise, id, cfg, init);
  cfg.lambda = 123.0;
  cfg.step = a.trace.front().step_size;
  SolverConfig cfg0 = cfg;
  cfg0.lambda = 0.0;
  const auto b = reconstruct(c.mesh, c.mat, obs.f, obs.u_m, noise, id, cfg, init);
  const auto b0 = reconstruct(c.mesh, c.mat, obs.f, obs.u_m, noise, id, cfg0, init);
  EXPECT_TRUE(b.E_hat == b0.E_hat);
  ASSERT_EQ(b.trace.size(), b0.trace.size());
  for (std::size_t k = 0; k < b.trace.size(); ++k) EXPECT_EQ(b.trace[k].g, b0.trace[k].g);
}

TEST_F(Reconstruct, LambdaZeroIdentityMatchesMlStepForStep) {
  SolverConfig cfg;
  cfg.e_init = InitKind::constant;
  cfg.ml_iters = 300;
  cfg.outer_iters = 1;
  cfg.inner_iters = cfg.ml_iters;
  cfg.lambda = 0.0;
  const auto ml = ml_estimate(c.mesh, c.mat, obs.f, obs.u_m, cfg);
  const auto red = reconstruct(c.mesh, c.mat, obs.f, obs.u_m, {1.0, 0.0}, {IdentityDenoiser{}, dims}, cfg);
  EXPECT_TRUE(ml.E_hat == red.E_hat);
  ASSERT_EQ(ml.trace.size(), red.trace.size());
  for (std::size_t k = 0; k < ml.trace.size(); ++k) {
    EXPECT_EQ(ml.trace[k].g, red.trace[k].g) << k;
    EXPECT_EQ(ml.trace[k].step_size, red.trace[k].step_size) << k;
  }
}

TEST_F(Reconstruct, CleanDataAtTruthConvergesImmediately) {
  SolverConfig cfg;
  const auto res = reconstruct(c.mesh, c.mat, c.f, c.u, {1e-6, 0.0}, {GaussianBlur{1.0}, dims}, cfg, c.E_true);
  EXPECT_TRUE(res.converged);
  EXPECT_EQ(res.outer_iterations, 1);
  EXPECT_LE((res.E_hat.values - c.E_true.values).norm(), cfg.tol * c.E_true.values.norm());
}

TEST_F(Reconstruct, ObjectiveNonIncreasingWithinOuterLoop) {
  SolverConfig cfg;
  cfg.outer_iters = 4;
  cfg.inner_iters = 30;
  const auto res = reconstruct(c.mesh, c.mat, obs.f, obs.u_m, noise, {GaussianBlur{1.0}, dims}, cfg, init);
  ASSERT_FALSE(res.trace.empty());
  for (std::size_t k = 1; k < res.trace.size(); ++k) {
    const auto& prev = res.trace[k - 1];
    const auto& cur = res.trace[k];
    if (cur.outer != prev.outer) continue;
    EXPECT_LE(cur.g + cur.lambda_R, prev.g + prev.lambda_R) << k;
  }
  EXPECT_GT(res.lambda, 0.0);
  EXPECT_EQ(res.trace.front().lambda, res.lambda);
}

TEST_F(Reconstruct, IteratesRespectFloor) {
  SolverConfig cfg;
  cfg.e_min = 0.2;
  cfg.outer_iters = 2;
  cfg.inner_iters = 20;
  const auto res = reconstruct(c.mesh, c.mat, obs.f, obs.u_m, noise, {TotalVariation{}, dims}, cfg, init);
  EXPECT_GE(res.E_hat.values.minCoeff(), 0.2);
  EXPECT_EQ(res.E_hat.values.minCoeff(), 0.2);
}

TEST_F(Reconstruct, TraceIsPopulated) {
  SolverConfig cfg;
  cfg.outer_iters = 2;
  cfg.inner_iters = 5;
  cfg.tol = 1e-300;
  const auto res = reconstruct(c.mesh, c.mat, obs.f, obs.u_m, noise, {GaussianBlur{1.0}, dims}, cfg, init);
  ASSERT_EQ(res.trace.size(), 10u);
  EXPECT_EQ(res.outer_iterations, 2);
  EXPECT_FALSE(res.converged);
  for (std::size_t k = 0; k < res.trace.size(); ++k) {
    const auto& t = res.trace[k];
    EXPECT_EQ(t.outer, int(k / 5));
    EXPECT_EQ(t.inner, int(k % 5));
    for (double v : {t.g, t.R, t.lambda_R, t.neg_log_likelihood, t.grad_g_norm, t.grad_R_norm, t.step_size})
      EXPECT_TRUE(std::isfinite(v));
    EXPECT_GT(t.step_size, 0.0);
  }
}

TEST_F(Reconstruct, RequiresForceNoise) {
  EXPECT_THROW(reconstruct(c.mesh, c.mat, obs.f, obs.u_m, {0.0, 1e-3}, {IdentityDenoiser{}, dims}, SolverConfig{}, init),
               InvalidArgument);
  EXPECT_THROW(reconstruct(c.mesh, c.mat, obs.f, obs.u_m, noise, {IdentityDenoiser{}, {3, 3}}, SolverConfig{}, init),
               InvalidArgument);
}

TEST_F(Reconstruct, DeterministicRerun) {
  SolverConfig cfg;
  cfg.outer_iters = 2;
  cfg.inner_iters = 10;
  cfg.ml_iters = 200;
  const Denoiser d{TotalVariation{}, dims};
  const auto a = reconstruct(c.mesh, c.mat, obs.f, obs.u_m, noise, d, cfg);
  const auto b = reconstruct(c.mesh, c.mat, obs.f, obs.u_m, noise, d, cfg);
  EXPECT_TRUE(a.E_hat == b.E_hat);
  EXPECT_EQ(a.lambda, b.lambda);
}

TEST(ReconstructEndToEnd, BlurPriorBeatsMlOnDiscPhantom) {
  const Mesh mesh = build_rect_mesh(32, 32, 1.0, 1.0);
  const MaterialModel mat;
  PhantomSpec spec;
  spec.mask = generate_mask(DiscShape{0.5, 0.5, 0.2}, mesh.raster());
  spec.fixed_ratio = 4.0;
  spec.seed = 42;
  const ElasticityField truth = draw_phantom(spec);
  const auto obs = make_observations(mesh, mat, truth, 0.01, 35.0, ForceNoiseSnr{40.0}, 42);
  const SolverConfig cfg;
  const auto ml = ml_estimate(mesh, mat, obs.f, obs.u_m, cfg);
  const auto red = reconstruct(mesh, mat, obs.f, obs.u_m, {obs.sigma_w, obs.sigma_n},
                               {GaussianBlur{1.0}, mesh.raster()}, cfg, ml.E_hat);
  const double ml_rmse = evaluate(truth.values, ml.E_hat.values).rmse;
  const double red_rmse = evaluate(truth.values, red.E_hat.values).rmse;
  EXPECT_LT(red_rmse, ml_rmse);
  EXPECT_GE(red.E_hat.values.minCoeff(), cfg.e_min);
}

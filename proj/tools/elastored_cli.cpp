// Command-line front end: phantom -> simulate -> ml -> reconstruct -> eval,
// plus denoiser checks, rendering, profiles and training-pair export.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "elastored/elastored.hpp"

namespace el = elastored;
using el::Json;

namespace {

void emit(const Json& j, const std::string& out_path) {
  if (out_path.empty()) std::cout << j.dump(2) << "\n";
  else el::write_json_file(out_path, j);
}

void emit_text(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) std::cout << text;
  else el::write_file_bytes(out_path, text);
}

el::Mesh load_mesh(const std::string& path) { return el::mesh_from_json(el::read_json_file(path)); }

el::ElasticityField load_elasticity(const std::string& path, el::RasterDims dims) {
  return el::field_from_file<el::ElasticityField>(el::read_efld(path), el::FieldKind::elasticity, dims);
}

el::FieldFile load_elasticity_any(const std::string& path) {
  el::FieldFile ff = el::read_efld(path);
  if (ff.kind != el::FieldKind::elasticity) throw el::ParseError(path + ": not an elasticity field");
  return ff;
}

el::Mask load_mask(const std::string& path) { return el::decode_mask_pgm(el::read_file_bytes(path)); }

struct SolverFiles {
  el::SolverConfig cfg;
  el::MaterialModel mat;
  std::optional<Json> denoiser;
  std::optional<el::NoiseModel> noise;
};

SolverFiles load_solver_files(const std::string& config_path, std::optional<double> nu) {
  SolverFiles s;
  if (!config_path.empty()) {
    const Json j = el::read_json_file(config_path);
    s.cfg = el::solver_config_from_json(j);
    if (j.contains("poisson_ratio")) s.mat.poisson_ratio = j.at("poisson_ratio").get<double>();
    if (j.contains("denoiser")) s.denoiser = j.at("denoiser");
    if (j.contains("noise")) s.noise = el::noise_from_json(j.at("noise"));
  }
  if (nu) s.mat.poisson_ratio = *nu;
  s.mat.validate();
  return s;
}

Json result_summary(const el::ReconstructionResult& r) {
  return {{"outer_iterations", r.outer_iterations},
          {"steps", r.trace.size()},
          {"converged", r.converged},
          {"lambda", r.lambda},
          {"final_g", r.trace.empty() ? 0.0 : r.trace.back().g}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Elasticity reconstruction with regularization by denoising"};
  app.require_subcommand(1);

  // phantom
  auto* phantom = app.add_subcommand("phantom", "Generate a ground-truth elasticity phantom");
  int nx = 32, ny = 32;
  double width = 1.0, height = 1.0;
  std::string shape = "disc", mask_in, truth_out, mask_out, mesh_out;
  double cx = 0.5, cy = 0.5, radius = 0.2, semi_x = 0.25, semi_y = 0.15, angle = 0.0;
  std::vector<double> second_disc;
  bool random_shape = false;
  std::optional<double> ratio;
  std::uint64_t seed = 42;
  phantom->add_option("--nx", nx, "Cells along x")->check(CLI::PositiveNumber);
  phantom->add_option("--ny", ny, "Cells along y")->check(CLI::PositiveNumber);
  phantom->add_option("--width", width);
  phantom->add_option("--height", height);
  phantom->add_option("--shape", shape)->check(CLI::IsMember({"disc", "ellipse", "two-discs"}));
  phantom->add_option("--cx", cx);
  phantom->add_option("--cy", cy);
  phantom->add_option("--radius", radius);
  phantom->add_option("--semi-x", semi_x);
  phantom->add_option("--semi-y", semi_y);
  phantom->add_option("--angle", angle);
  phantom->add_option("--second", second_disc, "cx cy radius of the second disc")->expected(3);
  phantom->add_flag("--random", random_shape, "Draw shape parameters from the seed");
  phantom->add_option("--mask", mask_in, "Import a P5 mask instead of generating one");
  phantom->add_option("--ratio", ratio, "Fixed inclusion/background ratio in [2, 8]");
  phantom->add_option("--seed", seed);
  phantom->add_option("--out", truth_out, "Truth EFLD")->required();
  phantom->add_option("--mask-out", mask_out, "Write the mask as P5");
  phantom->add_option("--mesh-out", mesh_out, "Write the mesh JSON");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Forward-solve and add observation noise");
  std::string mesh_in, truth_in, um_out, f_out, uclean_out, ftrue_out, obs_out;
  double snr = 35.0, force_snr = 40.0, traction = 0.01;
  std::optional<double> sigma_w, nu;
  simulate->add_option("--mesh", mesh_in)->required();
  simulate->add_option("--truth", truth_in)->required();
  simulate->add_option("--snr", snr, "Displacement SNR in dB (inf for none)");
  simulate->add_option("--force-snr", force_snr, "Force SNR in dB");
  simulate->add_option("--sigma-w", sigma_w, "Absolute force noise std (overrides --force-snr)");
  simulate->add_option("--traction", traction, "Top-edge compression magnitude");
  simulate->add_option("--nu", nu, "Poisson's ratio");
  simulate->add_option("--seed", seed);
  simulate->add_option("--um-out", um_out)->required();
  simulate->add_option("--f-out", f_out)->required();
  simulate->add_option("--uclean-out", uclean_out);
  simulate->add_option("--ftrue-out", ftrue_out);
  simulate->add_option("--obs-out", obs_out, "Noise levels as JSON");

  // ml / reconstruct share inputs
  std::string um_in, f_in, config_in, est_out, trace_out, noise_in, denoiser_spec, init_in;
  auto* ml = app.add_subcommand("ml", "Unregularized (maximum-likelihood) estimate");
  auto* recon = app.add_subcommand("reconstruct", "RED reconstruction with a fixed-point covariance");
  for (auto* sub : {ml, recon}) {
    sub->add_option("--mesh", mesh_in)->required();
    sub->add_option("--um", um_in, "Measured displacement EFLD")->required();
    sub->add_option("--f", f_in, "Measured force EFLD")->required();
    sub->add_option("--config", config_in, "Solver config JSON");
    sub->add_option("--nu", nu, "Poisson's ratio");
    sub->add_option("--out", est_out, "Estimate EFLD")->required();
    sub->add_option("--trace", trace_out, "Trace CSV");
  }
  recon->add_option("--noise", noise_in, "JSON with sigma_w and sigma_n (e.g. simulate --obs-out)");
  recon->add_option("--denoiser", denoiser_spec, "e.g. tv:0.05:100, gaussian_blur:1, cnn:w.redw");
  recon->add_option("--init", init_in, "Initial elasticity EFLD (skips the internal ML run)");

  // check-denoiser
  auto* check = app.add_subcommand("check-denoiser", "Report RED homogeneity and passivity");
  std::vector<std::string> sample_fields;
  int sample_count = 3;
  std::string report_out;
  check->add_option("--denoiser", denoiser_spec)->required();
  check->add_option("--field", sample_fields, "Sample elasticity EFLDs");
  check->add_option("--nx", nx);
  check->add_option("--ny", ny);
  check->add_option("--samples", sample_count, "Random phantoms when no --field is given");
  check->add_option("--seed", seed);
  check->add_option("--out", report_out);

  // eval
  auto* eval = app.add_subcommand("eval", "Compare an estimate with the truth");
  std::string estimate_in, metrics_out;
  eval->add_option("--truth", truth_in)->required();
  eval->add_option("--estimate", estimate_in)->required();
  eval->add_option("--mask", mask_in, "P5 inclusion mask for CNR");
  eval->add_option("--out", metrics_out);

  // profile
  auto* prof = app.add_subcommand("profile", "Cross-section of a field along one raster row");
  std::string field_in, profile_out;
  std::optional<int> row;
  prof->add_option("--field", field_in)->required();
  prof->add_option("--row", row, "Raster row (0 = bottom edge)");
  prof->add_option("--mask", mask_in, "Default row: through the inclusion centre");
  prof->add_option("--truth", truth_in, "Add a truth column");
  prof->add_option("--out", profile_out);

  // render
  auto* render = app.add_subcommand("render", "Render an elasticity field as 8-bit P5");
  std::string pgm_out;
  double lo = 0.0, hi = 1.0;
  render->add_option("--field", field_in)->required();
  render->add_option("--out", pgm_out)->required();
  render->add_option("--min", lo, "Window low (normalized units)");
  render->add_option("--max", hi, "Window high (normalized units)");

  // export-pairs
  auto* pairs = app.add_subcommand("export-pairs", "Write (noisy ML, clean) training pairs");
  std::string batch_in, out_dir;
  pairs->add_option("--batch", batch_in, "Batch spec JSON")->required();
  pairs->add_option("--out-dir", out_dir)->required();

  // verify-weights
  auto* verify = app.add_subcommand("verify-weights", "Load REDW weights and check the golden pair");
  std::string weights_in;
  double golden_tol = 1e-4;
  verify->add_option("--weights", weights_in)->required();
  verify->add_option("--tol", golden_tol);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << Json{{"error", "usage"}, {"message", e.what()}}.dump() << "\n";
    return 64;
  }

  try {
    if (phantom->parsed()) {
      el::Mesh mesh = el::build_rect_mesh(nx, ny, width, height);
      el::PhantomSpec ps;
      ps.seed = seed;
      ps.fixed_ratio = ratio;
      if (!mask_in.empty()) {
        ps.mask = load_mask(mask_in);
        if (!(ps.mask.dims == mesh.raster()))
          throw el::InvalidArgument("mask size does not match (ny+1) x (nx+1)");
      } else if (random_shape) {
        const auto fam = shape == "disc"      ? el::ShapeFamily::disc
                         : shape == "ellipse" ? el::ShapeFamily::ellipse
                                              : el::ShapeFamily::two_discs;
        ps.mask = el::random_mask(fam, mesh.raster(), seed);
      } else {
        el::MaskShape s = el::DiscShape{cx, cy, radius};
        if (shape == "ellipse") s = el::EllipseShape{cx, cy, semi_x, semi_y, angle};
        if (shape == "two-discs") {
          if (second_disc.size() != 3) throw el::InvalidArgument("two-discs needs --second cx cy radius");
          s = el::TwoDiscsShape{{cx, cy, radius}, {second_disc[0], second_disc[1], second_disc[2]}};
        }
        ps.mask = el::generate_mask(s, mesh.raster());
      }
      const el::ElasticityField E = el::draw_phantom(ps);
      el::write_efld(truth_out, el::to_file(E, mesh.raster()));
      if (!mask_out.empty()) el::write_file_bytes(mask_out, el::encode_mask_pgm(ps.mask));
      if (!mesh_out.empty()) el::write_json_file(mesh_out, el::mesh_to_json(mesh));
    } else if (simulate->parsed()) {
      const el::Mesh mesh = load_mesh(mesh_in);
      el::MaterialModel mat;
      if (nu) mat.poisson_ratio = *nu;
      const auto E = load_elasticity(truth_in, mesh.raster());
      const el::ForceNoiseSpec fn = sigma_w ? el::ForceNoiseSpec(el::ForceNoiseSigma{*sigma_w})
                                            : el::ForceNoiseSpec(el::ForceNoiseSnr{force_snr});
      const auto obs = el::make_observations(mesh, mat, E, traction, snr, fn, seed);
      el::write_efld(um_out, el::to_file(obs.u_m, mesh.raster()));
      el::write_efld(f_out, el::to_file(obs.f, mesh.raster()));
      if (!uclean_out.empty()) el::write_efld(uclean_out, el::to_file(obs.u_clean, mesh.raster()));
      if (!ftrue_out.empty()) el::write_efld(ftrue_out, el::to_file(obs.f_true, mesh.raster()));
      Json info{{"sigma_n", obs.sigma_n}, {"sigma_w", obs.sigma_w},
                {"snr_db", std::isinf(snr) ? Json("inf") : Json(snr)},
                {"traction", traction}, {"poisson_ratio", mat.poisson_ratio}, {"seed", seed}};
      if (!obs_out.empty()) el::write_json_file(obs_out, info);
    } else if (ml->parsed() || recon->parsed()) {
      const el::Mesh mesh = load_mesh(mesh_in);
      const SolverFiles sf = load_solver_files(config_in, nu);
      const auto um = el::field_from_file<el::DisplacementField>(el::read_efld(um_in),
                                                                 el::FieldKind::displacement, mesh.raster());
      const auto f = el::field_from_file<el::ForceField>(el::read_efld(f_in), el::FieldKind::force,
                                                         mesh.raster());
      el::ReconstructionResult res;
      if (ml->parsed()) {
        res = el::ml_estimate(mesh, sf.mat, f, um, sf.cfg);
      } else {
        el::NoiseModel noise;
        if (!noise_in.empty()) noise = el::noise_from_json(el::read_json_file(noise_in));
        else if (sf.noise) noise = *sf.noise;
        else throw el::InvalidArgument("reconstruct needs --noise or a \"noise\" block in --config");
        el::Denoiser d = !denoiser_spec.empty() ? el::parse_denoiser_spec(denoiser_spec, mesh.raster())
                         : sf.denoiser         ? el::denoiser_from_json(*sf.denoiser, mesh.raster())
                                               : el::Denoiser{el::GaussianBlur{1.0}, mesh.raster()};
        if (!init_in.empty())
          res = el::reconstruct(mesh, sf.mat, f, um, noise, d, sf.cfg, load_elasticity(init_in, mesh.raster()));
        else
          res = el::reconstruct(mesh, sf.mat, f, um, noise, d, sf.cfg);
      }
      el::write_efld(est_out, el::to_file(res.E_hat, mesh.raster()));
      if (!trace_out.empty()) el::write_file_bytes(trace_out, el::trace_csv(res.trace));
      std::cout << result_summary(res).dump() << "\n";
    } else if (check->parsed()) {
      std::vector<el::Vector> samples;
      el::RasterDims dims{ny + 1, nx + 1};
      for (const auto& path : sample_fields) {
        const el::FieldFile ff = load_elasticity_any(path);
        if (!samples.empty() && !(ff.dims == dims)) throw el::InvalidArgument("sample rasters differ in size");
        dims = ff.dims;
        samples.push_back(ff.values);
      }
      if (samples.empty()) {
        for (int k = 0; k < sample_count; ++k) {
          el::PhantomSpec ps;
          ps.mask = el::random_mask(el::ShapeFamily::disc, dims, seed + std::uint64_t(k));
          ps.seed = seed + std::uint64_t(k);
          samples.push_back(el::draw_phantom(ps).values);
        }
      }
      const el::Denoiser d = el::parse_denoiser_spec(denoiser_spec, dims);
      emit(el::red_report_to_json(d, el::check_red_conditions(d, samples)), report_out);
    } else if (eval->parsed()) {
      const el::FieldFile truth = load_elasticity_any(truth_in);
      const auto est = load_elasticity(estimate_in, truth.dims);
      std::optional<el::Mask> mask;
      if (!mask_in.empty()) {
        mask = load_mask(mask_in);
        if (!(mask->dims == truth.dims)) throw el::InvalidArgument("mask size does not match the fields");
      }
      emit(el::metrics_to_json(el::evaluate(truth.values, est.values, mask ? &*mask : nullptr)), metrics_out);
    } else if (prof->parsed()) {
      const el::FieldFile ff = load_elasticity_any(field_in);
      int r = ff.dims.rows / 2;
      if (row) r = *row;
      else if (!mask_in.empty()) r = el::inclusion_center_row(load_mask(mask_in));
      const el::Vector values = el::profile(ff.values, ff.dims, r);
      if (!truth_in.empty()) {
        const el::Vector t = el::profile(load_elasticity(truth_in, ff.dims).values, ff.dims, r);
        emit_text(el::profile_csv(values, &t), profile_out);
      } else {
        emit_text(el::profile_csv(values), profile_out);
      }
    } else if (render->parsed()) {
      const el::FieldFile ff = load_elasticity_any(field_in);
      el::write_file_bytes(pgm_out, el::render_pgm(ff.values, ff.dims, lo, hi));
    } else if (pairs->parsed()) {
      const Json manifest = el::export_training_pairs(el::batch_spec_from_json(el::read_json_file(batch_in)), out_dir);
      std::cout << Json{{"pairs", manifest["pairs"].size()}, {"manifest", out_dir + "/manifest.json"}}.dump() << "\n";
    } else if (verify->parsed()) {
      const el::CnnModel m = el::cnn_load(weights_in);
      const double err = el::cnn_golden_error(m);
      std::cout << Json{{"golden_max_abs_error", err}, {"tolerance", golden_tol}, {"passed", err <= golden_tol}}.dump()
                << "\n";
      return err <= golden_tol ? 0 : 1;
    }
  } catch (const el::Error& e) {
    std::cerr << Json{{"error", e.code()}, {"message", e.what()}}.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << Json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
    return 3;
  }
  return 0;
}

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "elastored/config_io.hpp"
#include "elastored/field_io.hpp"
#include "elastored/phantom.hpp"
#include "elastored/red_solver.hpp"

namespace elastored {

/// Batch of synthetic (noisy ML estimate, clean truth) pairs for denoiser
/// training.
struct BatchSpec {
  int nx = 32;
  int ny = 32;
  std::vector<std::uint64_t> seeds;
  ShapeFamily shape = ShapeFamily::disc;
  double snr_db = 35.0;
  double force_snr_db = 40.0;
  double traction = 0.01;
  MaterialModel material;
  SolverConfig solver;
};

/// Seed of the observation noise, decorrelated from the phantom seed.
inline std::uint64_t noise_seed(std::uint64_t seed) { return seed ^ 0x6e6f697365ULL; }

inline BatchSpec batch_spec_from_json(const Json& j) {
  BatchSpec b;
  b.nx = detail::get_or(j, "nx", b.nx);
  b.ny = detail::get_or(j, "ny", b.ny);
  if (j.contains("seeds")) b.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  else
    for (int i = 0; i < detail::get_or(j, "count", 0); ++i)
      b.seeds.push_back(detail::get_or<std::uint64_t>(j, "first_seed", 1) + std::uint64_t(i));
  const std::string shape = detail::get_or<std::string>(j, "shape", "disc");
  if (shape == "disc") b.shape = ShapeFamily::disc;
  else if (shape == "ellipse") b.shape = ShapeFamily::ellipse;
  else if (shape == "two-discs") b.shape = ShapeFamily::two_discs;
  else throw ParseError("batch: unknown shape '" + shape + "'");
  b.snr_db = detail::get_or(j, "snr_db", b.snr_db);
  b.force_snr_db = detail::get_or(j, "force_snr_db", b.force_snr_db);
  b.traction = detail::get_or(j, "traction", b.traction);
  b.material.poisson_ratio = detail::get_or(j, "poisson_ratio", b.material.poisson_ratio);
  if (j.contains("solver")) b.solver = solver_config_from_json(j.at("solver"));
  return b;
}

/// Writes pair_<seed>_noisy.efld / pair_<seed>_clean.efld per seed plus
/// manifest.json into `out_dir`. Failures are recorded per item.
inline Json export_training_pairs(const BatchSpec& spec, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());

  const Mesh mesh = build_rect_mesh(spec.nx, spec.ny, 1.0, 1.0);
  const RasterDims dims = mesh.raster();
  Json pairs = Json::array();
  for (const std::uint64_t seed : spec.seeds) {
    const std::string stem = "pair_" + std::to_string(seed);
    Json item{{"seed", seed}, {"noisy", stem + "_noisy.efld"}, {"clean", stem + "_clean.efld"}};
    try {
      PhantomSpec ps;
      ps.mask = random_mask(spec.shape, dims, seed);
      ps.seed = seed;
      const ElasticityField truth = draw_phantom(ps);
      const ObservationSet obs = make_observations(mesh, spec.material, truth, spec.traction, spec.snr_db,
                                                   ForceNoiseSnr{spec.force_snr_db}, noise_seed(seed));
      const ElasticityField noisy = ml_estimate(mesh, spec.material, obs.f, obs.u_m, spec.solver).E_hat;
      write_efld((fs::path(out_dir) / item["noisy"].get<std::string>()).string(), to_file(noisy, dims));
      write_efld((fs::path(out_dir) / item["clean"].get<std::string>()).string(), to_file(truth, dims));
      item["status"] = "ok";
      item["rmse"] = rms(noisy.values - truth.values);
    } catch (const std::exception& e) {
      item["status"] = "error";
      item["error"] = e.what();
    }
    pairs.push_back(std::move(item));
  }
  Json manifest{{"version", 1}, {"rows", dims.rows}, {"cols", dims.cols},
                {"snr_db", spec.snr_db}, {"pairs", pairs}};
  write_json_file((fs::path(out_dir) / "manifest.json").string(), manifest);
  return manifest;
}

}  // namespace elastored

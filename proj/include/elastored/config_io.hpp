#pragma once

#include <json.hpp>

#include <fstream>
#include <string>

#include "elastored/denoisers.hpp"
#include "elastored/errors.hpp"
#include "elastored/field_io.hpp"
#include "elastored/mesh.hpp"
#include "elastored/metrics.hpp"
#include "elastored/red_solver.hpp"
#include "elastored/stat_model.hpp"

namespace elastored {

using Json = nlohmann::json;

inline Json read_json_file(const std::string& path) {
  const std::string text = read_file_bytes(path);
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline void write_json_file(const std::string& path, const Json& j) {
  write_file_bytes(path, j.dump(2) + "\n");
}

namespace detail {

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ParseError(std::string("key '") + key + "': " + e.what());
  }
}

inline void reject_unknown(const Json& j, std::initializer_list<const char*> known, const char* what) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ParseError(std::string(what) + ": unknown key '" + it.key() + "'");
  }
}

}  // namespace detail

// Mesh: {"nx", "ny", "width", "height", "dirichlet": [[dof, value], ...]}

inline Json mesh_to_json(const Mesh& m) {
  Json d = Json::array();
  for (const auto& [dof, value] : m.dirichlet) d.push_back({dof, value});
  return {{"nx", m.nx}, {"ny", m.ny}, {"width", m.width}, {"height", m.height}, {"dirichlet", d}};
}

inline Mesh mesh_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("mesh: expected a JSON object");
  detail::reject_unknown(j, {"nx", "ny", "width", "height", "dirichlet"}, "mesh");
  for (const char* k : {"nx", "ny", "width", "height"})
    if (!j.contains(k)) throw ParseError(std::string("mesh: missing key '") + k + "'");
  Mesh m = build_rect_mesh(detail::get_or<int>(j, "nx", 0), detail::get_or<int>(j, "ny", 0),
                           detail::get_or<double>(j, "width", 0.0), detail::get_or<double>(j, "height", 0.0));
  if (j.contains("dirichlet")) {
    m.dirichlet.clear();
    for (const auto& entry : j.at("dirichlet")) {
      if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number_integer() || !entry[1].is_number())
        throw ParseError("mesh: dirichlet entries must be [dof, value]");
      const int dof = entry[0].get<int>();
      if (dof < 0 || dof >= m.dof_count()) throw ParseError("mesh: dirichlet dof out of range");
      m.dirichlet[dof] = entry[1].get<double>();
    }
  }
  return m;
}

// Denoiser: {"kind": "identity"|"zero"|"gaussian_blur"|"median"|"tv"|"cnn", ...}

inline Denoiser denoiser_from_json(const Json& j, RasterDims dims) {
  const std::string kind = detail::get_or<std::string>(j, "kind", "");
  if (kind == "identity") return {IdentityDenoiser{}, dims};
  if (kind == "zero") return {ZeroDenoiser{}, dims};
  if (kind == "gaussian_blur") return {GaussianBlur{detail::get_or(j, "sigma_px", 1.0)}, dims};
  if (kind == "median") return {MedianFilter{detail::get_or(j, "size", 3)}, dims};
  if (kind == "tv") {
    TotalVariation tv;
    tv.weight = detail::get_or(j, "weight", tv.weight);
    tv.iterations = detail::get_or(j, "iterations", tv.iterations);
    return {tv, dims};
  }
  if (kind == "cnn") return cnn_denoiser(detail::get_or<std::string>(j, "weights", ""), dims);
  throw ParseError("denoiser: unknown kind '" + kind + "'");
}

/// Compact form used on the command line: "gaussian_blur:1.5", "median:3",
/// "tv:0.05:100", "cnn:weights.redw", "identity", "zero".
inline Denoiser parse_denoiser_spec(const std::string& spec, RasterDims dims) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  const std::size_t first = spec.find(':');
  parts.push_back(spec.substr(0, first));
  if (first != std::string::npos) {
    if (parts[0] == "cnn") {
      parts.push_back(spec.substr(first + 1));
    } else {
      start = first + 1;
      for (std::size_t p; (p = spec.find(':', start)) != std::string::npos; start = p + 1)
        parts.push_back(spec.substr(start, p - start));
      parts.push_back(spec.substr(start));
    }
  }
  Json j{{"kind", parts[0]}};
  try {
    if (parts[0] == "gaussian_blur" && parts.size() > 1) j["sigma_px"] = std::stod(parts[1]);
    if (parts[0] == "median" && parts.size() > 1) j["size"] = std::stoi(parts[1]);
    if (parts[0] == "tv" && parts.size() > 1) j["weight"] = std::stod(parts[1]);
    if (parts[0] == "tv" && parts.size() > 2) j["iterations"] = std::stoi(parts[2]);
    if (parts[0] == "cnn" && parts.size() > 1) j["weights"] = parts[1];
  } catch (const std::logic_error&) {
    throw ParseError("denoiser: malformed spec '" + spec + "'");
  }
  return denoiser_from_json(j, dims);
}

// SolverConfig: {"step": "auto"|x, "lambda": "auto"|x, "outer_iters", "inner_iters",
//   "ml_iters", "tol", "e_min", "e_init": "ml"|{"constant": c}, "lambda_refresh",
//   "max_backtracks", "divergence_limit", "power_iterations"}
// Reconstruction files may also carry "poisson_ratio", "denoiser" and "noise".

inline SolverConfig solver_config_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("solver config: expected a JSON object");
  detail::reject_unknown(j,
                         {"step", "lambda", "outer_iters", "inner_iters", "ml_iters", "tol", "e_min",
                          "e_init", "lambda_refresh", "max_backtracks", "divergence_limit",
                          "power_iterations", "poisson_ratio", "denoiser", "noise"},
                         "solver config");
  SolverConfig c;
  auto auto_or_number = [&](const char* key) -> std::optional<double> {
    if (!j.contains(key)) return std::nullopt;
    const Json& v = j.at(key);
    if (v.is_string() && v.get<std::string>() == "auto") return std::nullopt;
    if (!v.is_number()) throw ParseError(std::string(key) + ": expected number or \"auto\"");
    return v.get<double>();
  };
  c.step = auto_or_number("step");
  c.lambda = auto_or_number("lambda");
  c.outer_iters = detail::get_or(j, "outer_iters", c.outer_iters);
  c.inner_iters = detail::get_or(j, "inner_iters", c.inner_iters);
  c.ml_iters = detail::get_or(j, "ml_iters", c.ml_iters);
  c.tol = detail::get_or(j, "tol", c.tol);
  c.e_min = detail::get_or(j, "e_min", c.e_min);
  c.lambda_refresh = detail::get_or(j, "lambda_refresh", c.lambda_refresh);
  c.max_backtracks = detail::get_or(j, "max_backtracks", c.max_backtracks);
  c.divergence_limit = detail::get_or(j, "divergence_limit", c.divergence_limit);
  c.power_iterations = detail::get_or(j, "power_iterations", c.power_iterations);
  if (j.contains("e_init")) {
    const Json& e = j.at("e_init");
    if (e.is_string() && e.get<std::string>() == "ml") {
      c.e_init = InitKind::ml;
    } else if (e.is_object() && e.contains("constant") && e.at("constant").is_number()) {
      c.e_init = InitKind::constant;
      c.init_value = e.at("constant").get<double>();
    } else {
      throw ParseError("e_init: expected \"ml\" or {\"constant\": c}");
    }
  }
  c.validate();
  return c;
}

inline Json solver_config_to_json(const SolverConfig& c) {
  Json j;
  j["step"] = c.step ? Json(*c.step) : Json("auto");
  j["lambda"] = c.lambda ? Json(*c.lambda) : Json("auto");
  j["outer_iters"] = c.outer_iters;
  j["inner_iters"] = c.inner_iters;
  j["ml_iters"] = c.ml_iters;
  j["tol"] = c.tol;
  j["e_min"] = c.e_min;
  j["e_init"] = c.e_init == InitKind::ml ? Json("ml") : Json{{"constant", c.init_value}};
  j["lambda_refresh"] = c.lambda_refresh;
  j["max_backtracks"] = c.max_backtracks;
  j["divergence_limit"] = c.divergence_limit;
  j["power_iterations"] = c.power_iterations;
  return j;
}

inline NoiseModel noise_from_json(const Json& j) {
  NoiseModel n;
  n.sigma_w = detail::get_or(j, "sigma_w", 0.0);
  n.sigma_n = detail::get_or(j, "sigma_n", 0.0);
  if (!(n.sigma_w >= 0.0) || !(n.sigma_n >= 0.0)) throw ParseError("noise: sigmas must be >= 0");
  return n;
}

inline Json red_report_to_json(const Denoiser& d, const RedConditionReport& r) {
  return {{"denoiser", d.name()},
          {"homogeneity_defect", r.homogeneity_defect},
          {"passivity_estimate", r.passivity_estimate},
          {"tolerance", kRedConditionTolerance},
          {"passed", r.passed}};
}

inline Json metrics_to_json(const Metrics& m) {
  Json j;
  j["rmse"] = m.rmse;
  j["psnr"] = std::isinf(m.psnr) ? Json("inf") : Json(m.psnr);
  if (m.cnr && std::isinf(*m.cnr)) j["cnr"] = "inf";
  else j["cnr"] = m.cnr ? Json(*m.cnr) : Json(nullptr);
  return j;
}

}  // namespace elastored

#pragma once

// YAML run configuration. Layout:
//
//   problem:  n, m, T, delta, generator, [ell], defaults: {A..G}, regimes: [{A..G}, ...]
//   solver:   backend, grid_steps, tree_depth, picard_tol, picard_max_iter,
//             psd_tol, cond_threshold, asym_tol, smallness_threshold, validation_tol, execution
//   simulate: x0, i0, n_paths, dt, seed, perturbations: [{name, value | linear | table}]
//   verify:   regime, ypx_dts, tree_depths, fbsde_iterate, xinv_dt, oracle_tol,
//             min_order, min_ratio, se_factor, value_tol, gap_tol
//   output:   solution_path, report_path, simulation_path, summary_path, series_path
//
// Matrices are nested row-major lists; a bare number stands for a 1×1 matrix
// (or, if it is 0, for the zero matrix of the required shape). A coefficient is
// a matrix (constant), a map {time: matrix} (piecewise-constant table), or
// {tree: [[M], [M, M], ...]} with level k listing its k + 1 node values.
// Regimes are numbered from 1 in configuration files.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "regimelq/control.hpp"
#include "regimelq/esre.hpp"
#include "regimelq/model.hpp"

namespace regimelq {

struct SolverConfig {
  EsreOptions options;
  double asym_tol = kDefaultAsymTol;
  double smallness_threshold = 0.1;
  double validation_tol = 1e-12;
};

struct NamedPerturbation {
  std::string name;
  Perturbation perturbation;
};

struct SimulateConfig {
  std::vector<double> x0;
  std::size_t i0 = 0;  // zero-based
  std::size_t n_paths = 10000;
  double dt = 1e-3;
  std::uint64_t seed = 0;
  std::vector<NamedPerturbation> perturbations;
};

struct VerifyConfig {
  std::size_t regime = 0;  // zero-based
  std::vector<double> ypx_dts{0.1, 0.05, 0.025, 0.0125};
  std::vector<std::size_t> tree_depths{4, 8};
  std::size_t fbsde_iterate = 1;
  double xinv_dt = 1e-3;
  double oracle_tol = 1e-7;
  double min_order = 0.9;
  double min_ratio = 1.5;
  double se_factor = 3.0;
  double value_tol = 0.01;
  double gap_tol = 0.02;
};

struct OutputConfig {
  std::string solution_path = "solution.csv";
  std::string report_path = "report.json";
  std::string simulation_path = "simulation.json";
  std::string summary_path = "summary.txt";
  std::string series_path = "series.csv";
};

struct RunConfig {
  ProblemSpec problem;
  SolverConfig solver;
  SimulateConfig simulate;
  VerifyConfig verify;
  OutputConfig output;
};

/// ParseError (with line context), UnknownKey, RangeError; structural problems
/// of the model surface as StructuralError.
RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_string(const std::string& text);

}  // namespace regimelq

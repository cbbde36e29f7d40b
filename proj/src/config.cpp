#include "regimelq/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <map>
#include <sstream>

#include "regimelq/error.hpp"

namespace regimelq {
namespace {

std::string where(const YAML::Node& node, const std::string& key) {
  std::ostringstream os;
  os << "'" << key << "'";
  if (node.Mark().line >= 0) os << " (line " << node.Mark().line + 1 << ")";
  return os.str();
}

[[noreturn]] void parse_fail(const YAML::Node& node, const std::string& key, const std::string& msg) {
  throw Error(ErrorKind::ParseError, where(node, key) + ": " + msg);
}

[[noreturn]] void range_fail(const YAML::Node& node, const std::string& key, const std::string& msg) {
  throw Error(ErrorKind::RangeError, where(node, key) + ": " + msg);
}

void require_map(const YAML::Node& node, const std::string& key) {
  if (!node.IsMap()) parse_fail(node, key, "expected a mapping");
}

void check_keys(const YAML::Node& node, const std::string& section, std::initializer_list<const char*> allowed) {
  require_map(node, section);
  for (const auto& kv : node) {
    const auto name = kv.first.as<std::string>();
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return name == a; }))
      throw Error(ErrorKind::UnknownKey, where(kv.first, section + "." + name) + ": not a recognised key");
  }
}

double as_double(const YAML::Node& node, const std::string& key) {
  if (!node.IsScalar()) parse_fail(node, key, "expected a number");
  try {
    return node.as<double>();
  } catch (const YAML::Exception&) {
    parse_fail(node, key, "expected a number, got '" + node.Scalar() + "'");
  }
}

long long as_int(const YAML::Node& node, const std::string& key) {
  const double v = as_double(node, key);
  if (v != std::floor(v) || std::abs(v) > 9e15) parse_fail(node, key, "expected an integer");
  return static_cast<long long>(v);
}

std::size_t as_count(const YAML::Node& node, const std::string& key, long long min) {
  const auto v = as_int(node, key);
  if (v < min) range_fail(node, key, "must be at least " + std::to_string(min));
  return static_cast<std::size_t>(v);
}

double as_positive(const YAML::Node& node, const std::string& key) {
  const double v = as_double(node, key);
  if (!(v > 0.0) || !std::isfinite(v)) range_fail(node, key, "must be positive and finite");
  return v;
}

std::vector<double> as_vector(const YAML::Node& node, const std::string& key, std::size_t size) {
  std::vector<double> out;
  if (node.IsScalar() && size == 1) {
    out.push_back(as_double(node, key));
  } else if (node.IsSequence()) {
    for (const auto& v : node) out.push_back(as_double(v, key));
  } else {
    parse_fail(node, key, "expected a list of numbers");
  }
  if (size != 0 && out.size() != size)
    parse_fail(node, key, "expected " + std::to_string(size) + " entries, got " + std::to_string(out.size()));
  return out;
}

Matrix as_matrix(const YAML::Node& node, const std::string& key, std::size_t rows, std::size_t cols) {
  if (node.IsScalar()) {
    const double v = as_double(node, key);
    if (rows == 1 && cols == 1) return Matrix(1, 1, v);
    if (v == 0.0) return Matrix(rows, cols);
    parse_fail(node, key, "a bare number is only allowed for 1x1 matrices or 0");
  }
  if (!node.IsSequence() || node.size() != rows)
    parse_fail(node, key, "expected " + std::to_string(rows) + " rows");
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = node[r];
    if (!row.IsSequence() || row.size() != cols)
      parse_fail(row, key, "row " + std::to_string(r + 1) + " needs " + std::to_string(cols) + " entries");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = as_double(row[c], key);
  }
  return m;
}

CoefficientField as_field(const YAML::Node& node, const std::string& key, std::size_t rows, std::size_t cols) {
  if (!node.IsMap()) return CoefficientField::constant(as_matrix(node, key, rows, cols));
  if (node["tree"]) {
    if (node.size() != 1) parse_fail(node, key, "a tree field has the single key 'tree'");
    const auto levels_node = node["tree"];
    if (!levels_node.IsSequence() || levels_node.size() == 0) parse_fail(levels_node, key, "tree levels must be a list");
    std::vector<std::vector<Matrix>> levels;
    for (std::size_t k = 0; k < levels_node.size(); ++k) {
      const auto lvl = levels_node[k];
      if (!lvl.IsSequence() || lvl.size() != k + 1)
        parse_fail(lvl, key, "tree level " + std::to_string(k) + " needs " + std::to_string(k + 1) + " nodes");
      std::vector<Matrix> values;
      for (const auto& v : lvl) values.push_back(as_matrix(v, key, rows, cols));
      levels.push_back(std::move(values));
    }
    return CoefficientField::tree(std::move(levels));
  }
  std::map<double, Matrix> table;
  for (const auto& kv : node) {
    const double t = as_double(kv.first, key + " time");
    if (!table.emplace(t, as_matrix(kv.second, key, rows, cols)).second) parse_fail(kv.first, key, "duplicate time");
  }
  if (table.begin()->first != 0.0) parse_fail(node, key, "a time table must start at 0");
  std::vector<double> times;
  std::vector<Matrix> values;
  for (auto& [t, v] : table) {
    times.push_back(t);
    values.push_back(std::move(v));
  }
  return CoefficientField::time_table(std::move(times), std::move(values));
}

struct Shape {
  const char* name;
  CoefficientField RegimeCoefficients::*member;
  bool rows_n;  // rows n (else m)
  bool cols_n;  // cols n (else m)
};

constexpr Shape kShapes[] = {
    {"A", &RegimeCoefficients::A, true, true},   {"B", &RegimeCoefficients::B, true, false},
    {"C", &RegimeCoefficients::C, true, true},   {"D", &RegimeCoefficients::D, true, false},
    {"Q", &RegimeCoefficients::Q, true, true},   {"S", &RegimeCoefficients::S, false, true},
    {"R", &RegimeCoefficients::R, false, false}, {"G", &RegimeCoefficients::G, true, true},
};

void read_coefficients(const YAML::Node& node, const std::string& section, std::size_t n, std::size_t m,
                       RegimeCoefficients& out) {
  check_keys(node, section, {"A", "B", "C", "D", "Q", "S", "R", "G"});
  for (const auto& s : kShapes) {
    if (const auto v = node[s.name])
      out.*s.member = as_field(v, section + "." + s.name, s.rows_n ? n : m, s.cols_n ? n : m);
  }
}

ProblemSpec read_problem(const YAML::Node& node) {
  check_keys(node, "problem", {"n", "m", "ell", "T", "delta", "generator", "defaults", "regimes"});
  for (const char* k : {"n", "m", "T", "delta", "generator"})
    if (!node[k]) parse_fail(node, std::string("problem.") + k, "missing required key");

  ProblemSpec spec;
  spec.n = as_count(node["n"], "problem.n", 1);
  spec.m = as_count(node["m"], "problem.m", 1);
  spec.horizon = as_positive(node["T"], "problem.T");
  spec.delta = as_positive(node["delta"], "problem.delta");

  const auto gnode = node["generator"];
  if (!gnode.IsSequence()) parse_fail(gnode, "problem.generator", "expected a square list of rows");
  const std::size_t ell = gnode.size();
  if (ell < 2) range_fail(gnode, "problem.generator", "at least two regimes are required");
  if (const auto e = node["ell"]) {
    const auto v = as_int(e, "problem.ell");
    if (v < 2) range_fail(e, "problem.ell", "at least two regimes are required");
    if (static_cast<std::size_t>(v) != ell) parse_fail(e, "problem.ell", "does not match the generator size");
  }
  try {
    spec.generator = validate_generator(as_matrix(gnode, "problem.generator", ell, ell));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ParseError) throw;
    throw Error(ErrorKind::RangeError, where(gnode, "problem.generator") + ": " + e.what());
  }

  RegimeCoefficients defaults;
  if (const auto d = node["defaults"]) read_coefficients(d, "problem.defaults", spec.n, spec.m, defaults);
  spec.regimes.assign(ell, defaults);
  if (const auto r = node["regimes"]) {
    if (!r.IsSequence() || r.size() != ell)
      parse_fail(r, "problem.regimes", "expected one entry per regime (" + std::to_string(ell) + ")");
    for (std::size_t i = 0; i < ell; ++i)
      read_coefficients(r[i], "problem.regimes[" + std::to_string(i + 1) + "]", spec.n, spec.m, spec.regimes[i]);
  }
  for (std::size_t i = 0; i < ell; ++i)
    for (const auto& s : kShapes)
      if ((spec.regimes[i].*s.member).empty())
        parse_fail(node, "problem", std::string("coefficient ") + s.name + " is missing for regime " +
                                        std::to_string(i + 1));
  return spec;
}

void read_solver(const YAML::Node& node, SolverConfig& out) {
  check_keys(node, "solver", {"backend", "grid_steps", "tree_depth", "picard_tol", "picard_max_iter", "psd_tol",
                              "cond_threshold", "asym_tol", "smallness_threshold", "validation_tol", "execution"});
  auto& o = out.options;
  if (const auto v = node["backend"]) {
    const auto s = v.as<std::string>();
    if (s == "ode") o.backend = Backend::ode;
    else if (s == "tree") o.backend = Backend::tree;
    else range_fail(v, "solver.backend", "expected 'ode' or 'tree'");
  }
  if (const auto v = node["grid_steps"]) o.grid_steps = as_count(v, "solver.grid_steps", 4);
  if (const auto v = node["tree_depth"]) {
    o.tree_depth = as_count(v, "solver.tree_depth", 1);
    if (o.tree_depth > 5000) range_fail(v, "solver.tree_depth", "must be at most 5000");
  }
  if (const auto v = node["picard_tol"]) o.picard_tol = as_positive(v, "solver.picard_tol");
  if (const auto v = node["picard_max_iter"]) o.picard_max_iter = as_count(v, "solver.picard_max_iter", 1);
  if (const auto v = node["psd_tol"]) o.psd_tol = as_positive(v, "solver.psd_tol");
  if (const auto v = node["cond_threshold"]) o.cond_threshold = as_positive(v, "solver.cond_threshold");
  if (const auto v = node["asym_tol"]) out.asym_tol = as_positive(v, "solver.asym_tol");
  if (const auto v = node["smallness_threshold"]) out.smallness_threshold = as_positive(v, "solver.smallness_threshold");
  if (const auto v = node["validation_tol"]) {
    out.validation_tol = as_double(v, "solver.validation_tol");
    if (out.validation_tol < 0.0) range_fail(v, "solver.validation_tol", "must be nonnegative");
  }
  if (const auto v = node["execution"]) {
    const auto s = v.as<std::string>();
    if (s == "serial") o.execution = Execution::serial;
    else if (s == "parallel") o.execution = Execution::parallel;
    else range_fail(v, "solver.execution", "expected 'serial' or 'parallel'");
  }
}

Perturbation read_perturbation(const YAML::Node& node, const std::string& key, std::size_t m, std::string& name) {
  check_keys(node, key, {"name", "value", "linear", "table"});
  if (!node["name"]) parse_fail(node, key, "perturbation needs a name");
  name = node["name"].as<std::string>();
  const int forms = (node["value"] ? 1 : 0) + (node["linear"] ? 1 : 0) + (node["table"] ? 1 : 0);
  if (forms != 1) parse_fail(node, key, "exactly one of 'value', 'linear', 'table' is required");
  if (const auto v = node["value"]) return Perturbation::constant(as_vector(v, key + ".value", m));
  if (const auto v = node["linear"]) {
    check_keys(v, key + ".linear", {"intercept", "slope"});
    if (!v["intercept"] || !v["slope"]) parse_fail(v, key + ".linear", "needs 'intercept' and 'slope'");
    return Perturbation::linear(as_vector(v["intercept"], key + ".intercept", m),
                                as_vector(v["slope"], key + ".slope", m));
  }
  const auto t = node["table"];
  require_map(t, key + ".table");
  std::map<double, std::vector<double>> table;
  for (const auto& kv : t)
    if (!table.emplace(as_double(kv.first, key + ".table"), as_vector(kv.second, key + ".table", m)).second)
      parse_fail(kv.first, key + ".table", "duplicate time");
  if (table.empty() || table.begin()->first != 0.0) parse_fail(t, key + ".table", "a time table must start at 0");
  std::vector<double> times;
  std::vector<std::vector<double>> values;
  for (auto& [time, v] : table) {
    times.push_back(time);
    values.push_back(std::move(v));
  }
  return Perturbation::table(std::move(times), std::move(values));
}

void read_simulate(const YAML::Node& node, const ProblemSpec& spec, SimulateConfig& out) {
  check_keys(node, "simulate", {"x0", "i0", "n_paths", "dt", "seed", "perturbations"});
  if (const auto v = node["x0"]) out.x0 = as_vector(v, "simulate.x0", spec.n);
  if (const auto v = node["i0"]) {
    const auto i = as_count(v, "simulate.i0", 1);
    if (i > spec.ell()) range_fail(v, "simulate.i0", "regime index out of range");
    out.i0 = i - 1;
  }
  if (const auto v = node["n_paths"]) out.n_paths = as_count(v, "simulate.n_paths", 2);
  if (const auto v = node["dt"]) {
    out.dt = as_positive(v, "simulate.dt");
    if (out.dt > spec.horizon) range_fail(v, "simulate.dt", "exceeds the horizon");
  }
  if (const auto v = node["seed"]) out.seed = static_cast<std::uint64_t>(as_count(v, "simulate.seed", 0));
  if (const auto v = node["perturbations"]) {
    if (!v.IsSequence()) parse_fail(v, "simulate.perturbations", "expected a list");
    for (std::size_t k = 0; k < v.size(); ++k) {
      NamedPerturbation p;
      p.perturbation =
          read_perturbation(v[k], "simulate.perturbations[" + std::to_string(k + 1) + "]", spec.m, p.name);
      out.perturbations.push_back(std::move(p));
    }
  }
}

void read_verify(const YAML::Node& node, const ProblemSpec& spec, VerifyConfig& out) {
  check_keys(node, "verify", {"regime", "ypx_dts", "tree_depths", "fbsde_iterate", "xinv_dt", "oracle_tol",
                              "min_order", "min_ratio", "se_factor", "value_tol", "gap_tol"});
  if (const auto v = node["regime"]) {
    const auto i = as_count(v, "verify.regime", 1);
    if (i > spec.ell()) range_fail(v, "verify.regime", "regime index out of range");
    out.regime = i - 1;
  }
  if (const auto v = node["ypx_dts"]) {
    out.ypx_dts = as_vector(v, "verify.ypx_dts", 0);
    if (out.ypx_dts.size() < 2) range_fail(v, "verify.ypx_dts", "needs at least two step sizes");
    for (double d : out.ypx_dts)
      if (!(d > 0.0)) range_fail(v, "verify.ypx_dts", "step sizes must be positive");
  }
  if (const auto v = node["tree_depths"]) {
    if (!v.IsSequence() || v.size() != 2) parse_fail(v, "verify.tree_depths", "expected two depths");
    out.tree_depths = {as_count(v[0], "verify.tree_depths", 1), as_count(v[1], "verify.tree_depths", 1)};
    if (out.tree_depths[0] >= out.tree_depths[1] || out.tree_depths[1] > 12)
      range_fail(v, "verify.tree_depths", "expected increasing depths of at most 12");
  }
  if (const auto v = node["fbsde_iterate"]) out.fbsde_iterate = as_count(v, "verify.fbsde_iterate", 1);
  if (const auto v = node["xinv_dt"]) out.xinv_dt = as_positive(v, "verify.xinv_dt");
  if (const auto v = node["oracle_tol"]) out.oracle_tol = as_positive(v, "verify.oracle_tol");
  if (const auto v = node["min_order"]) out.min_order = as_positive(v, "verify.min_order");
  if (const auto v = node["min_ratio"]) out.min_ratio = as_positive(v, "verify.min_ratio");
  if (const auto v = node["se_factor"]) out.se_factor = as_positive(v, "verify.se_factor");
  if (const auto v = node["value_tol"]) out.value_tol = as_positive(v, "verify.value_tol");
  if (const auto v = node["gap_tol"]) out.gap_tol = as_positive(v, "verify.gap_tol");
}

void read_output(const YAML::Node& node, OutputConfig& out) {
  check_keys(node, "output", {"solution_path", "report_path", "simulation_path", "summary_path", "series_path"});
  auto take = [&](const char* key, std::string& dst) {
    if (const auto v = node[key]) {
      if (!v.IsScalar() || v.Scalar().empty()) parse_fail(v, std::string("output.") + key, "expected a path");
      dst = v.Scalar();
    }
  };
  take("solution_path", out.solution_path);
  take("report_path", out.report_path);
  take("simulation_path", out.simulation_path);
  take("summary_path", out.summary_path);
  take("series_path", out.series_path);
}

RunConfig from_root(const YAML::Node& root) {
  if (!root.IsMap()) throw Error(ErrorKind::ParseError, "configuration must be a mapping");
  check_keys(root, "config", {"problem", "solver", "simulate", "verify", "output"});
  if (!root["problem"]) throw Error(ErrorKind::ParseError, "missing 'problem' section");

  RunConfig cfg;
  cfg.problem = read_problem(root["problem"]);
  if (const auto v = root["solver"]) read_solver(v, cfg.solver);
  cfg.problem.check_structure(cfg.solver.asym_tol);

  cfg.simulate.x0.assign(cfg.problem.n, 1.0);
  if (const auto v = root["simulate"]) read_simulate(v, cfg.problem, cfg.simulate);
  if (const auto v = root["verify"]) read_verify(v, cfg.problem, cfg.verify);
  if (const auto v = root["output"]) read_output(v, cfg.output);
  return cfg;
}

RunConfig load(const std::function<YAML::Node()>& loader) {
  YAML::Node root;
  try {
    root = loader();
  } catch (const YAML::BadFile& e) {
    throw Error(ErrorKind::IoError, e.what());
  } catch (const YAML::Exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
  try {
    return from_root(root);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
}

}  // namespace

RunConfig parse_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  return load([&] { return YAML::LoadFile(path.string()); });
}

RunConfig parse_config_string(const std::string& text) {
  return load([&] { return YAML::Load(text); });
}

}  // namespace regimelq

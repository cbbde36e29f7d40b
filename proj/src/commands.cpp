#include "regimelq/commands.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "regimelq/control.hpp"
#include "regimelq/esre.hpp"
#include "regimelq/fbsde_check.hpp"
#include "regimelq/solution_io.hpp"

namespace regimelq {
namespace {

std::filesystem::path resolve(const CommandContext& ctx, const std::string& path) {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p : ctx.output_dir / p;
}

std::uint64_t seed_of(const RunConfig& cfg, const CommandContext& ctx) { return ctx.seed.value_or(cfg.simulate.seed); }

nlohmann::json violations_json(const ValidationReport& report) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& v : report.violations) {
    nlohmann::json j{{"assumption", v.assumption}, {"regime", v.regime + 1}, {"time", v.time}, {"value", v.value}};
    if (v.node) j["node"] = {{"level", v.node->level}, {"up", v.node->up}};
    out.push_back(j);
  }
  return out;
}

nlohmann::json cost_json(const CostEstimate& c) {
  return {{"mean", c.mean}, {"std_error", c.std_error}, {"n_paths", c.n_paths}, {"dt", c.dt}, {"seed", c.seed}};
}

// Validation shared by the commands that solve: returns false (and prints) on failure.
bool validated(const RunConfig& cfg, std::ostream& out) {
  const auto report = validate_assumptions(cfg.problem, cfg.solver.validation_tol);
  for (const auto& v : report.violations)
    out << "violation: " << v.assumption << " regime " << v.regime + 1 << " t=" << format_double(v.time)
        << " min eigenvalue " << format_double(v.value) << '\n';
  return report.passed;
}

EsreSolution solve_and_store(const RunConfig& cfg, const CommandContext& ctx, std::ostream& out) {
  EsreSolution sol = run_picard(cfg.problem, cfg.solver.options);
  const auto path = resolve(ctx, cfg.output.solution_path);
  write_solution(sol, path);
  out << "backend " << (sol.backend() == Backend::ode ? "ode" : "tree") << ", " << sol.iterations
      << " Picard iterations, converged=" << (sol.converged ? "yes" : "no") << '\n';
  for (std::size_t i = 0; i < cfg.problem.ell(); ++i) {
    out << "P(0," << i + 1 << ") =";
    const auto& p = sol.initial(i);
    for (std::size_t r = 0; r < p.dim(); ++r)
      for (std::size_t c = 0; c < p.dim(); ++c) out << ' ' << format_double(p(r, c));
    out << '\n';
  }
  out << "wrote " << path.string() << " and " << metadata_path(path).string() << '\n';
  return sol;
}

SimulationOptions sim_options(const RunConfig& cfg, const CommandContext& ctx) {
  SimulationOptions o;
  o.dt = cfg.simulate.dt;
  o.seed = seed_of(cfg, ctx);
  o.execution = cfg.solver.options.execution;
  return o;
}

nlohmann::json simulation_json(const RunConfig& cfg, const CommandContext& ctx, const EsreSolution& sol) {
  const auto opts = sim_options(cfg, ctx);
  const auto& s = cfg.simulate;
  std::vector<Perturbation> perts;
  for (const auto& p : s.perturbations) perts.push_back(p.perturbation);

  nlohmann::json doc;
  doc["x0"] = s.x0;
  doc["i0"] = s.i0 + 1;
  doc["value"] = value_at(sol, s.x0, s.i0);
  if (perts.empty()) {
    const FeedbackGain gain = feedback_gain(sol, cfg.problem);
    doc["feedback"] = cost_json(mc_cost(cfg.problem, Policy{&gain, Perturbation()}, s.x0, s.i0, s.n_paths, opts));
    doc["perturbations"] = nlohmann::json::array();
    return doc;
  }
  const auto gaps = optimality_gaps(cfg.problem, sol, perts, s.x0, s.i0, s.n_paths, opts);
  doc["feedback"] = cost_json(gaps.front().feedback);
  nlohmann::json list = nlohmann::json::array();
  for (std::size_t k = 0; k < gaps.size(); ++k) {
    nlohmann::json g{{"name", s.perturbations[k].name},
                     {"gap", gaps[k].gap},
                     {"std_error", gaps[k].std_error},
                     {"perturbed", cost_json(gaps[k].perturbed)}};
    g["theoretical"] = gaps[k].theoretical ? nlohmann::json(*gaps[k].theoretical) : nlohmann::json(nullptr);
    list.push_back(g);
  }
  doc["perturbations"] = list;
  return doc;
}

struct CheckList {
  nlohmann::json items = nlohmann::json::array();
  bool passed = true;

  void add(const std::string& name, const std::string& status, nlohmann::json detail = nlohmann::json::object()) {
    if (status == "fail") passed = false;
    items.push_back({{"name", name}, {"status", status}, {"detail", std::move(detail)}});
  }
  void fail(const std::string& name, const Error& e) { add(name, "fail", {{"error", e.what()}}); }
};

bool divides_grid(double dt, const Lattice& lat) {
  const double ratio = dt / lat.dt();
  return std::abs(ratio - std::round(ratio)) < 1e-9 * std::max(1.0, ratio) && std::round(ratio) >= 1.0;
}

}  // namespace

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::NoConvergence:
    case ErrorKind::PsdViolation:
    case ErrorKind::NearSingular:
    case ErrorKind::StepFailure:
      return kExitSolver;
    case ErrorKind::BlowUp:
    case ErrorKind::SingularState:
      return kExitVerification;
    case ErrorKind::IoError:
      return kExitIo;
    default:
      return kExitInvalid;
  }
}

int cmd_validate(const RunConfig& cfg, const CommandContext&, std::ostream& out) {
  const auto& spec = cfg.problem;
  out << "n=" << spec.n << " m=" << spec.m << " regimes=" << spec.ell() << " T=" << format_double(spec.horizon)
      << (spec.is_deterministic() ? " deterministic coefficients" : " tree-valued coefficients") << '\n';
  const bool ok = validated(cfg, out);
  const double small = check_smallness(spec, cfg.solver.options.cond_threshold);
  out << "smallness sup e^{-q_ii t}|D R^-1 D'| = " << format_double(small);
  if (small > cfg.solver.smallness_threshold)
    out << " (warning: above " << format_double(cfg.solver.smallness_threshold)
        << "; the Picard contraction is not guaranteed)";
  out << '\n' << (ok ? "configuration valid" : "assumption check failed") << '\n';
  return ok ? kExitOk : kExitInvalid;
}

int cmd_solve(const RunConfig& cfg, const CommandContext& ctx, std::ostream& out) {
  if (!validated(cfg, out)) return kExitInvalid;
  const auto sol = solve_and_store(cfg, ctx, out);
  if (!sol.converged) {
    out << "no convergence after " << sol.iterations << " iterations; residual history kept in the metadata\n";
    return kExitSolver;
  }
  return kExitOk;
}

int cmd_simulate(const RunConfig& cfg, const CommandContext& ctx, std::ostream& out) {
  if (!validated(cfg, out)) return kExitInvalid;
  const auto sol = solve_and_store(cfg, ctx, out);
  if (!sol.converged) return kExitSolver;
  const auto doc = simulation_json(cfg, ctx, sol);
  const auto path = resolve(ctx, cfg.output.simulation_path);
  write_json(doc, path);
  out << "value " << format_double(doc["value"].get<double>()) << ", Monte Carlo "
      << format_double(doc["feedback"]["mean"].get<double>()) << " +- "
      << format_double(doc["feedback"]["std_error"].get<double>()) << '\n';
  for (const auto& g : doc["perturbations"])
    out << "gap[" << g["name"].get<std::string>() << "] " << format_double(g["gap"].get<double>()) << " +- "
        << format_double(g["std_error"].get<double>()) << '\n';
  out << "wrote " << path.string() << '\n';
  return kExitOk;
}

int cmd_verify(const RunConfig& cfg, const CommandContext& ctx, std::ostream& out) {
  if (!validated(cfg, out)) return kExitInvalid;
  const auto sol = solve_and_store(cfg, ctx, out);
  if (!sol.converged) {
    out << "no convergence; nothing to verify\n";
    return kExitSolver;
  }
  const auto report = verification_report(cfg, sol, seed_of(cfg, ctx));
  const auto path = resolve(ctx, cfg.output.report_path);
  write_json(report, path);
  for (const auto& c : report["checks"])
    out << std::left << std::setw(12) << c["status"].get<std::string>() << c["name"].get<std::string>() << '\n';
  out << (report["passed"].get<bool>() ? "verification passed" : "verification FAILED") << "\nwrote " << path.string()
      << '\n';
  return report["passed"].get<bool>() ? kExitOk : kExitVerification;
}

nlohmann::json verification_report(const RunConfig& cfg, const EsreSolution& sol, std::uint64_t seed) {
  const auto& spec = cfg.problem;
  const auto& v = cfg.verify;
  const auto& opts = cfg.solver.options;
  nlohmann::json report;
  report["command"] = "verify";

  if (!sol.converged) throw Error(ErrorKind::NoConvergence, "verification needs a converged solution");
  CheckList checks;

  const auto val = validate_assumptions(spec, cfg.solver.validation_tol);
  checks.add("assumptions", val.passed ? "pass" : "fail", {{"violations", violations_json(val)}});

  const double small = check_smallness(spec, opts.cond_threshold);
  checks.add("smallness", "info", {{"value", small}, {"threshold", cfg.solver.smallness_threshold},
                                   {"below_threshold", small <= cfg.solver.smallness_threshold}});

  checks.add("picard_convergence", "pass",
             {{"iterations", sol.iterations}, {"residual_history", sol.residual_history}});

  {
    double min_eig = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < sol.lattice.levels(); ++k)
      for (std::size_t j = 0; j < sol.lattice.nodes(k); ++j)
        for (std::size_t i = 0; i < spec.ell(); ++i) min_eig = std::min(min_eig, min_eigenvalue(sol.P.at(k, j, i)));
    checks.add("psd", min_eig >= -opts.psd_tol ? "pass" : "fail", {{"min_eigenvalue", min_eig}});
  }

  const auto& d = sol.diagnostics;
  checks.add("apriori_bound", d.holds() && d.holds_alt() ? "pass" : "fail",
             {{"K", d.K}, {"rho", d.rho}, {"log_bound", d.log_bound}, {"log_measured_sup", d.log_measured_sup},
              {"holds_alt", d.holds_alt()}});

  if (spec.is_deterministic()) {
    try {
      const auto direct = direct_coupled_oracle(spec, opts.grid_steps, opts.cond_threshold);
      double diff = 0.0;
      for (std::size_t i = 0; i < spec.ell(); ++i)
        diff = std::max(diff, (sol.initial(i).matrix() - direct.initial(i).matrix()).max_abs());
      checks.add("cross_oracle", diff <= v.oracle_tol ? "pass" : "fail",
                 {{"max_abs_difference", diff}, {"tolerance", v.oracle_tol}});
    } catch (const Error& e) {
      checks.fail("cross_oracle", e);
    }
  } else {
    checks.add("cross_oracle", "skipped", {{"reason", "tree-valued coefficients"}});
  }

  const bool ode = sol.backend() == Backend::ode;
  if (ode && std::all_of(v.ypx_dts.begin(), v.ypx_dts.end(), [&](double dt) { return divides_grid(dt, sol.lattice); })) {
    try {
      const auto stats = ypx_residual(sol, spec, v.regime, v.ypx_dts, seed);
      std::vector<double> dts, rms;
      for (const auto& s : stats) {
        dts.push_back(s.dt);
        rms.push_back(s.rms);
      }
      const double order = fitted_order(dts, rms);
      checks.add("bsde_residual_order", order >= v.min_order ? "pass" : "fail",
                 {{"dts", dts}, {"rms", rms}, {"order", order}, {"min_order", v.min_order}});
    } catch (const Error& e) {
      checks.fail("bsde_residual_order", e);
    }
  } else {
    checks.add("bsde_residual_order", "skipped",
               {{"reason", ode ? "step sizes are not multiples of the grid step" : "tree backend solution"}});
  }

  if (spec.is_deterministic() && spec.has_zero_d() && spec.n <= 2) {
    try {
      const auto coarse = tree_fbsde_iterate_check(spec, v.tree_depths[0], v.regime, v.fbsde_iterate);
      const auto fine = tree_fbsde_iterate_check(spec, v.tree_depths[1], v.regime, v.fbsde_iterate);
      const double ratio = fine.max_deviation > 0.0 ? coarse.max_deviation / fine.max_deviation
                                                    : std::numeric_limits<double>::infinity();
      const bool ok = coarse.max_deviation == 0.0 || ratio >= v.min_ratio;
      checks.add("tree_fbsde", ok ? "pass" : "fail",
                 {{"depths", v.tree_depths},
                  {"deviation", {coarse.max_deviation, fine.max_deviation}},
                  {"ratio", std::isfinite(ratio) ? nlohmann::json(ratio) : nlohmann::json(nullptr)},
                  {"min_ratio", v.min_ratio},
                  {"iterate", v.fbsde_iterate}});
    } catch (const Error& e) {
      checks.fail("tree_fbsde", e);
    }
  } else {
    checks.add("tree_fbsde", "skipped", {{"reason", "needs deterministic coefficients, D = 0 and n <= 2"}});
  }

  if (ode) {
    try {
      const auto x = xinv_product_check(spec, sol, v.regime, v.xinv_dt, seed);
      checks.add("xinv_product", "info", {{"rms", x.stats.rms}, {"max", x.stats.max}, {"dt", v.xinv_dt}});
    } catch (const Error& e) {
      checks.add("xinv_product", "info", {{"error", e.what()}});
    }
  }

  try {
    RunConfig with_seed = cfg;
    with_seed.simulate.seed = seed;
    const auto sim = simulation_json(with_seed, CommandContext{}, sol);
    const double value = sim["value"].get<double>();
    const double mean = sim["feedback"]["mean"].get<double>();
    const double se = sim["feedback"]["std_error"].get<double>();
    const double tol = std::max(v.se_factor * se, v.value_tol);
    checks.add("mc_value", std::abs(mean - value) <= tol ? "pass" : "fail",
               {{"value", value}, {"mc_mean", mean}, {"std_error", se}, {"tolerance", tol}});
    for (const auto& g : sim["perturbations"]) {
      const double gap = g["gap"].get<double>();
      const double gse = g["std_error"].get<double>();
      bool ok = gap >= -v.se_factor * gse;
      nlohmann::json detail{{"gap", gap}, {"std_error", gse}, {"theoretical", g["theoretical"]}};
      if (!g["theoretical"].is_null()) {
        const double gtol = std::max(v.se_factor * gse, v.gap_tol);
        detail["tolerance"] = gtol;
        ok = ok && std::abs(gap - g["theoretical"].get<double>()) <= gtol;
      }
      checks.add("gap:" + g["name"].get<std::string>(), ok ? "pass" : "fail", detail);
    }
  } catch (const Error& e) {
    checks.fail("mc_value", e);
  }

  report["seed"] = seed;
  report["checks"] = checks.items;
  report["passed"] = checks.passed;
  return report;
}

int cmd_report(const RunConfig& cfg, const CommandContext& ctx, std::ostream& out) {
  const auto sol_path = resolve(ctx, cfg.output.solution_path);
  const auto table = read_solution_csv(sol_path);
  const auto meta = read_json(metadata_path(sol_path));

  std::ostringstream series;
  series << "t,regime,trace_P,min_eig_P,max_eig_P,norm_Lambda\n";
  for (std::size_t k = 0; k < table.times.size(); ++k)
    for (std::size_t i = 0; i < table.regimes; ++i) {
      const auto& p = table.p(k, i);
      series << format_double(table.times[k]) << ',' << i + 1 << ',' << format_double(p.trace()) << ','
             << format_double(min_eigenvalue(p)) << ',' << format_double(max_eigenvalue(p)) << ','
             << format_double(table.lambda(k, i).frobenius_norm()) << '\n';
    }
  const auto series_path = resolve(ctx, cfg.output.series_path);
  write_text(series.str(), series_path);

  std::ostringstream residuals;
  residuals << "iteration,residual\n";
  const auto& hist = meta["residual_history"];
  for (std::size_t k = 0; k < hist.size(); ++k) residuals << k + 1 << ',' << format_double(hist[k].get<double>()) << '\n';
  const auto res_path = series_path.parent_path() / (series_path.stem().string() + ".residuals.csv");
  write_text(residuals.str(), res_path);

  std::ostringstream s;
  s << "Regime-switching LQ solution summary\n\n";
  s << "backend: " << meta["backend"].get<std::string>() << ", steps " << meta["steps"].get<std::size_t>()
    << ", horizon " << format_double(meta["horizon"].get<double>()) << '\n';
  s << "Picard iterations: " << meta["iterations"].get<std::size_t>()
    << ", converged: " << (meta["converged"].get<bool>() ? "yes" : "no") << '\n';
  if (!hist.empty()) s << "final residual: " << format_double(hist.back().get<double>()) << '\n';
  s << "a priori bound holds: " << (meta["apriori"]["holds"].get<bool>() ? "yes" : "no") << " (log bound "
    << format_double(meta["apriori"]["log_bound"].get<double>()) << ", log measured "
    << format_double(meta["apriori"]["log_measured_sup"].get<double>()) << ")\n\n";
  for (std::size_t i = 0; i < table.regimes; ++i) {
    s << "P(0, regime " << i + 1 << "):";
    const auto& p = table.p(0, i);
    for (std::size_t r = 0; r < p.dim(); ++r) {
      s << (r == 0 ? " [" : "; ");
      for (std::size_t c = 0; c < p.dim(); ++c) s << (c ? " " : "") << format_double(p(r, c));
    }
    s << "]\n";
  }

  const auto sim_path = resolve(ctx, cfg.output.simulation_path);
  if (std::filesystem::exists(sim_path)) {
    const auto sim = read_json(sim_path);
    s << "\nMonte Carlo (" << sim["feedback"]["n_paths"].get<std::size_t>() << " paths, dt "
      << format_double(sim["feedback"]["dt"].get<double>()) << ", seed " << sim["feedback"]["seed"].get<std::uint64_t>()
      << ")\n  value " << format_double(sim["value"].get<double>()) << ", estimate "
      << format_double(sim["feedback"]["mean"].get<double>()) << " +- "
      << format_double(sim["feedback"]["std_error"].get<double>()) << '\n';
    for (const auto& g : sim["perturbations"]) {
      s << "  gap " << g["name"].get<std::string>() << ": " << format_double(g["gap"].get<double>()) << " +- "
        << format_double(g["std_error"].get<double>());
      if (!g["theoretical"].is_null()) s << " (predicted " << format_double(g["theoretical"].get<double>()) << ")";
      s << '\n';
    }
  }
  const auto rep_path = resolve(ctx, cfg.output.report_path);
  if (std::filesystem::exists(rep_path)) {
    const auto rep = read_json(rep_path);
    s << "\nVerification: " << (rep.value("passed", false) ? "passed" : "FAILED") << '\n';
    if (rep.contains("checks"))
      for (const auto& c : rep["checks"])
        s << "  " << std::left << std::setw(10) << c["status"].get<std::string>() << c["name"].get<std::string>()
          << '\n';
  }
  const auto summary_path = resolve(ctx, cfg.output.summary_path);
  write_text(s.str(), summary_path);
  out << s.str() << "\nwrote " << summary_path.string() << ", " << series_path.string() << ", " << res_path.string()
      << '\n';
  return kExitOk;
}

int run_command(const std::string& command, const std::filesystem::path& config_path, const CommandContext& context,
                std::ostream& out, std::ostream& err) {
  try {
    const RunConfig cfg = parse_config(config_path);
    if (command == "validate") return cmd_validate(cfg, context, out);
    if (command == "solve") return cmd_solve(cfg, context, out);
    if (command == "simulate") return cmd_simulate(cfg, context, out);
    if (command == "verify") return cmd_verify(cfg, context, out);
    if (command == "report") return cmd_report(cfg, context, out);
    err << "unknown command '" << command << "'\n";
    return kExitInvalid;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  }
}

}  // namespace regimelq

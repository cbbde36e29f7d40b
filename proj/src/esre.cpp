#include "regimelq/esre.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "esre_internal.hpp"
#include "regimelq/error.hpp"

namespace regimelq {

Lattice make_lattice(const ProblemSpec& spec, const EsreOptions& options) {
  if (options.backend == Backend::ode) {
    if (!spec.is_deterministic()) {
      throw Error(ErrorKind::StructuralError, "tree-valued coefficients need the tree backend");
    }
    return Lattice(Backend::ode, options.grid_steps, spec.horizon);
  }
  if (const auto depth = spec.tree_depth(); depth && *depth != options.tree_depth) {
    std::ostringstream os;
    os << "coefficient tree depth " << *depth << " differs from solver tree_depth " << options.tree_depth;
    throw Error(ErrorKind::StructuralError, os.str());
  }
  return Lattice(Backend::tree, options.tree_depth, spec.horizon);
}

TildePair solve_p0(const ProblemSpec& spec, const Lattice& lattice, const EsreOptions& options) {
  return lattice.backend() == Backend::ode ? detail::ode_solve_p0(spec, lattice, options)
                                           : detail::tree_solve_p0(spec, lattice, options);
}

TildePair picard_step(const ProblemSpec& spec, const Lattice& lattice, const RegimeField& previous,
                      const EsreOptions& options) {
  return lattice.backend() == Backend::ode ? detail::ode_picard_step(spec, lattice, previous, options)
                                           : detail::tree_picard_step(spec, lattice, previous, options);
}

namespace {

// Binomial probabilities of the nodes of one tree level.
std::vector<double> level_weights(const Lattice& lattice, std::size_t level) {
  const std::size_t nodes = lattice.nodes(level);
  std::vector<double> w(nodes, 1.0);
  if (lattice.backend() == Backend::ode) return w;
  for (std::size_t j = 0; j < nodes; ++j) {
    const double k = static_cast<double>(level);
    const double jj = static_cast<double>(j);
    w[j] = std::exp(std::lgamma(k + 1.0) - std::lgamma(jj + 1.0) - std::lgamma(k - jj + 1.0) - k * std::log(2.0));
  }
  return w;
}

double max_norm(const CoefficientField& f) {
  double out = 0.0;
  for (const Matrix* m : f.all_values()) out = std::max(out, m->frobenius_norm());
  return out;
}

}  // namespace

AprioriDiagnostics apriori_diagnostics(const ProblemSpec& spec, const Lattice& lattice, const RegimeField& p0_tilde,
                                       const RegimeField& lambda) {
  AprioriDiagnostics d;
  const Generator& g = spec.generator;
  const double T = spec.horizon;
  double K = 0.0;
  for (std::size_t i = 0; i < spec.ell(); ++i) {
    const RegimeCoefficients& c = spec.regimes[i];
    const double a = max_norm(c.A);
    const double cc = max_norm(c.C);
    K = std::max({K, 2.0 * a + cc * cc, 2.0 * cc, max_norm(c.Q), max_norm(c.G)});
    for (std::size_t j = 0; j < spec.ell(); ++j) {
      if (j == i) continue;
      const double e = g.rate(i, i) - g.rate(j, j);
      K = std::max(K, std::abs(g.rate(i, j)) * std::exp(std::max(0.0, e * T)));
    }
  }
  d.K = K;
  const double ell1 = static_cast<double>(spec.ell()) - 1.0;
  const double quad = (3.0 * ell1 * ell1 * T + 3.0) * K * K;
  d.rho = quad + 2.0 * K;
  d.rho_alt = quad + 3.0 * K;

  auto log_sup = [&](double rho) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < lattice.levels(); ++k)
      for (std::size_t j = 0; j < lattice.nodes(k); ++j)
        for (std::size_t i = 0; i < spec.ell(); ++i) {
          const double norm = p0_tilde.at(k, j, i).frobenius_norm();
          if (norm > 0.0) best = std::max(best, rho * lattice.time(k) + 2.0 * std::log(norm));
        }
    return best;
  };
  auto log_bound = [&](double rho) {
    if (rho <= 0.0) return std::numeric_limits<double>::infinity();
    return std::log(1.5) + rho * T + std::log(K * K + 1.0 / rho);
  };
  d.log_measured_sup = log_sup(d.rho);
  d.log_bound = log_bound(d.rho);
  d.log_measured_sup_alt = log_sup(d.rho_alt);
  d.log_bound_alt = log_bound(d.rho_alt);
  d.measured_sup = std::exp(d.log_measured_sup);
  d.bound = std::exp(d.log_bound);
  d.measured_sup_alt = std::exp(d.log_measured_sup_alt);
  d.bound_alt = std::exp(d.log_bound_alt);

  const double dt = lattice.dt();
  for (std::size_t i = 0; i < spec.ell(); ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < lattice.levels(); ++k) {
      const auto w = level_weights(lattice, k);
      for (std::size_t j = 0; j < lattice.nodes(k); ++j) {
        const double norm = lambda.at(k, j, i).frobenius_norm();
        acc += dt * w[j] * norm * norm;
      }
    }
    d.lambda_l2 = std::max(d.lambda_l2, std::sqrt(acc));
  }
  return d;
}

EsreSolution run_picard(const ProblemSpec& spec, const EsreOptions& options) {
  if (options.zero_d_form && !spec.has_zero_d()) {
    throw Error(ErrorKind::StructuralError, "the D = 0 form of the Riccati driver needs D identically zero");
  }
  if (!(options.picard_tol > 0.0)) throw Error(ErrorKind::RangeError, "picard_tol must be positive");
  EsreSolution sol;
  sol.options = options;
  sol.lattice = make_lattice(spec, options);
  const Lattice& lattice = sol.lattice;

  TildePair current = solve_p0(spec, lattice, options);
  sol.diagnostics = apriori_diagnostics(spec, lattice, current.P, current.Lambda);
  if (options.keep_iterates) sol.iterates.push_back(current.P);

  for (std::size_t k = 0; k < options.picard_max_iter; ++k) {
    TildePair next = picard_step(spec, lattice, current.P, options);
    const double residual = sup_distance(next.P, current.P);
    sol.residual_history.push_back(residual);
    sol.iterations = k + 1;
    current = std::move(next);
    if (options.keep_iterates) sol.iterates.push_back(current.P);
    if (residual <= options.picard_tol) {
      sol.converged = true;
      break;
    }
  }

  sol.P_tilde = std::move(current.P);
  sol.Lambda_tilde = std::move(current.Lambda);
  UntildedFields plain = untilde_solution(sol.P_tilde, sol.Lambda_tilde, spec.generator, lattice);
  sol.P = std::move(plain.P);
  sol.Lambda = std::move(plain.Lambda);
  const std::size_t last = lattice.steps();
  for (std::size_t j = 0; j < lattice.nodes(last); ++j)
    for (std::size_t i = 0; i < spec.ell(); ++i) {
      const std::optional<TreeNode> node =
          lattice.backend() == Backend::tree ? std::optional<TreeNode>(TreeNode{last, j}) : std::nullopt;
      sol.P.at(last, j, i) = spec.terminal(i, node);
    }

  const double lambda_l2 = apriori_diagnostics(spec, lattice, sol.P_tilde, sol.Lambda).lambda_l2;
  sol.diagnostics.lambda_l2 = lambda_l2;
  return sol;
}

EsreSolution solve_esre(const ProblemSpec& spec, const EsreOptions& options) {
  EsreSolution sol = run_picard(spec, options);
  if (!sol.converged) {
    std::ostringstream os;
    os << "Picard scheme did not reach " << options.picard_tol << " in " << options.picard_max_iter
       << " iterations (last residual "
       << (sol.residual_history.empty() ? std::numeric_limits<double>::quiet_NaN() : sol.residual_history.back())
       << ")";
    throw Error(ErrorKind::NoConvergence, os.str());
  }
  return sol;
}

}  // namespace regimelq

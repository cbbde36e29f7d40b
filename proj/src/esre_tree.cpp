// Binomial-tree BSDE backend. Explicit Euler in time: at node (k, j) the
// conditional expectation E is the mean of the two children, the martingale
// integrand Λ̃ is the symmetrised child difference over 2√dt, and the driver is
// evaluated at (E, Λ̃).

#include <cmath>
#include <sstream>

#include "esre_internal.hpp"
#include "regimelq/error.hpp"

namespace regimelq::detail {

namespace {

struct ChildStats {
  SymMatrix mean;
  SymMatrix z;
};

ChildStats child_stats(const RegimeField& field, std::size_t level, std::size_t node, std::size_t regime,
                       double inv_two_sqrt_dt) {
  const SymMatrix& up = field.at(level + 1, node + 1, regime);
  const SymMatrix& down = field.at(level + 1, node, regime);
  return ChildStats{0.5 * (up + down), inv_two_sqrt_dt * (up - down)};
}

std::string node_context(const char* what, std::size_t regime, std::size_t level, std::size_t node) {
  std::ostringstream os;
  os << what << " (regime " << regime + 1 << ", level " << level << ", node " << node << ")";
  return os.str();
}

void set_terminal(TildePair& out, const ProblemSpec& spec, const Lattice& lattice) {
  const TildeTransform tt(spec);
  const std::size_t last = lattice.steps();
  for (std::size_t j = 0; j < lattice.nodes(last); ++j)
    for (std::size_t i = 0; i < spec.ell(); ++i) out.P.at(last, j, i) = tt.terminal(i, TreeNode{last, j});
}

}  // namespace

TildePair tree_solve_p0(const ProblemSpec& spec, const Lattice& lattice, const EsreOptions& options) {
  const std::size_t ell = spec.ell();
  const std::size_t n = spec.n;
  const TildeTransform tt(spec);
  TildePair out{RegimeField(lattice, ell, n), RegimeField(lattice, ell, n)};
  set_terminal(out, spec, lattice);
  const double dt = lattice.dt();
  const double scale = 0.5 / std::sqrt(dt);

  for (std::size_t level = lattice.steps(); level-- > 0;) {
    const double t = lattice.time(level);
    parallel_for(lattice.nodes(level), options.execution, [&](std::size_t node) {
      const TreeNode where{level, node};
      std::vector<SymMatrix> base(ell);
      std::vector<SymMatrix> v(ell);
      for (std::size_t i = 0; i < ell; ++i) {
        const ChildStats s = child_stats(out.P, level, node, i, scale);
        const LocalCoefficients c = tt.local(t, i, where);
        base[i] = s.mean + dt * (drift_pi(c, s.mean, s.z) + c.Q);
        v[i] = s.mean;
        out.Lambda.at(level, node, i) = s.z;
      }
      // Regime coupling at the current node: contraction with factor
      // dt·max_i Σ_j q_ij e^{(q_ii - q_jj)t}.
      bool settled = false;
      for (std::size_t sweep = 0; sweep < options.inner_max_iter && !settled; ++sweep) {
        std::vector<SymMatrix> next(ell);
        double change = 0.0;
        double size = 1.0;
        for (std::size_t i = 0; i < ell; ++i) {
          next[i] = base[i] + dt * coupling_source(spec.generator, i, t, n,
                                                   [&](std::size_t j) -> const SymMatrix& { return v[j]; });
          change = std::max(change, (next[i] - v[i]).frobenius_norm());
          size = std::max(size, next[i].frobenius_norm());
        }
        v = std::move(next);
        settled = change <= 1e-14 * size;
      }
      if (!settled) {
        throw Error(ErrorKind::NoConvergence, node_context("regime-coupling fixed point", 0, level, node));
      }
      for (std::size_t i = 0; i < ell; ++i) {
        psd_guard(v[i], options.psd_tol, node_context("initial iterate", i, level, node));
        out.P.at(level, node, i) = v[i];
      }
    });
  }
  return out;
}

TildePair tree_picard_step(const ProblemSpec& spec, const Lattice& lattice, const RegimeField& previous,
                           const EsreOptions& options) {
  const std::size_t ell = spec.ell();
  const std::size_t n = spec.n;
  const TildeTransform tt(spec);
  TildePair out{RegimeField(lattice, ell, n), RegimeField(lattice, ell, n)};
  set_terminal(out, spec, lattice);
  const double dt = lattice.dt();
  const double scale = 0.5 / std::sqrt(dt);

  for (std::size_t level = lattice.steps(); level-- > 0;) {
    const double t = lattice.time(level);
    const std::size_t nodes = lattice.nodes(level);
    parallel_for(nodes * ell, options.execution, [&](std::size_t task) {
      const std::size_t node = task / ell;
      const std::size_t i = task % ell;
      const TreeNode where{level, node};
      const ChildStats s = child_stats(out.P, level, node, i, scale);
      const LocalCoefficients c = tt.local(t, i, where);
      const SymMatrix h_term = options.zero_d_form ? drift_h_zero_d(c, s.mean, options.cond_threshold)
                                                   : drift_h(c, s.mean, s.z, options.cond_threshold);
      const SymMatrix source = coupling_source(spec.generator, i, t, n, [&](std::size_t j) -> const SymMatrix& {
        return previous.at(level, node, j);
      });
      SymMatrix v = s.mean + dt * (drift_pi(c, s.mean, s.z) + c.Q + h_term + source);
      psd_guard(v, options.psd_tol, node_context("Picard iterate", i, level, node));
      out.P.at(level, node, i) = v;
      out.Lambda.at(level, node, i) = s.z;
    });
  }
  return out;
}

}  // namespace regimelq::detail

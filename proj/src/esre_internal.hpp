#pragma once

// Backend entry points shared by esre.cpp, esre_ode.cpp and esre_tree.cpp.

#include <cmath>
#include <string>

#include "regimelq/esre.hpp"

namespace regimelq::detail {

/// Clips eigenvalues in (-psd_tol, 0) and throws PsdViolation below -psd_tol.
void psd_guard(SymMatrix& p, double psd_tol, const std::string& where);

/// Σ_{j≠i} q_ij e^{(q_ii - q_jj)t} P̃(j), with P̃(j) supplied by value(j).
template <class ValueFn>
SymMatrix coupling_source(const Generator& g, std::size_t regime, double t, std::size_t dim, ValueFn&& value) {
  SymMatrix out(dim);
  for (std::size_t j = 0; j < g.regimes(); ++j) {
    if (j == regime || g.rate(regime, j) == 0.0) continue;
    const double w = g.rate(regime, j) * std::exp((g.rate(regime, regime) - g.rate(j, j)) * t);
    out += w * value(j);
  }
  return out;
}

TildePair ode_solve_p0(const ProblemSpec& spec, const Lattice& lattice, const EsreOptions& options);
TildePair ode_picard_step(const ProblemSpec& spec, const Lattice& lattice, const RegimeField& previous,
                          const EsreOptions& options);

TildePair tree_solve_p0(const ProblemSpec& spec, const Lattice& lattice, const EsreOptions& options);
TildePair tree_picard_step(const ProblemSpec& spec, const Lattice& lattice, const RegimeField& previous,
                           const EsreOptions& options);

}  // namespace regimelq::detail

#pragma once

// Extended stochastic Riccati equation
//
//   dP(i) = -[Π(P,Λ) + Q + Σ_j q_ij P(j) + H(P,Λ,R,S)] dt + Λ dW,   P(T,i) = G(i),
//
// solved in exponentially transformed coordinates P̃(t,i) = e^{q_ii t} P(t,i)
// by a monotone Picard scheme: P̃₀ solves the linear coupled equation, every
// later iterate a decoupled Riccati equation per regime with the cross-regime
// coupling frozen at the previous iterate.

#include <cstddef>
#include <optional>
#include <vector>

#include "regimelq/lattice.hpp"
#include "regimelq/matcore.hpp"
#include "regimelq/model.hpp"
#include "regimelq/parallel.hpp"

namespace regimelq {

// ---------------------------------------------------------------------------
// Pointwise functionals. Pass raw coefficients for the untransformed equation
// and TildeTransform::local coefficients for the transformed one.

/// Π = PA + AᵀP + CᵀPC + ΛC + CᵀΛ.
SymMatrix drift_pi(const LocalCoefficients& c, const SymMatrix& p, const SymMatrix& lam);

/// N = BᵀP + DᵀPC + DᵀΛ + S  (m×n).
Matrix gain_numerator(const LocalCoefficients& c, const SymMatrix& p, const SymMatrix& lam);

/// R + DᵀPD.
SymMatrix control_weight(const LocalCoefficients& c, const SymMatrix& p);

/// H = -Nᵀ(R + DᵀPD)⁻¹N. NearSingular if the weight fails the guarded inverse.
SymMatrix drift_h(const LocalCoefficients& c, const SymMatrix& p, const SymMatrix& lam,
                  double cond_threshold = kDefaultCondThreshold);

/// H for D ≡ 0: -(PB + Sᵀ)R⁻¹(BᵀP + S).
SymMatrix drift_h_zero_d(const LocalCoefficients& c, const SymMatrix& p,
                         double cond_threshold = kDefaultCondThreshold);

/// θ̂ = -(R + DᵀPD)⁻¹N  (m×n).
Matrix theta_hat(const LocalCoefficients& c, const SymMatrix& p, const SymMatrix& lam,
                 double cond_threshold = kDefaultCondThreshold);

/// G(θ) = (A+Bθ)ᵀP + P(A+Bθ) + (C+Dθ)ᵀΛ + Λ(C+Dθ) + (C+Dθ)ᵀP(C+Dθ).
SymMatrix g_of_theta(const LocalCoefficients& c, const SymMatrix& p, const SymMatrix& lam, const Matrix& theta);

/// F(θ) = G(θ) + θᵀS + Sᵀθ + θᵀRθ + Q. Minimised in the Loewner order by θ̂,
/// where F(θ̂) = Π + Q + H.
SymMatrix f_of_theta(const LocalCoefficients& c, const SymMatrix& p, const SymMatrix& lam, const Matrix& theta);

// ---------------------------------------------------------------------------
// Solver

struct EsreOptions {
  Backend backend = Backend::ode;
  std::size_t grid_steps = 2000;
  std::size_t tree_depth = 10;
  double picard_tol = 1e-9;
  std::size_t picard_max_iter = 60;
  double psd_tol = 1e-9;
  double cond_threshold = kDefaultCondThreshold;
  Execution execution = Execution::parallel;
  bool keep_iterates = false;
  /// Use the D ≡ 0 closed form of H (requires D ≡ 0).
  bool zero_d_form = false;
  std::size_t inner_max_iter = 200;  // tree backend, regime-coupling fixed point
};

struct AprioriDiagnostics {
  double K = 0.0;
  double rho = 0.0;           // (3(ℓ-1)²T + 3)K² + 2K
  double bound = 0.0;         // (3/2) e^{ρT} (K² + 1/ρ)
  double measured_sup = 0.0;  // max_i sup_t e^{ρt} |P̃₀(t,i)|²
  double rho_alt = 0.0;       // same with +3K
  double bound_alt = 0.0;
  double measured_sup_alt = 0.0;
  double lambda_l2 = 0.0;     // max_i discrete L² norm of Λ (diagnostic only)
  // Logarithms of the above; e^{ρT} overflows quickly, the comparison does not.
  double log_bound = 0.0;
  double log_measured_sup = 0.0;
  double log_bound_alt = 0.0;
  double log_measured_sup_alt = 0.0;

  [[nodiscard]] bool holds() const noexcept { return log_measured_sup <= log_bound; }
  [[nodiscard]] bool holds_alt() const noexcept { return log_measured_sup_alt <= log_bound_alt; }
};

struct EsreSolution {
  Lattice lattice;
  RegimeField P;
  RegimeField Lambda;
  RegimeField P_tilde;
  RegimeField Lambda_tilde;
  std::size_t iterations = 0;
  std::vector<double> residual_history;
  bool converged = false;
  AprioriDiagnostics diagnostics;
  /// P̃₀, P̃₁, ... when EsreOptions::keep_iterates is set.
  std::vector<RegimeField> iterates;
  EsreOptions options;

  [[nodiscard]] Backend backend() const noexcept { return lattice.backend(); }
  /// P(0, i) (root node for tree solutions).
  [[nodiscard]] const SymMatrix& initial(std::size_t regime) const { return P.at(0, 0, regime); }
};

/// Lattice matching the options (grid_steps or tree_depth).
Lattice make_lattice(const ProblemSpec& spec, const EsreOptions& options);

/// Linear coupled equation for P̃₀ with Λ̃₀ from the martingale increment
/// (identically zero on the ODE grid).
struct TildePair {
  RegimeField P;
  RegimeField Lambda;
};
TildePair solve_p0(const ProblemSpec& spec, const Lattice& lattice, const EsreOptions& options);

/// One Picard step P̃_k ↦ P̃_{k+1}.
TildePair picard_step(const ProblemSpec& spec, const Lattice& lattice, const RegimeField& previous,
                      const EsreOptions& options);

/// Picard loop without throwing on non-convergence (converged flag reports it).
EsreSolution run_picard(const ProblemSpec& spec, const EsreOptions& options);

/// run_picard, then NoConvergence if the tolerance was not reached.
EsreSolution solve_esre(const ProblemSpec& spec, const EsreOptions& options);

/// The full coupled Riccati system integrated directly in P coordinates
/// (deterministic coefficients only). StepFailure if |P| exceeds 1e8.
EsreSolution direct_coupled_oracle(const ProblemSpec& spec, std::size_t grid_steps,
                                   double cond_threshold = kDefaultCondThreshold);

/// Conservative constant K and the a priori estimate for P̃₀.
AprioriDiagnostics apriori_diagnostics(const ProblemSpec& spec, const Lattice& lattice, const RegimeField& p0_tilde,
                                       const RegimeField& lambda);

/// P̃ at an arbitrary time by cubic Lagrange interpolation on the ODE grid.
SymMatrix interpolate_grid(const RegimeField& field, const Lattice& lattice, std::size_t regime, double t);

}  // namespace regimelq

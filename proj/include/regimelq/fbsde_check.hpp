#pragma once

// Checks of the forward-backward representation of the Riccati solution for a
// frozen regime i. With closed-loop control u = θ̂X,
//
//   dX = (A X + B u) dt + (C X + D u) dW,                       X(0) = I,
//   dY = -(AᵀY + CᵀZ + (Q̃ + Σ) X + S̃ᵀu) dt + Z dW,            Y(T) = G̃ X(T),
//
// where Σ is the frozen cross-regime source, and Y = P̃X, Z = Λ̃X + P̃(C X + D u).

#include <cstdint>
#include <vector>

#include "regimelq/esre.hpp"

namespace regimelq {

struct ResidualStats {
  double rms = 0.0;
  double max = 0.0;
  double dt = 0.0;
  std::size_t sample_count = 0;
};

/// Least-squares slope of log(error) against log(dt).
double fitted_order(const std::vector<double>& dts, const std::vector<double>& errors);

/// Discrete BSDE defect per unit time, |Y(t+dt) - Y(t) + f dt - Z ΔW| / dt,
/// along an Euler path of the closed-loop state with Y := P̃X. Each dt must be
/// a multiple of the solution grid step. Needs an ODE-backend solution.
std::vector<ResidualStats> ypx_residual(const EsreSolution& solution, const ProblemSpec& spec, std::size_t regime,
                                        const std::vector<double>& dt_list, std::uint64_t seed = 0);

/// Matrices on a non-recombining binomial tree: level k holds 2^k nodes, node
/// b has children 2b (down) and 2b + 1 (up).
struct FbsdeTriple {
  std::size_t depth = 0;
  double dt = 0.0;
  std::size_t regime = 0;
  std::vector<Matrix> X, Y, Z, u;

  [[nodiscard]] static std::size_t index(std::size_t level, std::size_t node) noexcept {
    return (std::size_t{1} << level) - 1 + node;
  }
};

struct FbsdeOracleOptions {
  double tol = 1e-10;
  std::size_t max_sweeps = 5000;
  double det_guard = 1e-12;
};

struct TreeFbsdeResult {
  FbsdeTriple triple;
  double max_deviation = 0.0;  // max over nodes of |Y X⁻¹ - P̃_ref|
  std::size_t sweeps = 0;
  bool damped = false;
};

/// Solves the FBSDE on the tree by alternating forward (X given Y, Z) and
/// backward (Y, Z given X) sweeps. `previous` supplies the frozen source and
/// `reference` the Picard iterate it is compared against; both live on the
/// recombining tree of the same depth and are read at node (k, popcount(b)).
/// Needs D ≡ 0, n <= 2 and depth <= 12.
TreeFbsdeResult tree_fbsde_oracle(const ProblemSpec& spec, const Lattice& lattice, std::size_t regime,
                                  const RegimeField& previous, const RegimeField& reference,
                                  const FbsdeOracleOptions& options = {});

/// Convenience: builds P̃_{k-1} and P̃_k with the tree backend at `depth` and
/// runs the oracle for iterate k >= 1.
TreeFbsdeResult tree_fbsde_iterate_check(const ProblemSpec& spec, std::size_t depth, std::size_t regime,
                                         std::size_t iterate, const FbsdeOracleOptions& options = {});

struct XinvResult {
  ResidualStats stats;  // deviation |X X⁻¹ - I|_F over the steps
  Matrix x_final;
  Matrix xinv_final;
};

/// Integrates X and X⁻¹ (dX⁻¹ = -X⁻¹(A_k - C_k²)dt - X⁻¹C_k dW) separately with
/// A_k = A + Bθ̂, C_k = C + Dθ̂ read from the solution. RK4 when C_k ≡ 0,
/// Euler-Maruyama with shared increments otherwise.
XinvResult xinv_product_check(const ProblemSpec& spec, const EsreSolution& solution, std::size_t regime, double dt,
                              std::uint64_t seed = 0);

}  // namespace regimelq

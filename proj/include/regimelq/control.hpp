#pragma once

// Feedback control u* = K(t, α_t) X with K = -(R + DᵀPD)⁻¹(BᵀP + DᵀPC + DᵀΛ + S),
// closed-loop simulation of the regime-switching state, Monte Carlo costs and
// the optimality gap of perturbed controls.

#include <cstdint>
#include <optional>
#include <vector>

#include "regimelq/esre.hpp"
#include "regimelq/parallel.hpp"

namespace regimelq {

class FeedbackGain {
 public:
  FeedbackGain() = default;
  FeedbackGain(const Lattice& lattice, std::size_t regimes, std::size_t m, std::size_t n);

  [[nodiscard]] const Lattice& lattice() const noexcept { return lattice_; }
  [[nodiscard]] std::size_t regimes() const noexcept { return regimes_; }
  Matrix& at(std::size_t level, std::size_t node, std::size_t regime) {
    return values_[(lattice_.offset(level) + node) * regimes_ + regime];
  }
  [[nodiscard]] const Matrix& at(std::size_t level, std::size_t node, std::size_t regime) const {
    return values_[(lattice_.offset(level) + node) * regimes_ + regime];
  }

 private:
  Lattice lattice_;
  std::size_t regimes_ = 0;
  std::vector<Matrix> values_;
};

FeedbackGain feedback_gain(const EsreSolution& solution, const ProblemSpec& spec);

/// ⟨P(0, i0) x, x⟩.
double value_at(const EsreSolution& solution, const std::vector<double>& x0, std::size_t i0);

/// Deterministic additive control perturbation e(t) ∈ ℝᵐ.
class Perturbation {
 public:
  enum class Kind { zero, constant, table, linear };

  Perturbation() = default;
  static Perturbation constant(std::vector<double> value);
  /// Piecewise constant, left sample on [t_k, t_{k+1}); times[0] must be 0.
  static Perturbation table(std::vector<double> times, std::vector<std::vector<double>> values);
  /// e(t) = intercept + slope · t.
  static Perturbation linear(std::vector<double> intercept, std::vector<double> slope);

  [[nodiscard]] Kind kind() const noexcept { return kind_; }
  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] bool is_zero() const noexcept;
  /// Writes e(t) into out (size m). The zero perturbation fills zeros.
  void eval(double t, std::vector<double>& out) const;

 private:
  Kind kind_ = Kind::zero;
  std::size_t dim_ = 0;
  std::vector<double> times_;
  std::vector<std::vector<double>> values_;  // table samples, or {intercept, slope}
};

struct Policy {
  const FeedbackGain* gain = nullptr;  // null: open loop u = e(t)
  Perturbation perturbation;
};

struct PathRecord {
  std::vector<double> t;
  std::vector<std::vector<double>> X;
  std::vector<std::size_t> regime;
  std::vector<std::vector<double>> u;
  std::vector<double> running_cost;  // accumulated up to t
  double terminal_cost = 0.0;
  double total_cost = 0.0;
};

struct CostEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_paths = 0;
  double dt = 0.0;
  std::uint64_t seed = 0;
};

struct SimulationOptions {
  double dt = 1e-3;
  std::uint64_t seed = 0;
  Execution execution = Execution::parallel;
  double blowup = 1e8;
};

/// Euler-Maruyama on the exact regime path of path index `path`; the Brownian
/// and regime streams are substreams (seed, path).
PathRecord simulate_closed_loop(const ProblemSpec& spec, const Policy& policy, const std::vector<double>& x0,
                                std::size_t i0, const SimulationOptions& options, std::uint64_t path = 0);

CostEstimate mc_cost(const ProblemSpec& spec, const Policy& policy, const std::vector<double>& x0, std::size_t i0,
                     std::size_t n_paths, const SimulationOptions& options);

/// Per-path costs, in path order.
std::vector<double> path_costs(const ProblemSpec& spec, const Policy& policy, const std::vector<double>& x0,
                               std::size_t i0, std::size_t n_paths, const SimulationOptions& options);

struct GapEstimate {
  double gap = 0.0;        // mean(J(u* + e) - J(u*)) over common paths
  double std_error = 0.0;  // of the paired differences
  std::optional<double> theoretical;  // ∫ E⟨(R + DᵀPD)e, e⟩ dt, deterministic solutions only
  CostEstimate feedback;
  CostEstimate perturbed;
};

GapEstimate optimality_gap(const ProblemSpec& spec, const EsreSolution& solution, const Perturbation& perturbation,
                           const std::vector<double>& x0, std::size_t i0, std::size_t n_paths,
                           const SimulationOptions& options);

/// Several perturbations against one shared set of feedback paths.
std::vector<GapEstimate> optimality_gaps(const ProblemSpec& spec, const EsreSolution& solution,
                                         const std::vector<Perturbation>& perturbations, const std::vector<double>& x0,
                                         std::size_t i0, std::size_t n_paths, const SimulationOptions& options);

/// Completion-of-squares prediction on the simulation grid (left-endpoint rule).
double theoretical_gap(const ProblemSpec& spec, const EsreSolution& solution, const Perturbation& perturbation,
                       std::size_t i0, double dt);

}  // namespace regimelq

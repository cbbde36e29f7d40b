#pragma once

// Continuous-time Markov chain α_t on {0, ..., ℓ-1}. Regimes are zero-based
// inside the library; configuration files and CSV output are one-based.

#include <cstddef>
#include <vector>

#include "regimelq/matcore.hpp"
#include "regimelq/rng.hpp"

namespace regimelq {

inline constexpr double kRowSumTol = 1e-12;

/// Validated generator: nonnegative off-diagonal rates, zero row sums, ℓ >= 2.
class Generator {
 public:
  /// Empty placeholder with no regimes; real generators come from validate_generator.
  Generator() = default;

  [[nodiscard]] std::size_t regimes() const noexcept { return q_.rows(); }
  [[nodiscard]] double rate(std::size_t i, std::size_t j) const noexcept { return q_(i, j); }
  /// -q_ii, the total exit rate of regime i.
  [[nodiscard]] double exit_rate(std::size_t i) const noexcept { return -q_(i, i); }
  [[nodiscard]] const Matrix& matrix() const noexcept { return q_; }

  friend Generator validate_generator(const Matrix& q);

 private:
  explicit Generator(Matrix q) : q_(std::move(q)) {}
  Matrix q_;
};

/// Errors: TooFewRegimes, NegativeOffDiagonal, RowSumNonzero, DimensionMismatch.
Generator validate_generator(const Matrix& q);

/// exp(q t) by scaling and squaring of a truncated Taylor series. Rows sum to
/// one; entries are clamped to [0, 1].
Matrix transition_matrix(const Generator& g, double t);

struct RegimePath {
  std::vector<double> jump_times;   // strictly increasing, in (0, T)
  std::vector<std::size_t> states;  // states.size() == jump_times.size() + 1
  double horizon = 0.0;

  /// Regime occupied at time t (right-continuous).
  [[nodiscard]] std::size_t state_at(double t) const noexcept;
  [[nodiscard]] std::size_t terminal_state() const noexcept { return states.back(); }
};

/// Exact simulation: exponential holding times with rate -q_ii, jump target
/// j != i with probability q_ij / (-q_ii). A regime with q_ii = 0 absorbs.
RegimePath sample_chain_path(const Generator& g, std::size_t i0, double horizon, RngStream& rng);

}  // namespace regimelq

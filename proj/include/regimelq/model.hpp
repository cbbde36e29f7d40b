#pragma once

// Problem definition for the regime-switching LQ problem:
//
//   dX = (A X + B u) dt + (C X + D u) dW,   X(0) = x, α_0 = i0,
//   J  = E[ <G(α_T) X_T, X_T> + ∫ <Q X, X> + 2 <S X, u> + <R u, u> dt ],
//
// with every coefficient modulated by the regime chain α_t.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "regimelq/lattice.hpp"
#include "regimelq/matcore.hpp"
#include "regimelq/regime_chain.hpp"

namespace regimelq {

enum class FieldKind { constant, time_table, tree_node };

class CoefficientField {
 public:
  CoefficientField() = default;

  static CoefficientField constant(Matrix value);
  /// Piecewise constant: value k holds on [times[k], times[k+1]), the last one
  /// through T. times[0] must be 0 and times strictly increasing.
  static CoefficientField time_table(std::vector<double> times, std::vector<Matrix> values);
  /// levels[k] holds the k + 1 node values of tree level k.
  static CoefficientField tree(std::vector<std::vector<Matrix>> levels);

  [[nodiscard]] FieldKind kind() const noexcept { return kind_; }
  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] bool empty() const noexcept { return kind_ == FieldKind::constant && values_.empty(); }
  [[nodiscard]] std::size_t tree_depth() const noexcept { return levels_.empty() ? 0 : levels_.size() - 1; }
  [[nodiscard]] const std::vector<double>& times() const noexcept { return times_; }
  [[nodiscard]] bool is_identically_zero() const noexcept;

  /// Lenient lookup used by the solvers: the node is ignored for deterministic
  /// kinds; tree fields clamp t-derived levels to the stored depth.
  [[nodiscard]] const Matrix& at(double t, std::optional<TreeNode> node = std::nullopt) const;

  /// Every stored matrix, for sup-norm style scans.
  [[nodiscard]] std::vector<const Matrix*> all_values() const;

 private:
  FieldKind kind_ = FieldKind::constant;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> times_;
  std::vector<Matrix> values_;
  std::vector<std::vector<Matrix>> levels_;
};

struct RegimeCoefficients {
  CoefficientField A, B, C, D, Q, S, R, G;
};

enum class CoefficientName { A, B, C, D, Q, S, R, G };

/// Coefficient snapshot at one (t, regime, node).
struct LocalCoefficients {
  Matrix A, B, C, D, S;
  SymMatrix Q, R;
};

struct ProblemSpec {
  std::size_t n = 0;
  std::size_t m = 0;
  double horizon = 0.0;
  double delta = 0.0;
  Generator generator;
  std::vector<RegimeCoefficients> regimes;

  [[nodiscard]] std::size_t ell() const noexcept { return generator.regimes(); }

  /// Dimension, symmetry and coverage checks. Throws StructuralError.
  void check_structure(double asym_tol = kDefaultAsymTol) const;

  /// Common depth of all tree_node fields, if any field is tree-valued.
  [[nodiscard]] std::optional<std::size_t> tree_depth() const;
  [[nodiscard]] bool is_deterministic() const { return !tree_depth().has_value(); }
  [[nodiscard]] bool has_zero_d() const;

  [[nodiscard]] const CoefficientField& field(CoefficientName name, std::size_t regime) const;
  [[nodiscard]] LocalCoefficients local(double t, std::size_t regime, std::optional<TreeNode> node = std::nullopt) const;
  [[nodiscard]] SymMatrix terminal(std::size_t regime, std::optional<TreeNode> node = std::nullopt) const;
};

/// Strict lookup: OutOfRange for t outside [0, T], bad regime, or a node that
/// is missing (tree fields) or supplied (deterministic fields).
Matrix eval_coefficient(const ProblemSpec& spec, CoefficientName name, double t, std::size_t regime,
                        std::optional<TreeNode> node = std::nullopt);

// ---------------------------------------------------------------------------
// Assumption checks

struct Violation {
  std::string assumption;  // "R>=delta*I", "Q-S'R^-1S>=0", "G>=0"
  std::size_t regime = 0;
  double time = 0.0;
  std::optional<TreeNode> node;
  double value = 0.0;  // offending minimum eigenvalue
};

struct ValidationReport {
  bool passed = true;
  std::vector<Violation> violations;
};

/// Checks R - δI ⪰ 0, Q - SᵀR⁻¹S ⪰ 0 and G ⪰ 0 (each up to -tol) at every
/// table breakpoint / tree node of every regime.
ValidationReport validate_assumptions(const ProblemSpec& spec, double tol);

/// sup over regimes and time of e^{-q_ii t} |D R⁻¹ Dᵀ|_F. Coefficients are
/// piecewise constant, so the supremum of each piece is taken at its right end.
double check_smallness(const ProblemSpec& spec, double cond_threshold = kDefaultCondThreshold);

// ---------------------------------------------------------------------------
// Exponential change of variables P̃(t,i) = e^{q_ii t} P(t,i)

class TildeTransform {
 public:
  explicit TildeTransform(const ProblemSpec& spec) : spec_(&spec) {}

  [[nodiscard]] double factor(double t, std::size_t regime) const noexcept;
  /// Q̃, R̃, S̃ scaled by e^{q_ii t}; A, B, C, D unchanged.
  [[nodiscard]] LocalCoefficients apply(const LocalCoefficients& raw, double t, std::size_t regime) const;
  [[nodiscard]] LocalCoefficients local(double t, std::size_t regime, std::optional<TreeNode> node = std::nullopt) const;
  /// G̃(i) = e^{q_ii T} G(i).
  [[nodiscard]] SymMatrix terminal(std::size_t regime, std::optional<TreeNode> node = std::nullopt) const;

 private:
  const ProblemSpec* spec_;
};

inline TildeTransform tilde_transform(const ProblemSpec& spec) { return TildeTransform(spec); }

/// Scales every node of a field by e^{sign * q_ii t}.
RegimeField scale_by_tilde_factor(const RegimeField& field, const Generator& g, const Lattice& lattice, double sign);

struct UntildedFields {
  RegimeField P;
  RegimeField Lambda;
};

/// P = e^{-q_ii t} P̃, Λ = e^{-q_ii t} Λ̃.
UntildedFields untilde_solution(const RegimeField& p_tilde, const RegimeField& lambda_tilde, const Generator& g,
                                const Lattice& lattice);

}  // namespace regimelq

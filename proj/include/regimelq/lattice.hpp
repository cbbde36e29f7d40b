#pragma once

// Time discretisations shared by the solvers. The ODE backend uses a uniform
// grid (one node per level); the tree backend uses a recombining binomial
// tree where level k carries k + 1 nodes and node j sits at W = (2j - k)√dt.

#include <cmath>
#include <cstddef>
#include <vector>

#include "regimelq/error.hpp"
#include "regimelq/matcore.hpp"

namespace regimelq {

enum class Backend { ode, tree };

struct TreeNode {
  std::size_t level = 0;
  std::size_t up = 0;  // number of up moves, 0 <= up <= level
};

class Lattice {
 public:
  Lattice() : Lattice(Backend::ode, 1, 1.0) {}
  Lattice(Backend backend, std::size_t steps, double horizon) : backend_(backend), steps_(steps), horizon_(horizon) {
    if (steps == 0) throw Error(ErrorKind::RangeError, "lattice needs at least one step");
    if (!(horizon > 0.0)) throw Error(ErrorKind::RangeError, "horizon must be positive");
  }

  [[nodiscard]] Backend backend() const noexcept { return backend_; }
  [[nodiscard]] std::size_t steps() const noexcept { return steps_; }
  [[nodiscard]] std::size_t levels() const noexcept { return steps_ + 1; }
  [[nodiscard]] double horizon() const noexcept { return horizon_; }
  [[nodiscard]] double dt() const noexcept { return horizon_ / static_cast<double>(steps_); }
  [[nodiscard]] double time(std::size_t level) const noexcept {
    return level == steps_ ? horizon_ : static_cast<double>(level) * dt();
  }

  [[nodiscard]] std::size_t nodes(std::size_t level) const noexcept {
    return backend_ == Backend::ode ? 1 : level + 1;
  }
  [[nodiscard]] std::size_t offset(std::size_t level) const noexcept {
    return backend_ == Backend::ode ? level : level * (level + 1) / 2;
  }
  [[nodiscard]] std::size_t total_nodes() const noexcept { return offset(levels()); }

  /// Brownian value at a tree node; zero on the ODE grid.
  [[nodiscard]] double brownian(std::size_t level, std::size_t node) const noexcept {
    if (backend_ == Backend::ode) return 0.0;
    return (2.0 * static_cast<double>(node) - static_cast<double>(level)) * std::sqrt(dt());
  }

 private:
  Backend backend_;
  std::size_t steps_;
  double horizon_;
};

/// One symmetric matrix per (level, node, regime).
class RegimeField {
 public:
  RegimeField() = default;
  RegimeField(const Lattice& lattice, std::size_t regimes, std::size_t dim)
      : regimes_(regimes), lattice_nodes_(lattice.total_nodes()),
        values_(lattice.total_nodes() * regimes, SymMatrix(dim)) {
    offsets_.reserve(lattice.levels());
    for (std::size_t k = 0; k < lattice.levels(); ++k) offsets_.push_back(lattice.offset(k));
  }

  [[nodiscard]] std::size_t regimes() const noexcept { return regimes_; }
  [[nodiscard]] std::size_t levels() const noexcept { return offsets_.size(); }
  [[nodiscard]] std::size_t node_count() const noexcept { return lattice_nodes_; }

  SymMatrix& at(std::size_t level, std::size_t node, std::size_t regime) noexcept {
    return values_[(offsets_[level] + node) * regimes_ + regime];
  }
  const SymMatrix& at(std::size_t level, std::size_t node, std::size_t regime) const noexcept {
    return values_[(offsets_[level] + node) * regimes_ + regime];
  }

  /// Flat access in (node, regime) order, for whole-field sweeps.
  [[nodiscard]] std::vector<SymMatrix>& flat() noexcept { return values_; }
  [[nodiscard]] const std::vector<SymMatrix>& flat() const noexcept { return values_; }

 private:
  std::size_t regimes_ = 0;
  std::size_t lattice_nodes_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<SymMatrix> values_;
};

/// sup over nodes and regimes of the Frobenius norm of a - b.
inline double sup_distance(const RegimeField& a, const RegimeField& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.flat().size(); ++k) {
    const double d = (a.flat()[k] - b.flat()[k]).frobenius_norm();
    if (d > worst || std::isnan(d)) worst = d;
  }
  return worst;
}

}  // namespace regimelq

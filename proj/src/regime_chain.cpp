#include "regimelq/regime_chain.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "regimelq/error.hpp"

namespace regimelq {

Generator validate_generator(const Matrix& q) {
  if (!q.is_square()) throw Error(ErrorKind::DimensionMismatch, "generator must be square");
  const std::size_t ell = q.rows();
  if (ell < 2) {
    throw Error(ErrorKind::TooFewRegimes, "generator needs at least two regimes, got " + std::to_string(ell));
  }
  for (std::size_t i = 0; i < ell; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < ell; ++j) {
      if (!std::isfinite(q(i, j))) throw Error(ErrorKind::RangeError, "generator entry is not finite");
      if (i != j && q(i, j) < 0.0) {
        std::ostringstream os;
        os << "q(" << i + 1 << "," << j + 1 << ") = " << q(i, j);
        throw Error(ErrorKind::NegativeOffDiagonal, os.str());
      }
      row += q(i, j);
    }
    if (std::abs(row) > kRowSumTol) {
      std::ostringstream os;
      os << "row " << i + 1 << " sums to " << row;
      throw Error(ErrorKind::RowSumNonzero, os.str());
    }
  }
  return Generator(q);
}

Matrix transition_matrix(const Generator& g, double t) {
  const std::size_t ell = g.regimes();
  if (t < 0.0) throw Error(ErrorKind::OutOfRange, "transition_matrix: negative time");
  if (t == 0.0) return Matrix::identity(ell);

  // Scale so that |q t / 2^s| <= 1/2, sum the series, then square s times.
  const double norm = g.matrix().max_abs() * static_cast<double>(ell) * t;
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const double scaled_t = std::ldexp(t, -squarings);
  const Matrix a = g.matrix() * scaled_t;

  Matrix sum = Matrix::identity(ell);
  Matrix term = Matrix::identity(ell);
  for (int k = 1; k <= 30; ++k) {
    term = (term * a) * (1.0 / k);
    sum += term;
    if (term.max_abs() < 1e-18) break;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;

  for (std::size_t i = 0; i < ell; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < ell; ++j) {
      sum(i, j) = std::clamp(sum(i, j), 0.0, 1.0);
      row += sum(i, j);
    }
    for (std::size_t j = 0; j < ell; ++j) sum(i, j) /= row;
  }
  return sum;
}

std::size_t RegimePath::state_at(double t) const noexcept {
  const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
  return states[static_cast<std::size_t>(it - jump_times.begin())];
}

RegimePath sample_chain_path(const Generator& g, std::size_t i0, double horizon, RngStream& rng) {
  if (i0 >= g.regimes()) throw Error(ErrorKind::OutOfRange, "initial regime out of range");
  RegimePath path;
  path.horizon = horizon;
  path.states.push_back(i0);

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double t = 0.0;
  std::size_t state = i0;
  for (;;) {
    const double rate = g.exit_rate(state);
    if (rate <= 0.0) break;
    std::exponential_distribution<double> hold(rate);
    t += hold(rng);
    if (t >= horizon) break;

    double u = unif(rng) * rate;
    std::size_t next = state;
    for (std::size_t j = 0; j < g.regimes(); ++j) {
      if (j == state || g.rate(state, j) <= 0.0) continue;
      next = j;
      u -= g.rate(state, j);
      if (u < 0.0) break;
    }
    // Jump times must be strictly increasing even under pathological rounding.
    if (!path.jump_times.empty() && t <= path.jump_times.back()) continue;
    path.jump_times.push_back(t);
    path.states.push_back(next);
    state = next;
  }
  return path;
}

}  // namespace regimelq

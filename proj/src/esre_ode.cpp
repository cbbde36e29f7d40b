// Deterministic coefficients: Λ̃ ≡ 0 and the ESRE reduces to a backward
// matrix ODE, integrated by classical RK4 on the uniform grid. Coefficients
// are frozen at the left end of each step (piecewise-constant convention);
// the tilde factors and the frozen coupling source vary within the step.

#include <algorithm>
#include <cmath>
#include <sstream>

#include "esre_internal.hpp"
#include "regimelq/error.hpp"

namespace regimelq {

namespace {

std::string step_context(const char* what, std::size_t regime, double t) {
  std::ostringstream os;
  os << what << " (regime " << regime + 1 << ", t = " << t << ")";
  return os.str();
}

}  // namespace

SymMatrix interpolate_grid(const RegimeField& field, const Lattice& lattice, std::size_t regime, double t) {
  const std::size_t n = lattice.steps();
  const double dt = lattice.dt();
  const double pos = t / dt;
  const auto nearest = static_cast<std::size_t>(std::llround(std::clamp(pos, 0.0, static_cast<double>(n))));
  if (std::abs(pos - static_cast<double>(nearest)) < 1e-12) return field.at(nearest, 0, regime);

  const std::size_t points = std::min<std::size_t>(4, n + 1);
  const auto base = static_cast<std::ptrdiff_t>(std::floor(pos)) - static_cast<std::ptrdiff_t>(points / 2 - 1);
  const auto first = static_cast<std::size_t>(
      std::clamp<std::ptrdiff_t>(base, 0, static_cast<std::ptrdiff_t>(n + 1 - points)));

  SymMatrix out(field.at(0, 0, regime).dim());
  for (std::size_t a = first; a < first + points; ++a) {
    double w = 1.0;
    for (std::size_t b = first; b < first + points; ++b) {
      if (b == a) continue;
      w *= (pos - static_cast<double>(b)) / (static_cast<double>(a) - static_cast<double>(b));
    }
    out += w * field.at(a, 0, regime);
  }
  return out;
}

namespace detail {

void psd_guard(SymMatrix& p, double psd_tol, const std::string& where) {
  const double lo = min_eigenvalue(p);
  if (lo >= 0.0) return;
  if (lo < -psd_tol || std::isnan(lo)) {
    std::ostringstream os;
    os << where << ": min eigenvalue " << lo << " below -" << psd_tol;
    throw Error(ErrorKind::PsdViolation, os.str());
  }
  p = psd_clip(p);
}

TildePair ode_solve_p0(const ProblemSpec& spec, const Lattice& lattice, const EsreOptions& options) {
  const std::size_t ell = spec.ell();
  const std::size_t n = spec.n;
  const TildeTransform tt(spec);
  TildePair out{RegimeField(lattice, ell, n), RegimeField(lattice, ell, n)};
  const SymMatrix zero(n);

  std::vector<SymMatrix> p(ell);
  for (std::size_t i = 0; i < ell; ++i) {
    p[i] = tt.terminal(i);
    out.P.at(lattice.steps(), 0, i) = p[i];
  }

  std::vector<LocalCoefficients> raw(ell);
  auto rhs = [&](double t, const std::vector<SymMatrix>& x) {
    std::vector<SymMatrix> f(ell);
    for (std::size_t i = 0; i < ell; ++i) {
      const LocalCoefficients c = tt.apply(raw[i], t, i);
      f[i] = drift_pi(c, x[i], zero) + c.Q +
             coupling_source(spec.generator, i, t, n, [&](std::size_t j) -> const SymMatrix& { return x[j]; });
    }
    return f;
  };
  auto axpy = [&](const std::vector<SymMatrix>& x, double h, const std::vector<SymMatrix>& k) {
    std::vector<SymMatrix> y(ell);
    for (std::size_t i = 0; i < ell; ++i) y[i] = x[i] + h * k[i];
    return y;
  };

  const double h = lattice.dt();
  for (std::size_t step = lattice.steps(); step-- > 0;) {
    const double t_left = lattice.time(step);
    const double t_right = lattice.time(step + 1);
    const double t_mid = 0.5 * (t_left + t_right);
    for (std::size_t i = 0; i < ell; ++i) raw[i] = spec.local(t_left, i);

    const auto k1 = rhs(t_right, p);
    const auto k2 = rhs(t_mid, axpy(p, 0.5 * h, k1));
    const auto k3 = rhs(t_mid, axpy(p, 0.5 * h, k2));
    const auto k4 = rhs(t_left, axpy(p, h, k3));
    for (std::size_t i = 0; i < ell; ++i) {
      p[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      psd_guard(p[i], options.psd_tol, step_context("initial iterate", i, t_left));
      out.P.at(step, 0, i) = p[i];
    }
  }
  return out;
}

TildePair ode_picard_step(const ProblemSpec& spec, const Lattice& lattice, const RegimeField& previous,
                          const EsreOptions& options) {
  const std::size_t ell = spec.ell();
  const std::size_t n = spec.n;
  const TildeTransform tt(spec);
  TildePair out{RegimeField(lattice, ell, n), RegimeField(lattice, ell, n)};
  const SymMatrix zero(n);
  const double h = lattice.dt();

  parallel_for(ell, options.execution, [&](std::size_t i) {
    LocalCoefficients raw;
    auto rhs = [&](double t, const SymMatrix& x, const SymMatrix& source) {
      const LocalCoefficients c = tt.apply(raw, t, i);
      const SymMatrix h_term =
          options.zero_d_form ? drift_h_zero_d(c, x, options.cond_threshold) : drift_h(c, x, zero, options.cond_threshold);
      return drift_pi(c, x, zero) + c.Q + h_term + source;
    };
    auto source_at_level = [&](std::size_t level) {
      return detail::coupling_source(spec.generator, i, lattice.time(level), n,
                                     [&](std::size_t j) -> const SymMatrix& { return previous.at(level, 0, j); });
    };

    SymMatrix p = tt.terminal(i);
    out.P.at(lattice.steps(), 0, i) = p;
    SymMatrix src_right = source_at_level(lattice.steps());
    for (std::size_t step = lattice.steps(); step-- > 0;) {
      const double t_left = lattice.time(step);
      const double t_right = lattice.time(step + 1);
      const double t_mid = 0.5 * (t_left + t_right);
      raw = spec.local(t_left, i);
      const SymMatrix src_mid = detail::coupling_source(
          spec.generator, i, t_mid, n, [&](std::size_t j) { return interpolate_grid(previous, lattice, j, t_mid); });
      const SymMatrix src_left = source_at_level(step);

      const SymMatrix k1 = rhs(t_right, p, src_right);
      const SymMatrix k2 = rhs(t_mid, p + (0.5 * h) * k1, src_mid);
      const SymMatrix k3 = rhs(t_mid, p + (0.5 * h) * k2, src_mid);
      const SymMatrix k4 = rhs(t_left, p + h * k3, src_left);
      p += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      psd_guard(p, options.psd_tol, step_context("Picard iterate", i, t_left));
      out.P.at(step, 0, i) = p;
      src_right = src_left;
    }
  });
  return out;
}

}  // namespace detail

EsreSolution direct_coupled_oracle(const ProblemSpec& spec, std::size_t grid_steps, double cond_threshold) {
  if (!spec.is_deterministic()) {
    throw Error(ErrorKind::StructuralError, "direct coupled oracle needs deterministic coefficients");
  }
  const std::size_t ell = spec.ell();
  const std::size_t n = spec.n;
  const Lattice lattice(Backend::ode, grid_steps, spec.horizon);
  EsreSolution sol;
  sol.lattice = lattice;
  sol.P = RegimeField(lattice, ell, n);
  sol.Lambda = RegimeField(lattice, ell, n);
  const SymMatrix zero(n);

  std::vector<SymMatrix> p(ell);
  for (std::size_t i = 0; i < ell; ++i) {
    p[i] = spec.terminal(i);
    sol.P.at(lattice.steps(), 0, i) = p[i];
  }
  std::vector<LocalCoefficients> raw(ell);
  auto rhs = [&](const std::vector<SymMatrix>& x) {
    std::vector<SymMatrix> f(ell);
    for (std::size_t i = 0; i < ell; ++i) {
      f[i] = drift_pi(raw[i], x[i], zero) + raw[i].Q + drift_h(raw[i], x[i], zero, cond_threshold);
      for (std::size_t j = 0; j < ell; ++j) {
        if (spec.generator.rate(i, j) != 0.0) f[i] += spec.generator.rate(i, j) * x[j];
      }
    }
    return f;
  };
  auto axpy = [&](const std::vector<SymMatrix>& x, double h, const std::vector<SymMatrix>& k) {
    std::vector<SymMatrix> y(ell);
    for (std::size_t i = 0; i < ell; ++i) y[i] = x[i] + h * k[i];
    return y;
  };

  const double h = lattice.dt();
  for (std::size_t step = lattice.steps(); step-- > 0;) {
    for (std::size_t i = 0; i < ell; ++i) raw[i] = spec.local(lattice.time(step), i);
    const auto k1 = rhs(p);
    const auto k2 = rhs(axpy(p, 0.5 * h, k1));
    const auto k3 = rhs(axpy(p, 0.5 * h, k2));
    const auto k4 = rhs(axpy(p, h, k3));
    for (std::size_t i = 0; i < ell; ++i) {
      p[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      const double norm = p[i].frobenius_norm();
      if (!(norm <= 1e8)) {
        std::ostringstream os;
        os << "coupled Riccati blew up at t = " << lattice.time(step) << " (|P| = " << norm << ")";
        throw Error(ErrorKind::StepFailure, os.str());
      }
      sol.P.at(step, 0, i) = p[i];
    }
  }
  sol.P_tilde = scale_by_tilde_factor(sol.P, spec.generator, lattice, 1.0);
  sol.Lambda_tilde = sol.Lambda;
  sol.converged = true;
  sol.options.backend = Backend::ode;
  sol.options.grid_steps = grid_steps;
  sol.options.cond_threshold = cond_threshold;
  return sol;
}

}  // namespace regimelq

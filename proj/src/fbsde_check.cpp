#include "regimelq/fbsde_check.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <cmath>
#include <random>
#include <sstream>

#include "esre_internal.hpp"
#include "regimelq/error.hpp"
#include "regimelq/rng.hpp"

namespace regimelq {

namespace {

std::size_t steps_for(double horizon, double dt, const char* what) {
  if (!(dt > 0.0)) throw Error(ErrorKind::RangeError, std::string(what) + ": dt must be positive");
  const double ratio = horizon / dt;
  const auto steps = static_cast<std::size_t>(std::llround(ratio));
  if (steps == 0 || std::abs(ratio - static_cast<double>(steps)) > 1e-9 * std::max(1.0, ratio)) {
    std::ostringstream os;
    os << what << ": dt = " << dt << " does not divide T = " << horizon;
    throw Error(ErrorKind::RangeError, os.str());
  }
  return steps;
}

void require_ode(const EsreSolution& solution, const char* what) {
  if (solution.backend() != Backend::ode) {
    throw Error(ErrorKind::StructuralError, std::string(what) + " needs a solution on the ODE grid");
  }
}

}  // namespace

double fitted_order(const std::vector<double>& dts, const std::vector<double>& errors) {
  if (dts.size() != errors.size() || dts.size() < 2) {
    throw Error(ErrorKind::RangeError, "order fit needs at least two (dt, error) pairs");
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const auto n = static_cast<double>(dts.size());
  for (std::size_t k = 0; k < dts.size(); ++k) {
    const double x = std::log(dts[k]);
    const double y = std::log(errors[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::vector<ResidualStats> ypx_residual(const EsreSolution& solution, const ProblemSpec& spec, std::size_t regime,
                                        const std::vector<double>& dt_list, std::uint64_t seed) {
  require_ode(solution, "ypx_residual");
  if (regime >= spec.ell()) throw Error(ErrorKind::OutOfRange, "regime index out of range");
  const Lattice& grid = solution.lattice;
  const TildeTransform tt(spec);
  const std::size_t n = spec.n;
  const SymMatrix zero(n);
  std::vector<ResidualStats> out;

  for (std::size_t which = 0; which < dt_list.size(); ++which) {
    const double dt = dt_list[which];
    const std::size_t steps = steps_for(spec.horizon, dt, "ypx_residual");
    if (grid.steps() % steps != 0) {
      std::ostringstream os;
      os << "ypx_residual: dt = " << dt << " is not a multiple of the solution grid step " << grid.dt();
      throw Error(ErrorKind::RangeError, os.str());
    }
    const std::size_t stride = grid.steps() / steps;
    RngStream rng = substream(seed, which, StreamPurpose::brownian);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sqrt_dt = std::sqrt(dt);

    Matrix x = Matrix::identity(n);
    ResidualStats stats;
    stats.dt = dt;
    double sum_sq = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
      const std::size_t level = k * stride;
      const double t = grid.time(level);
      const LocalCoefficients c = tt.local(t, regime);
      const SymMatrix& p = solution.P_tilde.at(level, 0, regime);
      const SymMatrix& p_next = solution.P_tilde.at(level + stride, 0, regime);
      const SymMatrix source = detail::coupling_source(
          spec.generator, regime, t, n,
          [&](std::size_t j) -> const SymMatrix& { return solution.P_tilde.at(level, 0, j); });

      const Matrix u = theta_hat(c, p, zero, solution.options.cond_threshold) * x;
      const Matrix y = p.matrix() * x;
      const Matrix diffusion = c.C * x + c.D * u;
      const Matrix z = p.matrix() * diffusion;
      const Matrix f = c.A.transpose() * y + c.C.transpose() * z + (c.Q + source).matrix() * x + c.S.transpose() * u;

      const double dw = sqrt_dt * normal(rng);
      const Matrix x_next = x + dt * (c.A * x + c.B * u) + dw * diffusion;
      const Matrix residual = p_next.matrix() * x_next - y + dt * f - dw * z;
      const double r = residual.frobenius_norm() / dt;
      sum_sq += r * r;
      stats.max = std::max(stats.max, r);
      x = x_next;
    }
    stats.sample_count = steps;
    stats.rms = std::sqrt(sum_sq / static_cast<double>(steps));
    out.push_back(stats);
  }
  return out;
}

TreeFbsdeResult tree_fbsde_oracle(const ProblemSpec& spec, const Lattice& lattice, std::size_t regime,
                                  const RegimeField& previous, const RegimeField& reference,
                                  const FbsdeOracleOptions& options) {
  if (!spec.has_zero_d()) throw Error(ErrorKind::StructuralError, "FBSDE oracle needs D identically zero");
  if (spec.n > 2) throw Error(ErrorKind::RangeError, "FBSDE oracle supports n <= 2");
  if (lattice.backend() != Backend::tree) throw Error(ErrorKind::StructuralError, "FBSDE oracle runs on a tree");
  if (lattice.steps() > 12) throw Error(ErrorKind::RangeError, "FBSDE oracle supports depth <= 12");
  if (regime >= spec.ell()) throw Error(ErrorKind::OutOfRange, "regime index out of range");

  const std::size_t depth = lattice.steps();
  const std::size_t n = spec.n;
  const double dt = lattice.dt();
  const double sqrt_dt = std::sqrt(dt);
  const TildeTransform tt(spec);

  // Coefficients depend on the path only through the recombining node.
  struct NodeData {
    LocalCoefficients c;
    Matrix r_inv;
    Matrix q_plus_source;
  };
  std::vector<std::vector<NodeData>> data(depth);
  for (std::size_t k = 0; k < depth; ++k) {
    const double t = lattice.time(k);
    for (std::size_t j = 0; j <= k; ++j) {
      const LocalCoefficients c = tt.local(t, regime, TreeNode{k, j});
      const SymMatrix source = detail::coupling_source(
          spec.generator, regime, t, n, [&](std::size_t r) -> const SymMatrix& { return previous.at(k, j, r); });
      data[k].push_back(NodeData{c, sym_inverse(c.R).matrix(), (c.Q + source).matrix()});
    }
  }
  std::vector<Matrix> terminal;
  for (std::size_t j = 0; j <= depth; ++j) terminal.push_back(tt.terminal(regime, TreeNode{depth, j}).matrix());

  TreeFbsdeResult result;
  FbsdeTriple& tr = result.triple;
  tr.depth = depth;
  tr.dt = dt;
  tr.regime = regime;
  const std::size_t total = FbsdeTriple::index(depth + 1, 0);
  tr.X.assign(total, Matrix::identity(n));
  tr.Y.assign(total, Matrix(n, n));
  tr.Z.assign(total, Matrix(n, n));
  tr.u.assign(total, Matrix(spec.m, n));

  auto control = [&](const NodeData& d, const Matrix& x, const Matrix& y) {
    return -1.0 * (d.r_inv * (d.c.B.transpose() * y + d.c.S * x));
  };

  auto backward = [&] {
    for (std::size_t b = 0; b < (std::size_t{1} << depth); ++b) {
      const std::size_t idx = FbsdeTriple::index(depth, b);
      tr.Y[idx] = terminal[static_cast<std::size_t>(std::popcount(b))] * tr.X[idx];
      tr.Z[idx] = Matrix(n, n);
    }
    for (std::size_t k = depth; k-- > 0;) {
      for (std::size_t b = 0; b < (std::size_t{1} << k); ++b) {
        const NodeData& d = data[k][static_cast<std::size_t>(std::popcount(b))];
        const std::size_t idx = FbsdeTriple::index(k, b);
        const Matrix& up = tr.Y[FbsdeTriple::index(k + 1, 2 * b + 1)];
        const Matrix& down = tr.Y[FbsdeTriple::index(k + 1, 2 * b)];
        const Matrix e = 0.5 * (up + down);
        const Matrix z = (0.5 / sqrt_dt) * (up - down);
        const Matrix& x = tr.X[idx];
        const Matrix u = control(d, x, e);
        const Matrix f =
            d.c.A.transpose() * e + d.c.C.transpose() * z + d.q_plus_source * x + d.c.S.transpose() * u;
        tr.Y[idx] = e + dt * f;
        tr.Z[idx] = z;
      }
    }
  };

  // Returns the proposed state field given (Y, Z).
  auto forward = [&] {
    std::vector<Matrix> x(total, Matrix::identity(n));
    for (std::size_t k = 0; k < depth; ++k) {
      for (std::size_t b = 0; b < (std::size_t{1} << k); ++b) {
        const NodeData& d = data[k][static_cast<std::size_t>(std::popcount(b))];
        const std::size_t idx = FbsdeTriple::index(k, b);
        const Matrix u = control(d, x[idx], tr.Y[idx]);
        tr.u[idx] = u;
        const Matrix drift = d.c.A * x[idx] + d.c.B * u;
        const Matrix diffusion = d.c.C * x[idx];
        x[FbsdeTriple::index(k + 1, 2 * b + 1)] = x[idx] + dt * drift + sqrt_dt * diffusion;
        x[FbsdeTriple::index(k + 1, 2 * b)] = x[idx] + dt * drift - sqrt_dt * diffusion;
      }
    }
    return x;
  };

  double weight = 1.0;
  double last_change = std::numeric_limits<double>::infinity();
  bool settled = false;
  for (std::size_t sweep = 0; sweep < options.max_sweeps; ++sweep) {
    const std::vector<Matrix> y_old = tr.Y;
    backward();
    std::vector<Matrix> x_new = forward();
    double change = 0.0;
    for (std::size_t idx = 0; idx < total; ++idx) {
      x_new[idx] = tr.X[idx] + weight * (x_new[idx] - tr.X[idx]);
      change = std::max({change, (x_new[idx] - tr.X[idx]).frobenius_norm(), (tr.Y[idx] - y_old[idx]).frobenius_norm()});
    }
    tr.X = std::move(x_new);
    result.sweeps = sweep + 1;
    if (change < options.tol) {
      settled = true;
      break;
    }
    if (change > last_change && weight == 1.0) {
      weight = 0.5;
      result.damped = true;
    }
    last_change = change;
  }
  if (!settled) {
    std::ostringstream os;
    os << "FBSDE fixed point did not settle in " << options.max_sweeps << " sweeps (last change " << last_change
       << ")";
    throw Error(ErrorKind::NoConvergence, os.str());
  }
  backward();  // (Y, Z) consistent with the final X
  for (std::size_t k = 0; k < depth; ++k)
    for (std::size_t b = 0; b < (std::size_t{1} << k); ++b) {
      const std::size_t idx = FbsdeTriple::index(k, b);
      tr.u[idx] = control(data[k][static_cast<std::size_t>(std::popcount(b))], tr.X[idx], tr.Y[idx]);
    }

  for (std::size_t k = 0; k <= depth; ++k) {
    for (std::size_t b = 0; b < (std::size_t{1} << k); ++b) {
      const std::size_t idx = FbsdeTriple::index(k, b);
      if (std::abs(determinant(tr.X[idx])) < options.det_guard) {
        std::ostringstream os;
        os << "state matrix singular at level " << k << ", node " << b;
        throw Error(ErrorKind::SingularState, os.str());
      }
      const Matrix ratio = tr.Y[idx] * inverse(tr.X[idx]);
      const SymMatrix& ref = reference.at(k, static_cast<std::size_t>(std::popcount(b)), regime);
      result.max_deviation = std::max(result.max_deviation, (ratio - ref.matrix()).frobenius_norm());
    }
  }
  return result;
}

TreeFbsdeResult tree_fbsde_iterate_check(const ProblemSpec& spec, std::size_t depth, std::size_t regime,
                                         std::size_t iterate, const FbsdeOracleOptions& options) {
  if (iterate == 0) throw Error(ErrorKind::RangeError, "FBSDE check starts at iterate 1");
  EsreOptions opts;
  opts.backend = Backend::tree;
  opts.tree_depth = depth;
  opts.execution = Execution::serial;
  const Lattice lattice = make_lattice(spec, opts);
  RegimeField prev = solve_p0(spec, lattice, opts).P;
  RegimeField current = picard_step(spec, lattice, prev, opts).P;
  for (std::size_t k = 1; k < iterate; ++k) {
    prev = std::move(current);
    current = picard_step(spec, lattice, prev, opts).P;
  }
  return tree_fbsde_oracle(spec, lattice, regime, prev, current, options);
}

XinvResult xinv_product_check(const ProblemSpec& spec, const EsreSolution& solution, std::size_t regime, double dt,
                              std::uint64_t seed) {
  require_ode(solution, "xinv_product_check");
  if (regime >= spec.ell()) throw Error(ErrorKind::OutOfRange, "regime index out of range");
  const std::size_t steps = steps_for(spec.horizon, dt, "xinv_product_check");
  const Lattice& grid = solution.lattice;
  const TildeTransform tt(spec);
  const std::size_t n = spec.n;
  const SymMatrix zero(n);
  const double cond = solution.options.cond_threshold;

  struct ClosedLoop {
    Matrix a, c;
  };
  // Coefficients frozen at the left sample of the step, tilde factor and P̃ at t.
  auto closed_loop = [&](double t_left, double t) {
    const LocalCoefficients c = tt.apply(spec.local(t_left, regime), t, regime);
    const Matrix theta = theta_hat(c, interpolate_grid(solution.P_tilde, grid, regime, t), zero, cond);
    return ClosedLoop{c.A + c.B * theta, c.C + c.D * theta};
  };

  bool noisy = false;
  for (std::size_t k = 0; k < grid.levels() && !noisy; ++k) {
    const double t = grid.time(k);
    noisy = !closed_loop(t, t).c.is_zero();
  }

  XinvResult out;
  Matrix x = Matrix::identity(n);
  Matrix xinv = Matrix::identity(n);
  const Matrix eye = Matrix::identity(n);
  double sum_sq = 0.0;
  RngStream rng = substream(seed, 0, StreamPurpose::brownian);
  std::normal_distribution<double> normal(0.0, 1.0);

  for (std::size_t k = 0; k < steps; ++k) {
    const double t0 = static_cast<double>(k) * dt;
    if (noisy) {
      const ClosedLoop cl = closed_loop(t0, t0);
      const double dw = std::sqrt(dt) * normal(rng);
      const Matrix x_next = x + dt * (cl.a * x) + dw * (cl.c * x);
      xinv = xinv - dt * (xinv * (cl.a - cl.c * cl.c)) - dw * (xinv * cl.c);
      x = x_next;
    } else {
      const double th = t0 + 0.5 * dt;
      const double t1 = k + 1 == steps ? spec.horizon : t0 + dt;
      const Matrix a0 = closed_loop(t0, t0).a;
      const Matrix ah = closed_loop(t0, th).a;
      const Matrix a1 = closed_loop(t0, t1).a;
      const Matrix k1 = a0 * x;
      const Matrix k2 = ah * (x + (0.5 * dt) * k1);
      const Matrix k3 = ah * (x + (0.5 * dt) * k2);
      const Matrix k4 = a1 * (x + dt * k3);
      x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      const Matrix l1 = -1.0 * (xinv * a0);
      const Matrix l2 = -1.0 * ((xinv + (0.5 * dt) * l1) * ah);
      const Matrix l3 = -1.0 * ((xinv + (0.5 * dt) * l2) * ah);
      const Matrix l4 = -1.0 * ((xinv + dt * l3) * a1);
      xinv += (dt / 6.0) * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
    }
    const double dev = (x * xinv - eye).frobenius_norm();
    sum_sq += dev * dev;
    out.stats.max = std::max(out.stats.max, dev);
  }
  out.stats.dt = dt;
  out.stats.sample_count = steps;
  out.stats.rms = std::sqrt(sum_sq / static_cast<double>(steps));
  out.x_final = x;
  out.xinv_final = xinv;
  return out;
}

}  // namespace regimelq

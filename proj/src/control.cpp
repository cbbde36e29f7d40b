#include "regimelq/control.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "regimelq/error.hpp"
#include "regimelq/regime_chain.hpp"
#include "regimelq/rng.hpp"

namespace regimelq {

// ---------------------------------------------------------------------------
// Gains and value

FeedbackGain::FeedbackGain(const Lattice& lattice, std::size_t regimes, std::size_t m, std::size_t n)
    : lattice_(lattice), regimes_(regimes), values_(lattice.total_nodes() * regimes, Matrix(m, n)) {}

FeedbackGain feedback_gain(const EsreSolution& solution, const ProblemSpec& spec) {
  const Lattice& lattice = solution.lattice;
  FeedbackGain gain(lattice, spec.ell(), spec.m, spec.n);
  const double cond = solution.options.cond_threshold;
  for (std::size_t k = 0; k < lattice.levels(); ++k) {
    const double t = lattice.time(k);
    for (std::size_t j = 0; j < lattice.nodes(k); ++j) {
      const std::optional<TreeNode> node =
          lattice.backend() == Backend::tree ? std::optional<TreeNode>(TreeNode{k, j}) : std::nullopt;
      for (std::size_t i = 0; i < spec.ell(); ++i) {
        gain.at(k, j, i) = theta_hat(spec.local(t, i, node), solution.P.at(k, j, i), solution.Lambda.at(k, j, i), cond);
      }
    }
  }
  return gain;
}

double value_at(const EsreSolution& solution, const std::vector<double>& x0, std::size_t i0) {
  const SymMatrix& p = solution.initial(i0);
  if (x0.size() != p.dim()) throw Error(ErrorKind::DimensionMismatch, "initial state has the wrong dimension");
  double v = 0.0;
  for (std::size_t a = 0; a < p.dim(); ++a)
    for (std::size_t b = 0; b < p.dim(); ++b) v += x0[a] * p(a, b) * x0[b];
  return v;
}

// ---------------------------------------------------------------------------
// Perturbations

Perturbation Perturbation::constant(std::vector<double> value) {
  Perturbation p;
  p.kind_ = Kind::constant;
  p.dim_ = value.size();
  p.values_.push_back(std::move(value));
  return p;
}

Perturbation Perturbation::table(std::vector<double> times, std::vector<std::vector<double>> values) {
  if (times.empty() || times.size() != values.size()) {
    throw Error(ErrorKind::StructuralError, "perturbation table needs one vector per sample time");
  }
  if (times.front() != 0.0) throw Error(ErrorKind::StructuralError, "perturbation table must start at t = 0");
  for (std::size_t k = 1; k < times.size(); ++k)
    if (!(times[k] > times[k - 1])) throw Error(ErrorKind::StructuralError, "perturbation times must increase");
  for (const auto& v : values)
    if (v.size() != values.front().size()) throw Error(ErrorKind::StructuralError, "ragged perturbation table");
  Perturbation p;
  p.kind_ = Kind::table;
  p.dim_ = values.front().size();
  p.times_ = std::move(times);
  p.values_ = std::move(values);
  return p;
}

Perturbation Perturbation::linear(std::vector<double> intercept, std::vector<double> slope) {
  if (intercept.size() != slope.size()) throw Error(ErrorKind::StructuralError, "intercept and slope differ in size");
  Perturbation p;
  p.kind_ = Kind::linear;
  p.dim_ = intercept.size();
  p.values_ = {std::move(intercept), std::move(slope)};
  return p;
}

bool Perturbation::is_zero() const noexcept {
  return std::all_of(values_.begin(), values_.end(),
                     [](const auto& v) { return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; }); });
}

void Perturbation::eval(double t, std::vector<double>& out) const {
  switch (kind_) {
    case Kind::zero:
      std::fill(out.begin(), out.end(), 0.0);
      return;
    case Kind::constant:
      std::copy(values_[0].begin(), values_[0].end(), out.begin());
      return;
    case Kind::table: {
      const auto it = std::upper_bound(times_.begin(), times_.end(), t + 1e-12 * std::max(1.0, t));
      const std::size_t k = it == times_.begin() ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
      std::copy(values_[k].begin(), values_[k].end(), out.begin());
      return;
    }
    case Kind::linear:
      for (std::size_t a = 0; a < dim_; ++a) out[a] = values_[0][a] + values_[1][a] * t;
      return;
  }
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

// Offsets of the coefficient blocks inside one flat table entry.
struct EntryLayout {
  std::size_t A, B, C, D, S, Q, R, K, size;
  EntryLayout(std::size_t n, std::size_t m)
      : A(0), B(A + n * n), C(B + n * m), D(C + n * n), S(D + n * m), Q(S + m * n), R(Q + n * n), K(R + m * m),
        size(K + m * n) {}
};

void append(std::vector<double>& pool, const Matrix& m) {
  pool.insert(pool.end(), m.data().begin(), m.data().end());
}

// Coefficients, gains and perturbation values laid out per simulation step, so
// the path kernel only does table lookups and small dense products.
class SimTables {
 public:
  SimTables(const ProblemSpec& spec, const Policy& policy, double dt)
      : spec_(spec), ell_(spec.ell()), layout_(spec.n, spec.m) {
    const double ratio = spec.horizon / dt;
    steps_ = static_cast<std::size_t>(std::llround(ratio));
    if (!(dt > 0.0) || steps_ == 0 || std::abs(ratio - static_cast<double>(steps_)) > 1e-12 * std::max(1.0, ratio)) {
      std::ostringstream os;
      os << "simulation dt = " << dt << " does not divide T = " << spec.horizon;
      throw Error(ErrorKind::RangeError, os.str());
    }
    dt_ = spec.horizon / static_cast<double>(steps_);

    const FeedbackGain* gain = policy.gain;
    tree_depth_ = spec.tree_depth();
    if (gain && gain->lattice().backend() == Backend::tree) {
      if (tree_depth_ && *tree_depth_ != gain->lattice().steps()) {
        throw Error(ErrorKind::StructuralError, "gain tree and coefficient tree differ in depth");
      }
      tree_depth_ = gain->lattice().steps();
    }
    if (policy.perturbation.kind() != Perturbation::Kind::zero && policy.perturbation.dim() != spec.m) {
      throw Error(ErrorKind::DimensionMismatch, "perturbation dimension differs from the control dimension");
    }

    offsets_.reserve(steps_ + 1);
    perturbation_.assign(steps_ * spec.m, 0.0);
    std::vector<double> e(spec.m, 0.0);
    for (std::size_t k = 0; k < steps_; ++k) {
      const double t = static_cast<double>(k) * dt_;
      offsets_.push_back(pool_.size());
      levels_.push_back(tree_level(t));
      const std::size_t nodes = tree_depth_ ? levels_.back() + 1 : 1;
      for (std::size_t j = 0; j < nodes; ++j) {
        const std::optional<TreeNode> node =
            tree_depth_ ? std::optional<TreeNode>(TreeNode{levels_.back(), j}) : std::nullopt;
        for (std::size_t i = 0; i < ell_; ++i) {
          const LocalCoefficients c = spec.local(t, i, node);
          for (const Matrix* block : {&c.A, &c.B, &c.C, &c.D, &c.S, &c.Q.matrix(), &c.R.matrix()}) append(pool_, *block);
          append(pool_, gain ? gain_at(*gain, t, j, i) : Matrix(spec.m, spec.n));
        }
      }
      policy.perturbation.eval(t, e);
      std::copy(e.begin(), e.end(), perturbation_.begin() + static_cast<std::ptrdiff_t>(k * spec.m));
    }
    const std::size_t terminal_nodes = tree_depth_ ? *tree_depth_ + 1 : 1;
    for (std::size_t j = 0; j < terminal_nodes; ++j)
      for (std::size_t i = 0; i < ell_; ++i) {
        const std::optional<TreeNode> node = tree_depth_ ? std::optional<TreeNode>(TreeNode{*tree_depth_, j}) : std::nullopt;
        terminal_.push_back(spec.terminal(i, node).matrix());
      }
  }

  [[nodiscard]] std::size_t steps() const noexcept { return steps_; }
  [[nodiscard]] double dt() const noexcept { return dt_; }

  [[nodiscard]] const EntryLayout& layout() const noexcept { return layout_; }
  [[nodiscard]] const double* at(std::size_t step, double w, std::size_t regime) const {
    const std::size_t node = tree_depth_ ? node_from_w(levels_[step], w) : 0;
    return pool_.data() + offsets_[step] + (node * ell_ + regime) * layout_.size;
  }
  [[nodiscard]] const Matrix& terminal(double w, std::size_t regime) const {
    const std::size_t node = tree_depth_ ? node_from_w(*tree_depth_, w) : 0;
    return terminal_[node * ell_ + regime];
  }
  [[nodiscard]] const double* perturbation(std::size_t step) const {
    return perturbation_.data() + step * spec_.m;
  }

 private:
  // Tree level of the last tree time at or before t.
  [[nodiscard]] std::size_t tree_level(double t) const {
    if (!tree_depth_) return 0;
    const double tree_dt = spec_.horizon / static_cast<double>(*tree_depth_);
    const auto level = static_cast<std::size_t>(std::floor(t / tree_dt + 1e-9));
    return std::min(level, *tree_depth_);
  }
  // Tree node whose W value (2j - L)√dt is closest to w.
  [[nodiscard]] std::size_t node_from_w(std::size_t level, double w) const {
    const double tree_dt = spec_.horizon / static_cast<double>(*tree_depth_);
    const double j = std::round(0.5 * (w / std::sqrt(tree_dt) + static_cast<double>(level)));
    return static_cast<std::size_t>(std::clamp(j, 0.0, static_cast<double>(level)));
  }
  // Gain at the last gain-grid sample at or before t.
  [[nodiscard]] const Matrix& gain_at(const FeedbackGain& gain, double t, std::size_t node, std::size_t regime) const {
    const Lattice& lat = gain.lattice();
    const auto level =
        std::min(static_cast<std::size_t>(std::floor(t / lat.dt() + 1e-9)), lat.steps());
    return gain.at(level, lat.backend() == Backend::tree ? node : 0, regime);
  }

  const ProblemSpec& spec_;
  std::size_t ell_;
  std::size_t steps_ = 0;
  double dt_ = 0.0;
  std::optional<std::size_t> tree_depth_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> levels_;
  EntryLayout layout_;
  std::vector<double> pool_;
  std::vector<Matrix> terminal_;
  std::vector<double> perturbation_;
};

double quad_form(const Matrix& m, const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double row = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) row += m(r, c) * b[c];
    s += a[r] * row;
  }
  return s;
}

// Row-major raw kernels for the path loop.
inline void mat_vec(const double* m, std::size_t rows, std::size_t cols, const double* v, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += m[r * cols + c] * v[c];
    out[r] = s;
  }
}

inline void mat_vec_add(const double* m, std::size_t rows, std::size_t cols, const double* v, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += m[r * cols + c] * v[c];
    out[r] += s;
  }
}

inline double quad(const double* m, std::size_t dim, const double* v) {
  double s = 0.0;
  for (std::size_t r = 0; r < dim; ++r) {
    double row = 0.0;
    for (std::size_t c = 0; c < dim; ++c) row += m[r * dim + c] * v[c];
    s += v[r] * row;
  }
  return s;
}

double run_path(const ProblemSpec& spec, const SimTables& tables, bool closed_loop, const std::vector<double>& x0,
                std::size_t i0, const SimulationOptions& options, std::uint64_t path, PathRecord* record) {
  const std::size_t n = spec.n;
  const std::size_t m = spec.m;
  RngStream w_rng = substream(options.seed, path, StreamPurpose::brownian);
  RngStream a_rng = substream(options.seed, path, StreamPurpose::regime);
  std::normal_distribution<double> normal(0.0, 1.0);
  const RegimePath chain = sample_chain_path(spec.generator, i0, spec.horizon, a_rng);

  const double dt = tables.dt();
  const double sqrt_dt = std::sqrt(dt);
  std::vector<double> x = x0, u(m), drift(n), diffusion(n), sx(m);
  double running = 0.0;
  double w = 0.0;

  for (std::size_t k = 0; k < tables.steps(); ++k) {
    const double t = static_cast<double>(k) * dt;
    const std::size_t regime = chain.state_at(t);
    const double* e = tables.at(k, w, regime);
    const EntryLayout& L = tables.layout();
    const double* pert = tables.perturbation(k);
    if (closed_loop) {
      mat_vec(e + L.K, m, n, x.data(), u.data());
      for (std::size_t a = 0; a < m; ++a) u[a] += pert[a];
    } else {
      std::copy(pert, pert + m, u.begin());
    }
    mat_vec(e + L.S, m, n, x.data(), sx.data());
    double sxu = 0.0;
    for (std::size_t a = 0; a < m; ++a) sxu += u[a] * sx[a];

    if (record) {
      record->t.push_back(t);
      record->X.push_back(x);
      record->regime.push_back(regime);
      record->u.push_back(u);
      record->running_cost.push_back(running);
    }
    running += dt * (quad(e + L.Q, n, x.data()) + 2.0 * sxu + quad(e + L.R, m, u.data()));

    const double dw = sqrt_dt * normal(w_rng);
    mat_vec(e + L.A, n, n, x.data(), drift.data());
    mat_vec_add(e + L.B, n, m, u.data(), drift.data());
    mat_vec(e + L.C, n, n, x.data(), diffusion.data());
    mat_vec_add(e + L.D, n, m, u.data(), diffusion.data());
    double norm_sq = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      x[a] += drift[a] * dt + diffusion[a] * dw;
      norm_sq += x[a] * x[a];
    }
    w += dw;
    if (!(norm_sq <= options.blowup * options.blowup)) {
      std::ostringstream os;
      os << "state norm exceeded " << options.blowup << " on path " << path << " at t = " << t + dt;
      throw Error(ErrorKind::BlowUp, os.str());
    }
  }
  const std::size_t final_regime = chain.terminal_state();
  const double terminal = quad_form(tables.terminal(w, final_regime), x, x);
  if (record) {
    record->t.push_back(spec.horizon);
    record->X.push_back(x);
    record->regime.push_back(final_regime);
    record->u.push_back(std::vector<double>(m, 0.0));
    record->running_cost.push_back(running);
    record->terminal_cost = terminal;
    record->total_cost = running + terminal;
  }
  return running + terminal;
}

void check_inputs(const ProblemSpec& spec, const std::vector<double>& x0, std::size_t i0) {
  if (x0.size() != spec.n) throw Error(ErrorKind::DimensionMismatch, "initial state has the wrong dimension");
  if (i0 >= spec.ell()) throw Error(ErrorKind::OutOfRange, "initial regime out of range");
}

// Neumaier-compensated sum; the result does not depend on how paths were
// scheduled because costs are summed in path order.
double compensated_sum(const std::vector<double>& v) {
  double sum = 0.0, comp = 0.0;
  for (double x : v) {
    const double t = sum + x;
    comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

void mean_and_error(const std::vector<double>& v, double& mean, double& std_error) {
  const auto n = static_cast<double>(v.size());
  mean = compensated_sum(v) / n;
  std::vector<double> sq(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) sq[k] = (v[k] - mean) * (v[k] - mean);
  std_error = std::sqrt(compensated_sum(sq) / (n - 1.0) / n);
}

}  // namespace

PathRecord simulate_closed_loop(const ProblemSpec& spec, const Policy& policy, const std::vector<double>& x0,
                                std::size_t i0, const SimulationOptions& options, std::uint64_t path) {
  check_inputs(spec, x0, i0);
  const SimTables tables(spec, policy, options.dt);
  PathRecord record;
  run_path(spec, tables, policy.gain != nullptr, x0, i0, options, path, &record);
  return record;
}

std::vector<double> path_costs(const ProblemSpec& spec, const Policy& policy, const std::vector<double>& x0,
                               std::size_t i0, std::size_t n_paths, const SimulationOptions& options) {
  check_inputs(spec, x0, i0);
  const SimTables tables(spec, policy, options.dt);
  std::vector<double> costs(n_paths);
  parallel_for(n_paths, options.execution, [&](std::size_t p) {
    costs[p] = run_path(spec, tables, policy.gain != nullptr, x0, i0, options, p, nullptr);
  });
  return costs;
}

CostEstimate mc_cost(const ProblemSpec& spec, const Policy& policy, const std::vector<double>& x0, std::size_t i0,
                     std::size_t n_paths, const SimulationOptions& options) {
  if (n_paths < 2) throw Error(ErrorKind::RangeError, "Monte Carlo needs at least two paths");
  const std::vector<double> costs = path_costs(spec, policy, x0, i0, n_paths, options);
  CostEstimate est;
  mean_and_error(costs, est.mean, est.std_error);
  est.n_paths = n_paths;
  est.dt = options.dt;
  est.seed = options.seed;
  return est;
}

double theoretical_gap(const ProblemSpec& spec, const EsreSolution& solution, const Perturbation& perturbation,
                       std::size_t i0, double dt) {
  if (solution.backend() != Backend::ode) {
    throw Error(ErrorKind::StructuralError, "theoretical gap needs a deterministic (ODE) solution");
  }
  const Policy probe{nullptr, perturbation};
  const SimTables tables(spec, probe, dt);
  const Lattice& lat = solution.lattice;
  std::vector<double> e(spec.m);
  double total = 0.0;
  for (std::size_t k = 0; k < tables.steps(); ++k) {
    const double t = static_cast<double>(k) * tables.dt();
    std::copy(tables.perturbation(k), tables.perturbation(k) + spec.m, e.begin());
    const Matrix probs = transition_matrix(spec.generator, t);
    const auto level = std::min(static_cast<std::size_t>(std::floor(t / lat.dt() + 1e-9)), lat.steps());
    double expected = 0.0;
    for (std::size_t j = 0; j < spec.ell(); ++j) {
      const SymMatrix weight = control_weight(spec.local(t, j), solution.P.at(level, 0, j));
      expected += probs(i0, j) * quad_form(weight.matrix(), e, e);
    }
    total += tables.dt() * expected;
  }
  return total;
}

std::vector<GapEstimate> optimality_gaps(const ProblemSpec& spec, const EsreSolution& solution,
                                         const std::vector<Perturbation>& perturbations, const std::vector<double>& x0,
                                         std::size_t i0, std::size_t n_paths, const SimulationOptions& options) {
  if (n_paths < 2) throw Error(ErrorKind::RangeError, "Monte Carlo needs at least two paths");
  const FeedbackGain gain = feedback_gain(solution, spec);
  const std::vector<double> base = path_costs(spec, Policy{&gain, Perturbation()}, x0, i0, n_paths, options);
  CostEstimate feedback;
  mean_and_error(base, feedback.mean, feedback.std_error);

  std::vector<GapEstimate> gaps;
  std::vector<double> diff(n_paths);
  for (const auto& perturbation : perturbations) {
    const std::vector<double> pert = path_costs(spec, Policy{&gain, perturbation}, x0, i0, n_paths, options);
    GapEstimate out;
    for (std::size_t p = 0; p < n_paths; ++p) diff[p] = pert[p] - base[p];
    mean_and_error(diff, out.gap, out.std_error);
    out.feedback = feedback;
    mean_and_error(pert, out.perturbed.mean, out.perturbed.std_error);
    for (CostEstimate* est : {&out.feedback, &out.perturbed}) {
      est->n_paths = n_paths;
      est->dt = options.dt;
      est->seed = options.seed;
    }
    if (solution.backend() == Backend::ode)
      out.theoretical = theoretical_gap(spec, solution, perturbation, i0, options.dt);
    gaps.push_back(std::move(out));
  }
  return gaps;
}

GapEstimate optimality_gap(const ProblemSpec& spec, const EsreSolution& solution, const Perturbation& perturbation,
                           const std::vector<double>& x0, std::size_t i0, std::size_t n_paths,
                           const SimulationOptions& options) {
  return optimality_gaps(spec, solution, {perturbation}, x0, i0, n_paths, options).front();
}

}  // namespace regimelq

#include "regimelq/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "regimelq/error.hpp"

namespace regimelq {

namespace {

constexpr double kTimeEps = 1e-12;

double time_eps(double scale) { return kTimeEps * std::max(1.0, std::abs(scale)); }

void check_dims(const Matrix& m, std::size_t rows, std::size_t cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << what << ": expected " << rows << "x" << cols << ", got " << m.rows() << "x" << m.cols();
    throw Error(ErrorKind::StructuralError, os.str());
  }
}

const char* name_of(CoefficientName name) {
  switch (name) {
    case CoefficientName::A: return "A";
    case CoefficientName::B: return "B";
    case CoefficientName::C: return "C";
    case CoefficientName::D: return "D";
    case CoefficientName::Q: return "Q";
    case CoefficientName::S: return "S";
    case CoefficientName::R: return "R";
    case CoefficientName::G: return "G";
  }
  return "?";
}

}  // namespace

// ---------------------------------------------------------------------------
// CoefficientField

CoefficientField CoefficientField::constant(Matrix value) {
  CoefficientField f;
  f.kind_ = FieldKind::constant;
  f.rows_ = value.rows();
  f.cols_ = value.cols();
  f.times_ = {0.0};
  f.values_.push_back(std::move(value));
  return f;
}

CoefficientField CoefficientField::time_table(std::vector<double> times, std::vector<Matrix> values) {
  if (times.empty() || times.size() != values.size()) {
    throw Error(ErrorKind::StructuralError, "time table needs one matrix per sample time");
  }
  if (times.front() != 0.0) throw Error(ErrorKind::StructuralError, "time table must start at t = 0");
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) throw Error(ErrorKind::StructuralError, "time table times must increase strictly");
  }
  for (const auto& v : values) {
    if (v.rows() != values.front().rows() || v.cols() != values.front().cols()) {
      throw Error(ErrorKind::StructuralError, "time table entries differ in shape");
    }
  }
  CoefficientField f;
  f.kind_ = FieldKind::time_table;
  f.rows_ = values.front().rows();
  f.cols_ = values.front().cols();
  f.times_ = std::move(times);
  f.values_ = std::move(values);
  return f;
}

CoefficientField CoefficientField::tree(std::vector<std::vector<Matrix>> levels) {
  if (levels.size() < 2) throw Error(ErrorKind::StructuralError, "tree field needs depth >= 1");
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (levels[k].size() != k + 1) {
      std::ostringstream os;
      os << "tree level " << k << " has " << levels[k].size() << " nodes, expected " << k + 1;
      throw Error(ErrorKind::StructuralError, os.str());
    }
    for (const auto& v : levels[k]) {
      if (v.rows() != levels[0][0].rows() || v.cols() != levels[0][0].cols()) {
        throw Error(ErrorKind::StructuralError, "tree field entries differ in shape");
      }
    }
  }
  CoefficientField f;
  f.kind_ = FieldKind::tree_node;
  f.rows_ = levels[0][0].rows();
  f.cols_ = levels[0][0].cols();
  f.levels_ = std::move(levels);
  return f;
}

bool CoefficientField::is_identically_zero() const noexcept {
  for (const Matrix* m : all_values())
    if (!m->is_zero()) return false;
  return true;
}

const Matrix& CoefficientField::at(double t, std::optional<TreeNode> node) const {
  switch (kind_) {
    case FieldKind::constant:
      return values_.front();
    case FieldKind::time_table: {
      // Last sample with times[k] <= t; the small slack keeps grid times that
      // land on a breakpoint up to rounding on the right-hand piece.
      const double slack = time_eps(t);
      const auto it = std::upper_bound(times_.begin(), times_.end(), t + slack);
      const std::size_t k = it == times_.begin() ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
      return values_[k];
    }
    case FieldKind::tree_node: {
      if (!node) throw Error(ErrorKind::OutOfRange, "tree-valued coefficient needs a node");
      const std::size_t level = std::min(node->level, levels_.size() - 1);
      const std::size_t up = std::min(node->up, level);
      return levels_[level][up];
    }
  }
  throw Error(ErrorKind::StructuralError, "corrupt coefficient field");
}

std::vector<const Matrix*> CoefficientField::all_values() const {
  std::vector<const Matrix*> out;
  for (const auto& v : values_) out.push_back(&v);
  for (const auto& level : levels_)
    for (const auto& v : level) out.push_back(&v);
  return out;
}

// ---------------------------------------------------------------------------
// ProblemSpec

const CoefficientField& ProblemSpec::field(CoefficientName name, std::size_t regime) const {
  if (regime >= regimes.size()) throw Error(ErrorKind::OutOfRange, "regime index out of range");
  const RegimeCoefficients& c = regimes[regime];
  switch (name) {
    case CoefficientName::A: return c.A;
    case CoefficientName::B: return c.B;
    case CoefficientName::C: return c.C;
    case CoefficientName::D: return c.D;
    case CoefficientName::Q: return c.Q;
    case CoefficientName::S: return c.S;
    case CoefficientName::R: return c.R;
    case CoefficientName::G: return c.G;
  }
  throw Error(ErrorKind::StructuralError, "unknown coefficient");
}

void ProblemSpec::check_structure(double asym_tol) const {
  if (n == 0 || m == 0) throw Error(ErrorKind::StructuralError, "state and control dimensions must be positive");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw Error(ErrorKind::RangeError, "horizon T must be positive");
  if (!(delta > 0.0)) throw Error(ErrorKind::RangeError, "delta must be positive");
  if (regimes.size() != ell()) {
    std::ostringstream os;
    os << "generator has " << ell() << " regimes but " << regimes.size() << " coefficient sets were given";
    throw Error(ErrorKind::StructuralError, os.str());
  }

  struct Shape {
    CoefficientName name;
    std::size_t rows, cols;
    bool symmetric;
  };
  const Shape shapes[] = {
      {CoefficientName::A, n, n, false}, {CoefficientName::B, n, m, false}, {CoefficientName::C, n, n, false},
      {CoefficientName::D, n, m, false}, {CoefficientName::Q, n, n, true},  {CoefficientName::S, m, n, false},
      {CoefficientName::R, m, m, true},  {CoefficientName::G, n, n, true},
  };

  std::optional<std::size_t> depth;
  for (std::size_t i = 0; i < regimes.size(); ++i) {
    for (const Shape& s : shapes) {
      const CoefficientField& f = field(s.name, i);
      std::ostringstream what;
      what << name_of(s.name) << " (regime " << i + 1 << ")";
      if (f.empty()) throw Error(ErrorKind::StructuralError, what.str() + " is missing");
      for (const Matrix* v : f.all_values()) {
        check_dims(*v, s.rows, s.cols, what.str().c_str());
        if (!v->all_finite()) throw Error(ErrorKind::RangeError, what.str() + " has non-finite entries");
        if (s.symmetric) {
          try {
            (void)make_symmetric(*v, asym_tol);
          } catch (const Error& e) {
            throw Error(ErrorKind::StructuralError, what.str() + ": " + e.what());
          }
        }
      }
      if (f.kind() == FieldKind::time_table) {
        if (s.name == CoefficientName::G) {
          throw Error(ErrorKind::StructuralError, what.str() + ": terminal weight cannot be a time table");
        }
        if (f.times().back() > horizon + time_eps(horizon)) {
          throw Error(ErrorKind::StructuralError, what.str() + ": time table extends beyond T");
        }
      }
      if (f.kind() == FieldKind::tree_node) {
        if (depth && *depth != f.tree_depth()) {
          throw Error(ErrorKind::StructuralError, what.str() + ": tree depth differs from other tree fields");
        }
        depth = f.tree_depth();
      }
    }
  }
}

std::optional<std::size_t> ProblemSpec::tree_depth() const {
  for (std::size_t i = 0; i < regimes.size(); ++i) {
    for (auto name : {CoefficientName::A, CoefficientName::B, CoefficientName::C, CoefficientName::D,
                      CoefficientName::Q, CoefficientName::S, CoefficientName::R, CoefficientName::G}) {
      const CoefficientField& f = field(name, i);
      if (f.kind() == FieldKind::tree_node) return f.tree_depth();
    }
  }
  return std::nullopt;
}

bool ProblemSpec::has_zero_d() const {
  return std::all_of(regimes.begin(), regimes.end(), [](const RegimeCoefficients& c) { return c.D.is_identically_zero(); });
}

LocalCoefficients ProblemSpec::local(double t, std::size_t regime, std::optional<TreeNode> node) const {
  const RegimeCoefficients& c = regimes.at(regime);
  return LocalCoefficients{c.A.at(t, node),
                           c.B.at(t, node),
                           c.C.at(t, node),
                           c.D.at(t, node),
                           c.S.at(t, node),
                           SymMatrix::symmetrized(c.Q.at(t, node)),
                           SymMatrix::symmetrized(c.R.at(t, node))};
}

SymMatrix ProblemSpec::terminal(std::size_t regime, std::optional<TreeNode> node) const {
  return SymMatrix::symmetrized(regimes.at(regime).G.at(horizon, node));
}

Matrix eval_coefficient(const ProblemSpec& spec, CoefficientName name, double t, std::size_t regime,
                        std::optional<TreeNode> node) {
  if (!(t >= -time_eps(spec.horizon) && t <= spec.horizon + time_eps(spec.horizon))) {
    std::ostringstream os;
    os << "t = " << t << " outside [0, " << spec.horizon << "]";
    throw Error(ErrorKind::OutOfRange, os.str());
  }
  if (regime >= spec.ell()) throw Error(ErrorKind::OutOfRange, "regime index out of range");
  const CoefficientField& f = spec.field(name, regime);
  if (f.kind() == FieldKind::tree_node) {
    if (!node) throw Error(ErrorKind::OutOfRange, "tree-valued coefficient needs a node");
    if (node->level > f.tree_depth() || node->up > node->level) {
      throw Error(ErrorKind::OutOfRange, "tree node outside the declared tree");
    }
  } else if (node) {
    throw Error(ErrorKind::OutOfRange, "deterministic coefficient does not take a node");
  }
  return f.at(t, node);
}

// ---------------------------------------------------------------------------
// Assumption checks

namespace {

struct SamplePoint {
  double time;
  std::optional<TreeNode> node;
};

// Every distinct coefficient configuration of the running-cost weights of one
// regime: table breakpoints for deterministic fields, tree nodes otherwise.
std::vector<SamplePoint> running_samples(const ProblemSpec& spec, std::size_t regime,
                                         std::initializer_list<CoefficientName> names) {
  std::optional<std::size_t> depth;
  std::set<double> times{0.0};
  for (auto name : names) {
    const CoefficientField& f = spec.field(name, regime);
    if (f.kind() == FieldKind::tree_node) depth = f.tree_depth();
    if (f.kind() == FieldKind::time_table) times.insert(f.times().begin(), f.times().end());
  }
  std::vector<SamplePoint> out;
  if (depth) {
    const double dt = spec.horizon / static_cast<double>(*depth);
    // The last tree level only carries the terminal weight.
    for (std::size_t k = 0; k < *depth; ++k)
      for (std::size_t j = 0; j <= k; ++j) out.push_back({static_cast<double>(k) * dt, TreeNode{k, j}});
  } else {
    for (double t : times)
      if (t < spec.horizon) out.push_back({t, std::nullopt});
  }
  return out;
}

}  // namespace

ValidationReport validate_assumptions(const ProblemSpec& spec, double tol) {
  spec.check_structure();
  ValidationReport report;
  const SymMatrix delta_i = spec.delta * SymMatrix::identity(spec.m);

  for (std::size_t i = 0; i < spec.ell(); ++i) {
    for (const SamplePoint& p : running_samples(spec, i, {CoefficientName::Q, CoefficientName::S, CoefficientName::R})) {
      const LocalCoefficients c = spec.local(p.time, i, p.node);
      const double r_margin = min_eigenvalue(c.R - delta_i);
      if (r_margin < -tol) report.violations.push_back({"R>=delta*I", i, p.time, p.node, r_margin});
      if (min_eigenvalue(c.R) <= 0.0) continue;  // Schur complement undefined; already reported
      const SymMatrix r_inv = sym_inverse(c.R, 1e300);
      const double q_margin = min_eigenvalue(c.Q - congruence(c.S, r_inv));
      if (q_margin < -tol) report.violations.push_back({"Q-S'R^-1S>=0", i, p.time, p.node, q_margin});
    }
    const CoefficientField& g = spec.field(CoefficientName::G, i);
    if (g.kind() == FieldKind::tree_node) {
      const std::size_t d = g.tree_depth();
      for (std::size_t j = 0; j <= d; ++j) {
        const TreeNode node{d, j};
        const double g_margin = min_eigenvalue(spec.terminal(i, node));
        if (g_margin < -tol) report.violations.push_back({"G>=0", i, spec.horizon, node, g_margin});
      }
    } else {
      const double g_margin = min_eigenvalue(spec.terminal(i));
      if (g_margin < -tol) report.violations.push_back({"G>=0", i, spec.horizon, std::nullopt, g_margin});
    }
  }
  report.passed = report.violations.empty();
  return report;
}

double check_smallness(const ProblemSpec& spec, double cond_threshold) {
  double worst = 0.0;
  for (std::size_t i = 0; i < spec.ell(); ++i) {
    const double qii = spec.generator.rate(i, i);
    const auto samples = running_samples(spec, i, {CoefficientName::D, CoefficientName::R});
    const std::optional<std::size_t> depth = spec.tree_depth();
    for (std::size_t s = 0; s < samples.size(); ++s) {
      const SamplePoint& p = samples[s];
      // e^{-q_ii t} is nondecreasing, so each constant piece peaks at its right end.
      double right = spec.horizon;
      if (p.node && depth) {
        right = std::min(spec.horizon, static_cast<double>(p.node->level + 1) * spec.horizon / static_cast<double>(*depth));
      } else if (!p.node && s + 1 < samples.size()) {
        right = samples[s + 1].time;
      }
      const Matrix& d = spec.field(CoefficientName::D, i).at(p.time, p.node);
      if (d.is_zero()) continue;
      const SymMatrix r = SymMatrix::symmetrized(spec.field(CoefficientName::R, i).at(p.time, p.node));
      const SymMatrix dr = congruence(d.transpose(), sym_inverse(r, cond_threshold));
      worst = std::max(worst, std::exp(-qii * right) * dr.frobenius_norm());
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Tilde transform

double TildeTransform::factor(double t, std::size_t regime) const noexcept {
  return std::exp(spec_->generator.rate(regime, regime) * t);
}

LocalCoefficients TildeTransform::apply(const LocalCoefficients& raw, double t, std::size_t regime) const {
  const double f = factor(t, regime);
  LocalCoefficients out = raw;
  out.Q *= f;
  out.R *= f;
  out.S *= f;
  return out;
}

LocalCoefficients TildeTransform::local(double t, std::size_t regime, std::optional<TreeNode> node) const {
  return apply(spec_->local(t, regime, node), t, regime);
}

SymMatrix TildeTransform::terminal(std::size_t regime, std::optional<TreeNode> node) const {
  return factor(spec_->horizon, regime) * spec_->terminal(regime, node);
}

RegimeField scale_by_tilde_factor(const RegimeField& field, const Generator& g, const Lattice& lattice, double sign) {
  RegimeField out = field;
  for (std::size_t k = 0; k < lattice.levels(); ++k) {
    const double t = lattice.time(k);
    for (std::size_t i = 0; i < field.regimes(); ++i) {
      const double f = std::exp(sign * g.rate(i, i) * t);
      for (std::size_t j = 0; j < lattice.nodes(k); ++j) out.at(k, j, i) *= f;
    }
  }
  return out;
}

UntildedFields untilde_solution(const RegimeField& p_tilde, const RegimeField& lambda_tilde, const Generator& g,
                                const Lattice& lattice) {
  return UntildedFields{scale_by_tilde_factor(p_tilde, g, lattice, -1.0),
                        scale_by_tilde_factor(lambda_tilde, g, lattice, -1.0)};
}

}  // namespace regimelq

#pragma once

#include <cmath>
#include <random>

#include "regimelq/esre.hpp"
#include "regimelq/model.hpp"

namespace regimelq::test {

inline CoefficientField cst(double v) { return CoefficientField::constant(Matrix{{v}}); }
inline CoefficientField cst(Matrix m) { return CoefficientField::constant(std::move(m)); }

/// Scalar two-regime problem: B = R = G = 1, Q = (q1, 0), rest zero, unit rates.
inline ProblemSpec e1(double q1 = 0.0) {
  ProblemSpec s;
  s.n = 1;
  s.m = 1;
  s.horizon = 1.0;
  s.delta = 0.5;
  s.generator = validate_generator(Matrix{{-1, 1}, {1, -1}});
  for (int i = 0; i < 2; ++i) {
    RegimeCoefficients c;
    c.A = c.C = c.D = c.S = cst(0.0);
    c.B = c.R = c.G = cst(1.0);
    c.Q = cst(i == 0 ? q1 : 0.0);
    s.regimes.push_back(c);
  }
  s.check_structure();
  return s;
}

/// Scalar problem with every coefficient given explicitly (same in both regimes).
struct Scalar {
  double A = 0, B = 0, C = 0, D = 0, Q = 0, S = 0, R = 1, G = 1;
};
inline ProblemSpec scalar_spec(const Scalar& v, Matrix generator = Matrix{{-1, 1}, {1, -1}}, double T = 1.0,
                               double delta = 0.5) {
  ProblemSpec s;
  s.n = 1;
  s.m = 1;
  s.horizon = T;
  s.delta = delta;
  s.generator = validate_generator(generator);
  for (std::size_t i = 0; i < s.generator.regimes(); ++i) {
    RegimeCoefficients c;
    c.A = cst(v.A);
    c.B = cst(v.B);
    c.C = cst(v.C);
    c.D = cst(v.D);
    c.Q = cst(v.Q);
    c.S = cst(v.S);
    c.R = cst(v.R);
    c.G = cst(v.G);
    s.regimes.push_back(c);
  }
  return s;
}

inline Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(r, c);
  for (auto& x : m.data()) x = u(rng);
  return m;
}

/// Random problem satisfying R ⪰ δI, Q - SᵀR⁻¹S ⪰ 0 and G ⪰ 0 by construction.
inline ProblemSpec random_spec(std::uint64_t seed, std::size_t n, std::size_t m, std::size_t ell,
                               double d_scale = 0.1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> rate(0.2, 2.0);
  ProblemSpec s;
  s.n = n;
  s.m = m;
  s.horizon = 1.0;
  s.delta = 0.5;
  Matrix q(ell, ell);
  for (std::size_t i = 0; i < ell; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < ell; ++j)
      if (j != i) row += (q(i, j) = rate(rng));
    q(i, i) = -row;
  }
  s.generator = validate_generator(q);
  for (std::size_t i = 0; i < ell; ++i) {
    RegimeCoefficients c;
    c.A = cst(random_matrix(rng, n, n, 0.5));
    c.B = cst(random_matrix(rng, n, m, 1.0));
    c.C = cst(random_matrix(rng, n, n, 0.3));
    c.D = cst(random_matrix(rng, n, m, d_scale));
    const Matrix mr = random_matrix(rng, m, m, 1.0);
    const Matrix r = Matrix::identity(m) + 0.5 * (mr * mr.transpose());
    const Matrix sm = random_matrix(rng, m, n, 0.3);
    const Matrix l = random_matrix(rng, n, n, 1.0);
    const SymMatrix rinv = sym_inverse(SymMatrix::symmetrized(r));
    const Matrix qm = sm.transpose() * rinv.matrix() * sm + 0.5 * (l * l.transpose());
    const Matrix h = random_matrix(rng, n, n, 1.0);
    c.R = cst(SymMatrix::symmetrized(r).matrix());
    c.S = cst(sm);
    c.Q = cst(SymMatrix::symmetrized(qm).matrix());
    c.G = cst(SymMatrix::symmetrized(0.5 * (h * h.transpose()) + 0.1 * Matrix::identity(n)).matrix());
    s.regimes.push_back(c);
  }
  s.check_structure();
  return s;
}

/// The three randomized problems used by the monotonicity and cross-oracle checks.
inline ProblemSpec random_family(int k) {
  switch (k) {
    case 0: return random_spec(101, 2, 1, 2);
    case 1: return random_spec(202, 3, 2, 3);
    default: return random_spec(303, 1, 1, 3, 0.3);
  }
}

}  // namespace regimelq::test

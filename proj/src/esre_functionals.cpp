#include "regimelq/esre.hpp"

namespace regimelq {

SymMatrix drift_pi(const LocalCoefficients& c, const SymMatrix& p, const SymMatrix& lam) {
  require_same_shape(p, c.A, "drift_pi");
  require_same_shape(lam, c.C, "drift_pi");
  const Matrix pa = p.matrix() * c.A;
  const Matrix lc = lam.matrix() * c.C;
  Matrix raw = pa + pa.transpose();
  raw += lc + lc.transpose();
  return SymMatrix::symmetrized(raw) + congruence(c.C, p);
}

Matrix gain_numerator(const LocalCoefficients& c, const SymMatrix& p, const SymMatrix& lam) {
  const Matrix dt = c.D.transpose();
  Matrix n = c.B.transpose() * p.matrix();
  n += dt * (p.matrix() * c.C);
  n += dt * lam.matrix();
  n += c.S;
  return n;
}

SymMatrix control_weight(const LocalCoefficients& c, const SymMatrix& p) { return c.R + congruence(c.D, p); }

SymMatrix drift_h(const LocalCoefficients& c, const SymMatrix& p, const SymMatrix& lam, double cond_threshold) {
  const Matrix n = gain_numerator(c, p, lam);
  return -1.0 * congruence(n, sym_inverse(control_weight(c, p), cond_threshold));
}

SymMatrix drift_h_zero_d(const LocalCoefficients& c, const SymMatrix& p, double cond_threshold) {
  const Matrix n = c.B.transpose() * p.matrix() + c.S;
  return -1.0 * congruence(n, sym_inverse(c.R, cond_threshold));
}

Matrix theta_hat(const LocalCoefficients& c, const SymMatrix& p, const SymMatrix& lam, double cond_threshold) {
  const SymMatrix w_inv = sym_inverse(control_weight(c, p), cond_threshold);
  return -1.0 * (w_inv.matrix() * gain_numerator(c, p, lam));
}

SymMatrix g_of_theta(const LocalCoefficients& c, const SymMatrix& p, const SymMatrix& lam, const Matrix& theta) {
  const Matrix a = c.A + c.B * theta;
  const Matrix k = c.C + c.D * theta;
  const Matrix pa = p.matrix() * a;
  const Matrix lk = lam.matrix() * k;
  Matrix raw = pa + pa.transpose();
  raw += lk + lk.transpose();
  return SymMatrix::symmetrized(raw) + congruence(k, p);
}

SymMatrix f_of_theta(const LocalCoefficients& c, const SymMatrix& p, const SymMatrix& lam, const Matrix& theta) {
  const Matrix ts = theta.transpose() * c.S;
  return g_of_theta(c, p, lam, theta) + SymMatrix::symmetrized(ts + ts.transpose()) + congruence(theta, c.R) + c.Q;
}

}  // namespace regimelq

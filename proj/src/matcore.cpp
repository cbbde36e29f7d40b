#include "regimelq/matcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "regimelq/error.hpp"

namespace regimelq {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& row : rows) {
    if (row.size() != cols_) {
      throw Error(ErrorKind::DimensionMismatch, "ragged matrix initializer");
    }
    data_.insert(data_.end(), row.begin(), row.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_nested(const std::vector<std::vector<double>>& rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.front().size();
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    if (rows[i].size() != c) {
      throw Error(ErrorKind::DimensionMismatch, "ragged nested matrix");
    }
    for (std::size_t j = 0; j < c; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

double Matrix::frobenius_norm() const noexcept {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

double Matrix::max_abs() const noexcept {
  double s = 0.0;
  for (double v : data_) s = std::max(s, std::abs(v));
  return s;
}

bool Matrix::is_zero() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return v == 0.0; });
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* where) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream os;
    os << where << ": " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x" << b.cols();
    throw Error(ErrorKind::DimensionMismatch, os.str());
  }
}

Matrix& Matrix::operator+=(const Matrix& other) {
  require_same_shape(*this, other, "matrix +");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  require_same_shape(*this, other, "matrix -");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
  return *this;
}

Matrix& Matrix::operator*=(double s) noexcept {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator-(Matrix a) { return a *= -1.0; }
Matrix operator*(double s, Matrix a) { return a *= s; }
Matrix operator*(Matrix a, double s) { return a *= s; }

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    std::ostringstream os;
    os << "matrix product: " << a.rows() << "x" << a.cols() << " * " << b.rows() << "x"
       << b.cols();
    throw Error(ErrorKind::DimensionMismatch, os.str());
  }
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

// ---------------------------------------------------------------------------

SymMatrix SymMatrix::identity(std::size_t dim) {
  SymMatrix s(dim);
  for (std::size_t i = 0; i < dim; ++i) s.m_(i, i) = 1.0;
  return s;
}

SymMatrix SymMatrix::diagonal(std::span<const double> diag) {
  SymMatrix s(diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) s.m_(i, i) = diag[i];
  return s;
}

SymMatrix SymMatrix::symmetrized(const Matrix& raw) {
  if (!raw.is_square()) throw Error(ErrorKind::DimensionMismatch, "symmetrize: not square");
  SymMatrix s(raw.rows());
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    s.m_(i, i) = raw(i, i);
    for (std::size_t j = i + 1; j < raw.cols(); ++j) s.set(i, j, 0.5 * (raw(i, j) + raw(j, i)));
  }
  return s;
}

double SymMatrix::trace() const noexcept {
  double t = 0.0;
  for (std::size_t i = 0; i < dim(); ++i) t += m_(i, i);
  return t;
}

SymMatrix& SymMatrix::operator+=(const SymMatrix& other) {
  m_ += other.m_;
  return *this;
}

SymMatrix& SymMatrix::operator-=(const SymMatrix& other) {
  m_ -= other.m_;
  return *this;
}

SymMatrix& SymMatrix::operator*=(double s) noexcept {
  m_ *= s;
  return *this;
}

SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
SymMatrix operator-(SymMatrix a, const SymMatrix& b) { return a -= b; }
SymMatrix operator*(double s, SymMatrix a) { return a *= s; }

// ---------------------------------------------------------------------------

SymMatrix make_symmetric(const Matrix& raw, double asym_tol) {
  if (!raw.is_square()) throw Error(ErrorKind::DimensionMismatch, "make_symmetric: not square");
  if (raw.rows() == 0) throw Error(ErrorKind::DimensionMismatch, "make_symmetric: empty matrix");
  double worst = 0.0;
  for (std::size_t i = 0; i < raw.rows(); ++i)
    for (std::size_t j = i + 1; j < raw.cols(); ++j)
      worst = std::max(worst, std::abs(raw(i, j) - raw(j, i)));
  if (worst > asym_tol) {
    std::ostringstream os;
    os << "max |raw - raw^T| = " << worst << " exceeds " << asym_tol;
    throw Error(ErrorKind::AsymmetryExceeded, os.str());
  }
  return SymMatrix::symmetrized(raw);
}

SymEigen jacobi_eigen(const SymMatrix& sym) {
  const std::size_t n = sym.dim();
  Matrix a = sym.matrix();
  Matrix v = Matrix::identity(n);

  const double scale = a.frobenius_norm();
  const double eps = std::numeric_limits<double>::epsilon();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off <= (eps * scale) * (eps * scale)) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          const double arp = a(r, p);
          const double arq = a(r, q);
          a(r, p) = c * arp - s * arq;
          a(p, r) = a(r, p);
          a(r, q) = s * arp + c * arq;
          a(q, r) = a(r, q);
        }
        for (std::size_t r = 0; r < n; ++r) {
          const double vrp = v(r, p);
          const double vrq = v(r, q);
          v(r, p) = c * vrp - s * vrq;
          v(r, q) = s * vrp + c * vrq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });

  SymEigen out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = v(r, order[k]);
  }
  return out;
}

double min_eigenvalue(const SymMatrix& m) {
  if (m.dim() == 1) return m(0, 0);
  return jacobi_eigen(m).values.front();
}

double max_eigenvalue(const SymMatrix& m) {
  if (m.dim() == 1) return m(0, 0);
  return jacobi_eigen(m).values.back();
}

bool loewner_leq(const SymMatrix& a, const SymMatrix& b, double tol) {
  if (a.dim() != b.dim()) throw Error(ErrorKind::DimensionMismatch, "loewner_leq: dims differ");
  return min_eigenvalue(b - a) >= -tol;
}

namespace {

SymMatrix spectral_rebuild(const SymEigen& eig, const std::vector<double>& values) {
  const std::size_t n = values.size();
  Matrix out(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const double lam = values[k];
    if (lam == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) {
      const double vi = eig.vectors(i, k) * lam;
      for (std::size_t j = 0; j < n; ++j) out(i, j) += vi * eig.vectors(j, k);
    }
  }
  return SymMatrix::symmetrized(out);
}

}  // namespace

SymMatrix sym_inverse(const SymMatrix& m, double cond_threshold) {
  const std::size_t n = m.dim();
  if (n == 0) throw Error(ErrorKind::DimensionMismatch, "sym_inverse: empty matrix");
  if (n == 1) {
    if (m(0, 0) == 0.0 || !std::isfinite(m(0, 0))) {
      throw Error(ErrorKind::NearSingular, "sym_inverse: zero eigenvalue");
    }
    return SymMatrix::scalar(1.0 / m(0, 0));
  }
  const SymEigen eig = jacobi_eigen(m);
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (double lam : eig.values) {
    lo = std::min(lo, std::abs(lam));
    hi = std::max(hi, std::abs(lam));
  }
  if (lo == 0.0 || hi / lo > cond_threshold) {
    std::ostringstream os;
    os << "sym_inverse: condition number " << (lo == 0.0 ? std::numeric_limits<double>::infinity() : hi / lo)
       << " exceeds " << cond_threshold;
    throw Error(ErrorKind::NearSingular, os.str());
  }
  std::vector<double> inv(n);
  for (std::size_t k = 0; k < n; ++k) inv[k] = 1.0 / eig.values[k];
  return spectral_rebuild(eig, inv);
}

SymMatrix psd_clip(const SymMatrix& m) {
  if (m.dim() == 1) return SymMatrix::scalar(std::max(0.0, m(0, 0)));
  const SymEigen eig = jacobi_eigen(m);
  std::vector<double> clipped(eig.values);
  for (double& v : clipped) v = std::max(0.0, v);
  return spectral_rebuild(eig, clipped);
}

SymMatrix congruence(const Matrix& m, const SymMatrix& p) {
  return SymMatrix::symmetrized(m.transpose() * (p.matrix() * m));
}

double frobenius_inner(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "frobenius_inner");
  double s = 0.0;
  for (std::size_t k = 0; k < a.data().size(); ++k) s += a.data()[k] * b.data()[k];
  return s;
}

namespace {

// Returns determinant; writes the inverse into *inv when non-null.
double gauss_jordan(const Matrix& m, Matrix* inv) {
  if (!m.is_square()) throw Error(ErrorKind::DimensionMismatch, "inverse: not square");
  const std::size_t n = m.rows();
  Matrix a = m;
  Matrix b = Matrix::identity(n);
  double det = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
    if (a(piv, col) == 0.0) return 0.0;
    if (piv != col) {
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(a(piv, j), a(col, j));
        std::swap(b(piv, j), b(col, j));
      }
      det = -det;
    }
    const double d = a(col, col);
    det *= d;
    for (std::size_t j = 0; j < n; ++j) {
      a(col, j) /= d;
      b(col, j) /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a(r, col);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        a(r, j) -= f * a(col, j);
        b(r, j) -= f * b(col, j);
      }
    }
  }
  if (inv != nullptr) *inv = std::move(b);
  return det;
}

}  // namespace

Matrix inverse(const Matrix& m) {
  Matrix inv;
  if (gauss_jordan(m, &inv) == 0.0) throw Error(ErrorKind::NearSingular, "inverse: singular matrix");
  return inv;
}

double determinant(const Matrix& m) { return gauss_jordan(m, nullptr); }

}  // namespace regimelq

#pragma once

// Dense small-matrix algebra for the Riccati solvers. Dimensions are tiny
// (n, m <= 16), so everything is row-major std::vector storage with value
// semantics and no expression templates.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace regimelq {

inline constexpr double kDefaultAsymTol = 1e-10;
inline constexpr double kDefaultCondThreshold = 1e12;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix from_nested(const std::vector<std::vector<double>>& rows);

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }
  [[nodiscard]] bool is_square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  [[nodiscard]] std::span<double> data() noexcept { return data_; }
  [[nodiscard]] std::span<const double> data() const noexcept { return data_; }

  [[nodiscard]] Matrix transpose() const;
  [[nodiscard]] double frobenius_norm() const noexcept;
  [[nodiscard]] double max_abs() const noexcept;
  [[nodiscard]] bool is_zero() const noexcept;
  [[nodiscard]] bool all_finite() const noexcept;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s) noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator-(Matrix a);
Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator*(double s, Matrix a);
Matrix operator*(Matrix a, double s);

/// Symmetric matrix. Exact symmetry of the stored entries is an invariant.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t dim) : m_(dim, dim) {}

  static SymMatrix identity(std::size_t dim);
  static SymMatrix diagonal(std::span<const double> diag);
  static SymMatrix scalar(double value) { return diagonal(std::span<const double>(&value, 1)); }
  /// (raw + rawᵀ)/2 without any tolerance check. For products that are
  /// symmetric in exact arithmetic.
  static SymMatrix symmetrized(const Matrix& raw);

  [[nodiscard]] std::size_t dim() const noexcept { return m_.rows(); }
  double operator()(std::size_t i, std::size_t j) const noexcept { return m_(i, j); }
  void set(std::size_t i, std::size_t j, double v) noexcept {
    m_(i, j) = v;
    m_(j, i) = v;
  }

  [[nodiscard]] const Matrix& matrix() const noexcept { return m_; }
  operator const Matrix&() const noexcept { return m_; }  // NOLINT(google-explicit-constructor)

  [[nodiscard]] double trace() const noexcept;
  [[nodiscard]] double frobenius_norm() const noexcept { return m_.frobenius_norm(); }

  SymMatrix& operator+=(const SymMatrix& other);
  SymMatrix& operator-=(const SymMatrix& other);
  SymMatrix& operator*=(double s) noexcept;

  friend bool operator==(const SymMatrix&, const SymMatrix&) = default;

 private:
  Matrix m_;
};

SymMatrix operator+(SymMatrix a, const SymMatrix& b);
SymMatrix operator-(SymMatrix a, const SymMatrix& b);
SymMatrix operator*(double s, SymMatrix a);

struct SymEigen {
  std::vector<double> values;  // ascending
  Matrix vectors;              // columns are eigenvectors
};

/// Cyclic Jacobi rotations; converges to machine precision for the small
/// dimensions used here.
SymEigen jacobi_eigen(const SymMatrix& m);

/// Throws AsymmetryExceeded if max|raw - rawᵀ| > asym_tol.
SymMatrix make_symmetric(const Matrix& raw, double asym_tol = kDefaultAsymTol);

double min_eigenvalue(const SymMatrix& m);
double max_eigenvalue(const SymMatrix& m);

/// A ⪯ B up to tol, i.e. min_eigenvalue(B - A) >= -tol.
bool loewner_leq(const SymMatrix& a, const SymMatrix& b, double tol);

/// Spectral inverse. NearSingular when a zero eigenvalue shows up or the
/// spectral condition number exceeds cond_threshold.
SymMatrix sym_inverse(const SymMatrix& m, double cond_threshold = kDefaultCondThreshold);

/// Clips negative eigenvalues to zero.
SymMatrix psd_clip(const SymMatrix& m);

/// Mᵀ P M, symmetrized.
SymMatrix congruence(const Matrix& m, const SymMatrix& p);

/// ⟨A,B⟩ = tr(AᵀB).
double frobenius_inner(const Matrix& a, const Matrix& b);

/// General inverse by partially pivoted Gauss-Jordan; NearSingular on a zero pivot.
Matrix inverse(const Matrix& m);
double determinant(const Matrix& m);

void require_same_shape(const Matrix& a, const Matrix& b, const char* where);

}  // namespace regimelq

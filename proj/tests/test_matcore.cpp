#include <doctest.h>

#include <cmath>
#include <random>

#include "regimelq/error.hpp"
#include "regimelq/matcore.hpp"

using namespace regimelq;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::IoError;
}

SymMatrix random_sym(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g;
  Matrix m(n, n);
  for (auto& x : m.data()) x = g(rng);
  return SymMatrix::symmetrized(m);
}

}  // namespace

TEST_CASE("make_symmetric") {
  CHECK(make_symmetric(Matrix{{1, 2}, {2, 3}}, 1e-12).matrix() == Matrix{{1, 2}, {2, 3}});
  const auto s = make_symmetric(Matrix{{1, 2 + 1e-13}, {2, 3}}, 1e-12);
  CHECK(std::abs(s(0, 1) - (2 + 5e-14)) < 1e-15);
  CHECK(s(0, 1) == s(1, 0));
  CHECK(kind_of([] { (void)make_symmetric(Matrix{{1, 2}, {5, 3}}, 1e-12); }) == ErrorKind::AsymmetryExceeded);
  CHECK(kind_of([] { (void)make_symmetric(Matrix{{1, 2, 3}}, 1e-12); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("extreme eigenvalues") {
  CHECK(min_eigenvalue(SymMatrix::identity(2)) == doctest::Approx(1.0));
  const double d[] = {2.0, -3.0};
  CHECK(min_eigenvalue(SymMatrix::diagonal(d)) == doctest::Approx(-3.0));
  CHECK(max_eigenvalue(SymMatrix::diagonal(d)) == doctest::Approx(2.0));
  const auto m = make_symmetric(Matrix{{2, 1}, {1, 2}});
  CHECK(min_eigenvalue(m) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(max_eigenvalue(m) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("jacobi eigenvectors reconstruct the matrix") {
  std::mt19937_64 rng(5);
  for (std::size_t n : {1u, 2u, 3u, 5u, 8u}) {
    const auto a = random_sym(rng, n);
    const auto e = jacobi_eigen(a);
    Matrix lam(n, n);
    for (std::size_t k = 0; k < n; ++k) lam(k, k) = e.values[k];
    const Matrix back = e.vectors * lam * e.vectors.transpose();
    CHECK((back - a.matrix()).max_abs() < 1e-12);
    for (std::size_t k = 1; k < n; ++k) CHECK(e.values[k - 1] <= e.values[k]);
  }
}

TEST_CASE("loewner order") {
  CHECK(loewner_leq(SymMatrix(2), SymMatrix::identity(2), 0.0));
  const double a[] = {1.0, 0.0}, b[] = {0.0, 1.0};
  CHECK_FALSE(loewner_leq(SymMatrix::diagonal(a), SymMatrix::diagonal(b), 0.0));
  const auto m = make_symmetric(Matrix{{3, -1}, {-1, 0.5}});
  CHECK(loewner_leq(m, m, 0.0));
}

TEST_CASE("guarded symmetric inverse") {
  const double d[] = {2.0, 4.0};
  const auto inv = sym_inverse(SymMatrix::diagonal(d), 1e12);
  CHECK(inv(0, 0) == doctest::Approx(0.5));
  CHECK(inv(1, 1) == doctest::Approx(0.25));
  CHECK(inv(0, 1) == 0.0);
  CHECK(sym_inverse(SymMatrix::identity(3)).matrix() == Matrix::identity(3));
  const double bad[] = {1.0, 1e-15};
  CHECK(kind_of([&] { (void)sym_inverse(SymMatrix::diagonal(bad), 1e12); }) == ErrorKind::NearSingular);
}

TEST_CASE("psd clip removes only negative eigenvalues") {
  const double d[] = {-1e-12, 2.0};
  const auto c = psd_clip(SymMatrix::diagonal(d));
  CHECK(min_eigenvalue(c) >= 0.0);
  CHECK(c(1, 1) == doctest::Approx(2.0));
}

TEST_CASE("trace bound tr(AB) <= lambda_max(A) tr(B)") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 4;
    const auto a = random_sym(rng, n);
    const auto h = random_sym(rng, n);
    const auto b = SymMatrix::symmetrized(h.matrix() * h.matrix());
    const double lhs = frobenius_inner(a.matrix(), b.matrix());
    const double rhs = max_eigenvalue(a) * b.trace();
    CHECK(lhs <= rhs + 1e-10 * (1.0 + a.frobenius_norm() * b.frobenius_norm()));
  }
}

TEST_CASE("congruence, inverse, determinant") {
  const Matrix m{{1, 2}, {0, 1}};
  const auto p = SymMatrix::identity(2);
  CHECK(congruence(m, p).matrix() == m.transpose() * m);
  CHECK((inverse(m) * m - Matrix::identity(2)).max_abs() < 1e-15);
  CHECK(determinant(Matrix{{2, 1}, {1, 3}}) == doctest::Approx(5.0));
}

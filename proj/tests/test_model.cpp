#include <doctest.h>

#include <cmath>

#include "regimelq/error.hpp"
#include "regimelq/model.hpp"
#include "support.hpp"

using namespace regimelq;
using test::Scalar;
using test::scalar_spec;

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

bool has_violation(const ValidationReport& r, const std::string& id) {
  for (const auto& v : r.violations)
    if (v.assumption == id) return true;
  return false;
}

}  // namespace

TEST_CASE("coefficient lookup") {
  const auto c = CoefficientField::constant(Matrix{{3}});
  CHECK(c.at(0.0)(0, 0) == 3.0);
  CHECK(c.at(0.77)(0, 0) == 3.0);

  const auto tab = CoefficientField::time_table({0.0, 0.5}, {Matrix{{1}}, Matrix{{2}}});
  CHECK(tab.at(0.49)(0, 0) == 1.0);
  CHECK(tab.at(0.5)(0, 0) == 2.0);
  CHECK(tab.at(1.0)(0, 0) == 2.0);

  auto spec = scalar_spec(Scalar{.B = 1, .R = 1});
  spec.regimes[0].Q = tab;
  CHECK(eval_coefficient(spec, CoefficientName::Q, 1.0, 0)(0, 0) == 2.0);
  CHECK(kind_of([&] { (void)eval_coefficient(spec, CoefficientName::Q, 1.5, 0); }) == ErrorKind::OutOfRange);
  CHECK(kind_of([&] { (void)eval_coefficient(spec, CoefficientName::Q, 0.2, 5); }) == ErrorKind::OutOfRange);
  CHECK(kind_of([&] { (void)eval_coefficient(spec, CoefficientName::Q, 0.2, 0, TreeNode{0, 0}); }) ==
        ErrorKind::OutOfRange);
}

TEST_CASE("tree coefficient lookup") {
  const auto tree = CoefficientField::tree({{Matrix{{1}}}, {Matrix{{0.5}}, Matrix{{1.5}}}});
  CHECK(tree.tree_depth() == 1);
  CHECK(tree.at(1.0, TreeNode{1, 1})(0, 0) == 1.5);
  auto spec = scalar_spec(Scalar{.B = 1, .R = 1});
  spec.regimes[1].Q = tree;
  CHECK(spec.tree_depth() == std::optional<std::size_t>(1));
  CHECK_FALSE(spec.is_deterministic());
  CHECK(kind_of([&] { (void)eval_coefficient(spec, CoefficientName::Q, 0.2, 1); }) == ErrorKind::OutOfRange);
  CHECK(eval_coefficient(spec, CoefficientName::Q, 1.0, 1, TreeNode{1, 0})(0, 0) == 0.5);
}

TEST_CASE("structure checks") {
  auto spec = scalar_spec(Scalar{.B = 1});
  spec.regimes[0].B = CoefficientField::constant(Matrix{{1, 2}});
  CHECK(kind_of([&] { spec.check_structure(); }) == ErrorKind::StructuralError);

  auto asym = test::random_spec(1, 2, 1, 2);
  asym.regimes[1].Q = CoefficientField::constant(Matrix{{1, 0.5}, {0.2, 1}});
  CHECK(kind_of([&] { asym.check_structure(); }) == ErrorKind::StructuralError);

  auto late = scalar_spec(Scalar{.B = 1});
  late.regimes[0].Q = CoefficientField::time_table({0.0, 1.5}, {Matrix{{1}}, Matrix{{2}}});
  CHECK(kind_of([&] { late.check_structure(); }) == ErrorKind::StructuralError);
}

TEST_CASE("assumption validation") {
  CHECK(validate_assumptions(scalar_spec(Scalar{.Q = 1, .R = 1, .G = 1}), 0.0).passed);

  const auto low_r = validate_assumptions(scalar_spec(Scalar{.R = 0.1}), 0.0);
  CHECK_FALSE(low_r.passed);
  CHECK(has_violation(low_r, "R>=delta*I"));

  const auto cross = validate_assumptions(scalar_spec(Scalar{.Q = 1, .S = 2, .R = 1}), 0.0);
  CHECK_FALSE(cross.passed);
  CHECK(has_violation(cross, "Q-S'R^-1S>=0"));
  for (const auto& v : cross.violations)
    if (v.assumption == "Q-S'R^-1S>=0") CHECK(v.value == doctest::Approx(-3.0));

  CHECK(has_violation(validate_assumptions(scalar_spec(Scalar{.G = -1}), 0.0), "G>=0"));
}

TEST_CASE("smallness functional") {
  CHECK(check_smallness(test::e1()) == 0.0);
  CHECK(check_smallness(test::random_spec(4, 2, 2, 3, 0.0)) == 0.0);
  CHECK(check_smallness(scalar_spec(Scalar{.D = 1, .R = 2})) == doctest::Approx(std::exp(1.0) / 2).epsilon(1e-12));
  const auto frozen = scalar_spec(Scalar{.D = 1, .R = 1}, Matrix{{0, 0}, {0, 0}}, 7.0);
  CHECK(check_smallness(frozen) == doctest::Approx(1.0));
}

TEST_CASE("tilde transform") {
  const auto still = scalar_spec(Scalar{.Q = 2, .R = 1}, Matrix{{0, 0}, {1, -1}});
  const TildeTransform tt0(still);
  CHECK(tt0.local(0.6, 0).Q(0, 0) == 2.0);
  CHECK(tt0.terminal(0)(0, 0) == 1.0);

  const auto spec = scalar_spec(Scalar{.Q = 2, .R = 1}, Matrix{{-1, 1}, {1, -1}});
  const TildeTransform tt(spec);
  CHECK(tt.local(1.0, 0).Q(0, 0) == doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-15));
  CHECK(tt.local(1.0, 0).R(0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(tt.local(1.0, 0).B == Matrix{{0}});

  auto g = test::random_spec(8, 2, 1, 2);
  g.horizon = 0.5;
  g.generator = validate_generator(Matrix{{-2, 2}, {1, -1}});
  for (auto& r : g.regimes) r.G = CoefficientField::constant(Matrix::identity(2));
  const auto gt = TildeTransform(g).terminal(0);
  CHECK((gt.matrix() - std::exp(-1.0) * Matrix::identity(2)).max_abs() < 1e-15);
}

TEST_CASE("untilde inverts the transform") {
  const auto spec = scalar_spec(Scalar{.R = 1}, Matrix{{-1, 1}, {0.5, -0.5}});
  const Lattice lat(Backend::ode, 8, 1.0);
  RegimeField p(lat, 2, 1), lam(lat, 2, 1);
  for (std::size_t k = 0; k < lat.levels(); ++k)
    for (std::size_t i = 0; i < 2; ++i) {
      p.at(k, 0, i) = SymMatrix::scalar(1.0 + 0.1 * static_cast<double>(k) + static_cast<double>(i));
      lam.at(k, 0, i) = SymMatrix::scalar(0.01 * static_cast<double>(k));
    }
  const auto tilde = scale_by_tilde_factor(p, spec.generator, lat, 1.0);
  const auto back = untilde_solution(tilde, scale_by_tilde_factor(lam, spec.generator, lat, 1.0), spec.generator, lat);
  for (std::size_t k = 0; k < lat.levels(); ++k)
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(std::abs(back.P.at(k, 0, i)(0, 0) - p.at(k, 0, i)(0, 0)) < 1e-14);
      CHECK(std::abs(back.Lambda.at(k, 0, i)(0, 0) - lam.at(k, 0, i)(0, 0)) < 1e-14);
    }

  RegimeField end(lat, 2, 1);
  end.at(lat.steps(), 0, 0) = SymMatrix::scalar(std::exp(-1.0));
  const auto un = untilde_solution(end, RegimeField(lat, 2, 1), spec.generator, lat);
  CHECK(un.P.at(lat.steps(), 0, 0)(0, 0) == doctest::Approx(1.0).epsilon(1e-15));

  const auto ident = scale_by_tilde_factor(p, validate_generator(Matrix{{0, 0}, {0, 0}}), lat, 1.0);
  CHECK(ident.at(3, 0, 1)(0, 0) == p.at(3, 0, 1)(0, 0));
}

#include <doctest.h>

#include <cmath>

#include "regimelq/control.hpp"
#include "regimelq/error.hpp"
#include "support.hpp"

using namespace regimelq;
using test::Scalar;
using test::scalar_spec;

namespace {

SimulationOptions sim(std::uint64_t seed, double dt = 1e-3, Execution ex = Execution::parallel) {
  SimulationOptions o;
  o.seed = seed;
  o.dt = dt;
  o.execution = ex;
  return o;
}

ProblemSpec noisy() {
  auto s = test::e1(1.0);
  for (auto& r : s.regimes) r.C = test::cst(0.3);
  s.regimes[1].A = test::cst(0.2);
  return s;
}

}  // namespace

TEST_CASE("feedback gain") {
  const auto spec = test::e1();
  const auto sol = solve_esre(spec, EsreOptions{});
  const auto gain = feedback_gain(sol, spec);
  CHECK(gain.at(0, 0, 0)(0, 0) == doctest::Approx(-0.5).epsilon(1e-8));
  CHECK(gain.at(0, 0, 0) == gain.at(0, 0, 1));

  auto inert = test::random_spec(3, 2, 1, 2);
  for (auto& r : inert.regimes) {
    r.B = r.D = test::cst(Matrix(2, 1));
    r.S = test::cst(Matrix(1, 2));
  }
  const auto isol = solve_esre(inert, EsreOptions{});
  const auto ig = feedback_gain(isol, inert);
  for (std::size_t l = 0; l < isol.lattice.levels(); l += 100) CHECK(ig.at(l, 0, 1).is_zero());

  const auto zd = test::random_spec(12, 2, 2, 2, 0.0);
  const auto zsol = solve_esre(zd, EsreOptions{});
  const auto zg = feedback_gain(zsol, zd);
  for (std::size_t l = 0; l < zsol.lattice.levels(); l += 250)
    for (std::size_t i = 0; i < 2; ++i) {
      const auto c = zd.local(zsol.lattice.time(l), i);
      const Matrix formula = -1.0 * (sym_inverse(c.R).matrix() * (c.B.transpose() * zsol.P.at(l, 0, i).matrix() + c.S));
      CHECK((zg.at(l, 0, i) - formula).max_abs() <= 1e-14 * (1.0 + formula.max_abs()));
    }

  // Identical coefficients across regimes give identical gains. The switching
  // rates differ, so each regime takes its own Picard path; converge well past
  // the comparison tolerance.
  auto sym = test::random_spec(9, 2, 1, 2);
  sym.regimes[1] = sym.regimes[0];
  sym.generator = validate_generator(Matrix{{-1, 1}, {3, -3}});
  EsreOptions tight;
  tight.picard_tol = 1e-12;
  const auto ssol = solve_esre(sym, tight);
  const auto sg = feedback_gain(ssol, sym);
  for (std::size_t l = 0; l < ssol.lattice.levels(); l += 50) CHECK((sg.at(l, 0, 0) - sg.at(l, 0, 1)).max_abs() <= 1e-12);
}

TEST_CASE("value at the initial point") {
  EsreSolution sol;
  sol.lattice = Lattice(Backend::ode, 1, 1.0);
  sol.P = RegimeField(sol.lattice, 2, 2);
  const double d[] = {1.0, 2.0};
  sol.P.at(0, 0, 0) = SymMatrix::diagonal(d);
  CHECK(value_at(sol, {1, 1}, 0) == 3.0);
  CHECK(value_at(sol, {0, 0}, 0) == 0.0);
  const auto e1 = solve_esre(test::e1(), EsreOptions{});
  CHECK(value_at(e1, {2}, 1) == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("closed-loop paths") {
  const auto zero = scalar_spec(Scalar{.R = 1, .G = 0});
  const auto zsol = solve_esre(zero, EsreOptions{});
  const auto zg = feedback_gain(zsol, zero);
  const auto rec = simulate_closed_loop(zero, Policy{&zg, Perturbation()}, {1.5}, 0, sim(1, 0.01));
  CHECK(rec.total_cost == 0.0);
  for (const auto& x : rec.X) CHECK(x[0] == 1.5);

  const auto spec = noisy();
  const auto sol = solve_esre(spec, EsreOptions{});
  const auto gain = feedback_gain(sol, spec);
  const auto a = simulate_closed_loop(spec, Policy{&gain, Perturbation()}, {1.0}, 0, sim(5), 17);
  const auto b = simulate_closed_loop(spec, Policy{&gain, Perturbation()}, {1.0}, 0, sim(5), 17);
  CHECK(a.X == b.X);
  CHECK(a.regime == b.regime);
  CHECK(a.total_cost == b.total_cost);

  const auto decay = scalar_spec(Scalar{.A = -1, .R = 1});
  for (double dt : {0.01, 0.001}) {
    const auto r = simulate_closed_loop(decay, Policy{nullptr, Perturbation()}, {2.0}, 0, sim(1, dt));
    CHECK(std::abs(r.X.back()[0] - 2.0 * std::exp(-1.0)) <= 2.0 * dt);
  }

  // Linear scaling of the path in x0 under common noise.
  const auto scaled = simulate_closed_loop(spec, Policy{&gain, Perturbation()}, {3.0}, 0, sim(5), 17);
  for (std::size_t k = 0; k < a.X.size(); k += 50) CHECK(std::abs(scaled.X[k][0] - 3.0 * a.X[k][0]) <= 1e-9 * (1 + std::abs(scaled.X[k][0])));
  CHECK(value_at(sol, {3.0}, 0) == doctest::Approx(9.0 * value_at(sol, {1.0}, 0)).epsilon(1e-15));
}

TEST_CASE("Monte Carlo cost") {
  const auto spec = test::e1();
  const auto sol = solve_esre(spec, EsreOptions{});
  const auto gain = feedback_gain(sol, spec);
  const auto det = mc_cost(spec, Policy{&gain, Perturbation()}, {1.0}, 0, 2000, sim(42));
  CHECK(det.std_error <= 1e-10);
  CHECK(std::abs(det.mean - 0.5) <= std::max(3 * det.std_error, 0.01));

  const auto ns = noisy();
  const auto nsol = solve_esre(ns, EsreOptions{});
  const auto ng = feedback_gain(nsol, ns);
  const auto small = mc_cost(ns, Policy{&ng, Perturbation()}, {1.0}, 0, 4000, sim(8, 0.01));
  const auto large = mc_cost(ns, Policy{&ng, Perturbation()}, {1.0}, 0, 8000, sim(8, 0.01));
  const double ratio = small.std_error / large.std_error;
  CHECK(ratio >= 1.25);
  CHECK(ratio <= 1.6);

  const auto serial = mc_cost(ns, Policy{&ng, Perturbation()}, {1.0}, 0, 4000, sim(8, 0.01, Execution::serial));
  CHECK(serial.mean == small.mean);
  CHECK(serial.std_error == small.std_error);
  CHECK_THROWS_AS((void)mc_cost(ns, Policy{&ng, Perturbation()}, {1.0}, 0, 1, sim(8)), Error);
}

TEST_CASE("optimality gap") {
  const auto spec = test::e1();
  const auto sol = solve_esre(spec, EsreOptions{});
  const auto none = optimality_gap(spec, sol, Perturbation(), {1.0}, 0, 500, sim(3));
  CHECK(none.gap == 0.0);
  CHECK(none.std_error == 0.0);

  const auto half = optimality_gap(spec, sol, Perturbation::constant({0.5}), {1.0}, 0, 5000, sim(3));
  REQUIRE(half.theoretical.has_value());
  CHECK(*half.theoretical == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(std::abs(half.gap - 0.25) <= std::max(3 * half.std_error, 0.02));

  const auto ns = noisy();
  const auto nsol = solve_esre(ns, EsreOptions{});
  const double value = value_at(nsol, {1.0}, 0);
  const std::vector<Perturbation> family{Perturbation::constant({0.25}), Perturbation::constant({0.5}),
                                         Perturbation::linear({0.0}, {0.5})};
  const auto gaps = optimality_gaps(ns, nsol, family, {1.0}, 0, 20000, sim(4));
  for (const auto& g : gaps) {
    CHECK(g.gap > 3 * g.std_error);
    CHECK(g.perturbed.mean - value >= -3 * g.perturbed.std_error);
    REQUIRE(g.theoretical.has_value());
    CHECK(std::abs(g.gap - *g.theoretical) <= std::max(3 * g.std_error, 0.02));
  }
  const auto single = optimality_gap(ns, nsol, family[1], {1.0}, 0, 20000, sim(4));
  CHECK(single.gap == gaps[1].gap);
}

TEST_CASE("perturbation shapes") {
  std::vector<double> out(1);
  Perturbation::table({0.0, 0.5}, {{1.0}, {-1.0}}).eval(0.49, out);
  CHECK(out[0] == 1.0);
  Perturbation::table({0.0, 0.5}, {{1.0}, {-1.0}}).eval(0.5, out);
  CHECK(out[0] == -1.0);
  Perturbation::linear({1.0}, {2.0}).eval(0.25, out);
  CHECK(out[0] == 1.5);
  Perturbation().eval(0.3, out);
  CHECK(out[0] == 0.0);
  CHECK(Perturbation::constant({0.0}).is_zero());
}

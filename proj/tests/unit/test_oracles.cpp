#include "bdsde/oracles.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace bdsde;

namespace {

CoefficientSet heat(const std::string& l, const std::string& g = "0", const std::string& f = "0") {
  CoefficientExpressions e;
  e.drift = {"0"};
  e.diffusion = {"1"};
  e.driver = f;
  e.noise = {g};
  e.terminal = l;
  return coefficients_from_expressions(e);
}

PdeOptions options(double spacing, int steps, std::vector<double> times = {}) {
  PdeOptions o;
  o.space = space_grid_around(0.0, 1.0, 1.0, spacing, 8.0);
  o.n_time_steps = steps;
  o.output_times = std::move(times);
  return o;
}

}  // namespace

TEST_CASE("constant terminal stays constant") {
  const PdeResult r = pde_solve(heat("4"), 1.0, options(1.0 / 64, 50));
  for (double v : r.outputs.front().values) CHECK(v == doctest::Approx(4.0));
}

TEST_CASE("heat equation closed forms") {
  const PdeResult sq = pde_solve(heat("x^2"), 1.0, options(1.0 / 512, 400));
  CHECK(sq.outputs.front()(0.0) == doctest::Approx(1.0).epsilon(1e-4));
  const PdeResult sn = pde_solve(heat("sin(x)"), 1.0, options(1.0 / 512, 400));
  for (double x : {-1.0, 0.3, 1.2}) {
    CHECK(std::abs(sn.outputs.front()(x) - std::exp(-0.5) * std::sin(x)) <= 1e-4);
  }
}

TEST_CASE("intermediate outputs") {
  const PdeResult r = pde_solve(heat("x^2"), 1.0, options(1.0 / 256, 200, {0.25, 0.5, 1.0}));
  REQUIRE(r.outputs.size() == 3);
  CHECK(r.outputs[0](0.5) == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(r.outputs[1](0.0) == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("nonlinear driver against the scalar ODE") {
  // Constant data: u solves u' = -u pointwise.
  const PdeResult r = pde_solve(heat("1", "0", "-y"), 1.0, options(1.0 / 64, 400));
  CHECK(r.outputs.front()(0.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-5));
}

TEST_CASE("pde needs d = 1") {
  CoefficientExpressions e;
  e.dim = 2;
  e.drift = {"0", "0"};
  e.diffusion = {"1", "0", "0", "1"};
  e.noise = {"0", "0"};
  CHECK_THROWS_AS(pde_solve(coefficients_from_expressions(e), 1.0, options(1.0 / 64, 10)), UnsupportedError);
}

TEST_CASE("spde splitting") {
  std::vector<Vec> db(10, Vec::Zero(1));
  for (int q = 0; q < 10; ++q) db[static_cast<std::size_t>(q)](0) = 0.1 * std::sin(q + 1.0);
  SUBCASE("zero noise reproduces the pde") {
    const PdeOptions o = options(1.0 / 128, 100);
    const PdeResult a = pde_solve(heat("sin(x)"), 1.0, o);
    const PdeResult b = spde_solve_pathwise(heat("sin(x)"), 1.0, o, db);
    CHECK(a.outputs.front().values == b.outputs.front().values);
  }
  SUBCASE("constant noise shifts by the B-path") {
    double total = 0.0;
    for (const Vec& v : db) total += v(0);
    const PdeResult r = spde_solve_pathwise(heat("x", "0.3"), 1.0, options(1.0 / 128, 100), db);
    for (double x : {-0.5, 0.0, 0.7}) CHECK(r.outputs.front()(x) == doctest::Approx(x + 0.3 * total).epsilon(1e-10));
  }
  SUBCASE("steps must divide") {
    CHECK_THROWS_AS(spde_solve_pathwise(heat("x", "0.3"), 1.0, options(1.0 / 128, 95), db), ValidationError);
  }
}

TEST_CASE("finite difference gradient") {
  const auto quad = [](const Vec& x) { return x(0) * x(0); };
  CHECK(fd_gradient(quad, Vec::Constant(1, 1.0), 1e-3)(0) == doctest::Approx(2.0).epsilon(1e-6));
  const auto constant = [](const Vec&) { return 3.0; };
  CHECK(fd_gradient(constant, Vec::Constant(1, 1.0), 1e-3)(0) == 0.0);
  const PdeResult r = pde_solve(heat("x^2"), 1.0, options(1.0 / 256, 200));
  CHECK(fd_gradient(r.outputs.front(), 1.0, 1.0 / 256) == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("tree") {
  SUBCASE("linear terminal has unit Z") {
    ProblemSpec s = testing::unit_problem("x", 0.0, 5, 32);
    s.noise_mode = NoiseMode::kRademacher;
    const TreeResult t = tree_enumerate(s, 0);
    for (const auto& level : t.z)
      for (const RowVec& z : level) CHECK(z(0) == doctest::Approx(1.0));
  }
  SUBCASE("quadratic is exact") {
    ProblemSpec s = testing::unit_problem("x^2", 0.0, 4, 16);
    s.noise_mode = NoiseMode::kRademacher;
    CHECK(tree_enumerate(s, 0).u == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("jump target for the product terminal") {
    ProblemSpec s = testing::partition_problem("x0*x1", 1.0, 4, 16);
    s.noise_mode = NoiseMode::kRademacher;
    const TreeResult t = tree_enumerate(s, 0);
    REQUIRE(t.delta_z.size() == 1);
    CHECK(t.delta_z[0](0) == doctest::Approx(1.0));
  }
  SUBCASE("rejects gaussian noise and deep trees") {
    ProblemSpec s = testing::unit_problem("x", 0.0, 4, 16);
    CHECK_THROWS(tree_enumerate(s, 0));
    s.noise_mode = NoiseMode::kRademacher;
    s.grid = make_grid(1.0, 9);
    CHECK_THROWS(tree_enumerate(s, 0));
  }
}

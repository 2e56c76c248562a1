#include "bdsde/bdsde_solver.hpp"
#include "bdsde/oracles.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace bdsde;

namespace {

BackwardSolution solve(const ProblemSpec& s, PathEnsemble* keep = nullptr) {
  const CoefficientSet c = effective_coefficients(s);
  PathEnsemble ens = simulate_ensemble(s, c, 0, true);
  BackwardSolution sol = solve_bdsde(s, c, ens);
  if (keep) *keep = std::move(ens);
  return sol;
}

}  // namespace

TEST_CASE("linear terminal is a martingale") {
  ProblemSpec s = testing::unit_problem("x", 0.4, 20, 5000);
  PathEnsemble ens;
  const BackwardSolution sol = solve(s, &ens);
  for (int k = 0; k <= 20; k += 5) {
    double zm = 0.0;
    for (int p = 0; p < sol.n_paths; ++p) {
      if (p < 50) CHECK(std::abs(sol.y_at(k, p) - ens.x(k, p)[0]) <= 0.05);
      zm += sol.z_at(k, p)(0);
    }
    zm /= sol.n_paths;
    const double se = k < 20 ? sol.z_mean_se[static_cast<std::size_t>(k)] : 0.0;
    CHECK(std::abs(zm - 1.0) <= 3.0 * se + 1e-9);
  }
  CHECK(std::abs(sol.u_value - 0.4) <= 3.0 * sol.std_error);

  // Exact conditional expectations leave no regression error.
  ProblemSpec e = testing::unit_problem("x", 0.4, 8, 256);
  e.noise_mode = NoiseMode::kEnumerate;
  const BackwardSolution ex = solve(e, &ens);
  for (int k = 0; k <= 8; ++k) {
    for (int p = 0; p < 256; ++p) {
      CHECK(ex.y_at(k, p) == doctest::Approx(ens.x(k, p)[0]).epsilon(1e-12));
      CHECK(ex.z_at(k, p)(0) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  CHECK(ex.u_value == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("constant terminal") {
  ProblemSpec s = testing::unit_problem("7", 0.0, 10, 1000);
  const BackwardSolution sol = solve(s);
  for (double y : sol.y) CHECK(y == doctest::Approx(7.0).epsilon(1e-12));
  for (double z : sol.z) CHECK(std::abs(z) <= 1e-12);
  CHECK(sol.u_value == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("constant noise coefficient shifts by the frozen B-path") {
  ProblemSpec s = testing::unit_problem("x", 0.2, 8, 256, "0", "0.3");
  s.noise_mode = NoiseMode::kEnumerate;
  double b_total = 0.0;
  for (const Vec& db : sample_b_increments(s, 0)) b_total += db(0);
  const BackwardSolution sol = solve(s);
  CHECK(sol.u_value == doctest::Approx(0.2 + 0.3 * b_total).epsilon(1e-12));
  CHECK(tree_enumerate(s, 0, {.gradient = false, .jumps = false}).u == doctest::Approx(sol.u_value).epsilon(1e-12));

  s.noise_mode = NoiseMode::kGaussian;
  s.n_inner_paths = 20000;
  b_total = 0.0;
  for (const Vec& db : sample_b_increments(s, 0)) b_total += db(0);
  const BackwardSolution g = solve(s);
  CHECK(std::abs(g.u_value - (0.2 + 0.3 * b_total)) <= 3.0 * g.std_error);
}

TEST_CASE("heat semigroup value") {
  ProblemSpec s = testing::unit_problem("x^2", 0.0, 50, 20000);
  const BackwardSolution sol = solve(s);
  CHECK(std::abs(sol.u_value - 1.0) <= 3.0 * sol.std_error);
  CHECK(sol.diagnostics.size() == 50);
}

TEST_CASE("driver-only decay against the scalar ODE") {
  const int n = 100;
  ProblemSpec s = testing::unit_problem("1", 0.0, n, 100, "-y");
  const BackwardSolution sol = solve(s);
  // y' = -y backwards from 1 over the unit horizon.
  const double exact = std::exp(-1.0);
  CHECK(std::abs(sol.u_value - exact) <= 1.0 / n);
  CHECK(sol.u_value == doctest::Approx(std::pow(1.0 - 1.0 / n, n)).epsilon(1e-12));
}

TEST_CASE("picard sweeps converge to the implicit driver") {
  const int n = 20;
  ProblemSpec s = testing::unit_problem("1", 0.0, n, 100, "-y");
  s.picard_iterations = 60;
  const BackwardSolution sol = solve(s);
  CHECK(sol.u_value == doctest::Approx(std::pow(1.0 / (1.0 + 1.0 / n), n)).epsilon(1e-10));
}

TEST_CASE("solver matches the tree under enumeration") {
  ProblemSpec s = testing::unit_problem("sin(x) + 0.3*x^2", 0.2, 6, 64, "sin(y) + 0.5*z", "0.2*cos(y)");
  s.noise_mode = NoiseMode::kEnumerate;
  for (int picard : {0, 3}) {
    s.picard_iterations = picard;
    PathEnsemble ens;
    const BackwardSolution sol = solve(s, &ens);
    const TreeResult tree = tree_enumerate(s, 0, {.gradient = false, .jumps = false});
    CHECK(sol.u_value == doctest::Approx(tree.u).epsilon(1e-12));
    for (int k = 0; k <= 6; ++k) {
      for (int p = 0; p < 64; ++p) {
        const int q = p & ((1 << k) - 1);
        CHECK(std::abs(sol.y_at(k, p) - tree.y[k][q]) <= 1e-12);
        CHECK(std::abs(sol.z_at(k, p)(0) - tree.z[k][q](0)) <= 1e-12);
      }
    }
  }
}

TEST_CASE("rademacher tree is exact for the quadratic") {
  ProblemSpec s = testing::unit_problem("x^2", 0.0, 4, 16);
  s.noise_mode = NoiseMode::kEnumerate;
  CHECK(tree_enumerate(s, 0).u == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(solve(s).u_value == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("singular regression design is reported with the step") {
  ProblemSpec s = testing::unit_problem("x^2", 0.0, 4, 64);
  s.noise_mode = NoiseMode::kRademacher;
  try {
    solve(s);
    FAIL("expected a solver error");
  } catch (const SolverError& e) {
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("variational gradient") {
  ProblemSpec s = testing::unit_problem("x^2", 1.0, 50, 20000);
  const CoefficientSet c = effective_coefficients(s);
  const PathEnsemble ens = simulate_ensemble(s, c, 0, true);
  const BackwardSolution base = solve_bdsde(s, c, ens);
  const VariationalSolution v = solve_variational(s, c, ens, base);
  CHECK(std::abs(v.grad_u_value(0) - 2.0) <= 3.0 * v.std_error(0));

  ProblemSpec lin = testing::unit_problem("3*x", 0.5, 20, 1000, "0", "0", "-x", "1");
  const PathEnsemble le = simulate_ensemble(lin, lin.coefficients, 0, true);
  const BackwardSolution lb = solve_bdsde(lin, lin.coefficients, le);
  const VariationalSolution lv = solve_variational(lin, lin.coefficients, le, lb);
  CHECK(lv.grad_u_value(0) == doctest::Approx(3.0 * std::pow(1.0 - 1.0 / 20, 20)).epsilon(1e-12));
}

TEST_CASE("variational gradient needs partials") {
  ProblemSpec s = testing::unit_problem("x^2", 1.0, 10, 100);
  s.coefficients.driver_partials = nullptr;
  const PathEnsemble ens = simulate_ensemble(s, s.coefficients, 0, true);
  const BackwardSolution base = solve_bdsde(s, s.coefficients, ens);
  try {
    solve_variational(s, s.coefficients, ens, base);
    FAIL("expected a configuration error");
  } catch (const ConfigurationError& e) {
    CHECK(std::string(e.what()).find("mollify") != std::string::npos);
  }
}

TEST_CASE("variational gradient matches the tree bump under enumeration") {
  ProblemSpec s = testing::unit_problem("sin(x)", 0.5, 8, 256, "sin(y)", "0.2*cos(y)");
  s.noise_mode = NoiseMode::kEnumerate;
  const CoefficientSet c = effective_coefficients(s);
  const PathEnsemble ens = simulate_ensemble(s, c, 0, true);
  const BackwardSolution base = solve_bdsde(s, c, ens);
  const VariationalSolution v = solve_variational(s, c, ens, base);
  const TreeResult tree = tree_enumerate(s, 0, {.gradient = true, .jumps = false});
  CHECK(v.grad_u_value(0) == doctest::Approx(tree.grad_u(0)).epsilon(1e-6));
}

TEST_CASE("jumps") {
  SUBCASE("no dependence on the interior node") {
    ProblemSpec s = testing::partition_problem("x0", 1.0, 10, 4000);
    PathEnsemble ens;
    const BackwardSolution base = solve(s, &ens);
    const JumpSolution js = solve_jump_system(s, s.coefficients, ens, base);
    REQUIRE(js.jumps.size() == 1);
    CHECK(js.jumps[0].time == doctest::Approx(0.5));
    CHECK(std::abs(js.jumps[0].delta_z_mean(0)) <= 1e-12);
  }
  SUBCASE("interior node against the tree") {
    for (const char* l : {"x1", "x0*x1", "sin(x1) + x0*x1"}) {
      ProblemSpec s = testing::partition_problem(l, 1.0, 6, 64);
      s.noise_mode = NoiseMode::kEnumerate;
      PathEnsemble ens;
      const BackwardSolution base = solve(s, &ens);
      const JumpSolution js = solve_jump_system(s, s.coefficients, ens, base);
      const TreeResult tree = tree_enumerate(s, 0, {.gradient = false, .jumps = true});
      REQUIRE(tree.delta_z.size() == 1);
      CHECK(js.jumps[0].delta_z_mean(0) == doctest::Approx(tree.delta_z[0](0)).epsilon(1e-12));
    }
  }
  SUBCASE("needs a partition") {
    ProblemSpec s = testing::unit_problem("x", 1.0, 10, 100);
    PathEnsemble ens;
    const BackwardSolution base = solve(s, &ens);
    CHECK_THROWS_AS(solve_jump_system(s, s.coefficients, ens, base), ConfigurationError);
  }
}

TEST_CASE("regression Z increments shrink with delta") {
  double inc[2];
  int q = 0;
  for (int n : {10, 20}) {
    ProblemSpec s = testing::unit_problem("sin(x)", 0.0, n, 20000);
    s.noise_master_steps = 20;
    const BackwardSolution sol = solve(s);
    double worst = 0.0;
    for (int k = 0; k + 1 < n; ++k) {
      double m0 = 0.0, m1 = 0.0;
      for (int p = 0; p < sol.n_paths; ++p) {
        m0 += sol.z_at(k, p)(0);
        m1 += sol.z_at(k + 1, p)(0);
      }
      worst = std::max(worst, std::abs(m1 - m0) / sol.n_paths);
    }
    inc[q++] = worst;
  }
  CHECK(inc[1] < inc[0]);
}

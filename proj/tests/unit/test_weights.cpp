#include "bdsde/oracles.hpp"
#include "bdsde/weights.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace bdsde;

namespace {

struct Bundle {
  CoefficientSet c;
  PathEnsemble ens;
  BackwardSolution base;
};

Bundle prepare(const ProblemSpec& s) {
  Bundle b;
  b.c = effective_coefficients(s);
  b.ens = simulate_ensemble(s, b.c, 0, true);
  b.base = solve_bdsde(s, b.c, b.ens);
  return b;
}

}  // namespace

TEST_CASE("unit case weights reduce to W increments") {
  ProblemSpec s = testing::unit_problem("x", 0.0, 10, 4);
  const NoisePath noise = sample_noise(s, 0, 1);
  const ForwardBundle fb = simulate_forward(s, noise);
  const WeightProcess wp = compute_weights(s, fb, noise, {{0, 10}, {3, 7}});
  double total = 0.0, mid = 0.0;
  for (int k = 0; k < 10; ++k) total += noise.w_increments[static_cast<std::size_t>(k)](0);
  // Paper nodes 3..7 are simulation steps 3..6.
  for (int k = 3; k < 7; ++k) mid += noise.w_increments[static_cast<std::size_t>(k)](0);
  CHECK(wp.m_values[0](0) == doctest::Approx(total));
  CHECK(wp.n_values[0](0) == doctest::Approx(total / 1.0));
  CHECK(wp.m_values[1](0) == doctest::Approx(mid));
  CHECK(wp.n_values[1](0) == doctest::Approx(mid / 0.4));
}

TEST_CASE("zero W-path gives zero weights") {
  ProblemSpec s = testing::unit_problem("x", 0.0, 5, 4);
  NoisePath noise = sample_noise(s, 0, 0);
  for (auto& w : noise.w_increments) w.setZero();
  const ForwardBundle fb = simulate_forward(s, noise);
  const WeightProcess wp = compute_weights(s, fb, noise, {{1, 4}});
  CHECK(wp.m_values[0](0) == 0.0);
  CHECK(wp.n_values[0](0) == 0.0);
}

TEST_CASE("weight pairs must be ordered") {
  ProblemSpec s = testing::unit_problem("x", 0.0, 5, 4);
  const NoisePath noise = sample_noise(s, 0, 0);
  const ForwardBundle fb = simulate_forward(s, noise);
  CHECK_THROWS_AS(compute_weights(s, fb, noise, {{2, 2}}), ValidationError);
  CHECK_THROWS_AS(compute_weights(s, fb, noise, {{3, 2}}), ValidationError);
}

TEST_CASE("singular diffusion is reported by the weights") {
  ProblemSpec s = testing::unit_problem("x", 0.0, 5, 4, "0", "0", "0", "0");
  const NoisePath noise = sample_noise(s, 0, 0);
  const ForwardBundle fb = simulate_forward(s, noise);
  try {
    compute_weights(s, fb, noise, {{0, 5}});
    FAIL("expected a simulation error");
  } catch (const SimulationError& e) {
    CHECK(std::string(e.what()).find("node") != std::string::npos);
  }
}

TEST_CASE("second moment of M follows the tangent quadrature") {
  // b = -x: grad X is deterministic, so E|M|^2 = sum over steps of (grad X_k)^2 delta.
  const int n = 20;
  ProblemSpec s = testing::unit_problem("x", 0.0, n, 40000, "0", "0", "-x", "1");
  double expected = 0.0;
  for (int k = 0; k < n; ++k) expected += std::pow(1.0 - 1.0 / n, 2 * k) / n;
  double m = 0.0, m2 = 0.0;
  for (int p = 0; p < s.n_inner_paths; ++p) {
    const NoisePath noise = sample_noise(s, 0, p);
    const ForwardBundle fb = simulate_forward(s, noise);
    const double v = compute_weights(s, fb, noise, {{0, n}}).m_values[0].squaredNorm();
    m += v;
    m2 += v * v;
  }
  m /= s.n_inner_paths;
  const double se = std::sqrt((m2 / s.n_inner_paths - m * m) / s.n_inner_paths);
  CHECK(std::abs(m - expected) <= 3.0 * se);
}

TEST_CASE("gradient weights") {
  SUBCASE("constant terminal") {
    ProblemSpec s = testing::unit_problem("2.5", 0.3, 20, 20000);
    Bundle b = prepare(s);
    const WeightEstimate w = estimate_grad_u_weights(s, b.c, b.ens, b.base);
    CHECK(std::abs(w.value(0)) <= 3.0 * w.std_error(0));
  }
  SUBCASE("linear terminal") {
    ProblemSpec s = testing::unit_problem("x", 0.3, 20, 20000);
    Bundle b = prepare(s);
    const WeightEstimate w = estimate_grad_u_weights(s, b.c, b.ens, b.base);
    CHECK(std::abs(w.value(0) - 1.0) <= 3.0 * w.std_error(0));
  }
  SUBCASE("quadratic terminal against the likelihood-ratio identity") {
    ProblemSpec s = testing::unit_problem("x^2", 1.0, 50, 40000);
    Bundle b = prepare(s);
    const WeightEstimate w = estimate_grad_u_weights(s, b.c, b.ens, b.base);
    // d/dx E (x + W)^2 = E[(x + W)^2 W] / t = 2x.
    CHECK(std::abs(w.value(0) - 2.0) <= 3.0 * w.std_error(0));
  }
}

TEST_CASE("Z weights") {
  SUBCASE("linear terminal") {
    ProblemSpec s = testing::unit_problem("x", 0.0, 20, 20000);
    Bundle b = prepare(s);
    for (int j : {5, 10, 15, 20}) {
      const WeightEstimate w = estimate_z_weights(s, b.c, b.ens, b.base, j);
      CHECK(std::abs(w.value(0) - 1.0) <= 3.0 * w.std_error(0));
    }
    CHECK_THROWS_AS(estimate_z_weights(s, b.c, b.ens, b.base, 0), ValidationError);
  }
  SUBCASE("quadratic terminal at mid horizon") {
    ProblemSpec s = testing::unit_problem("x^2", 1.0, 20, 40000);
    Bundle b = prepare(s);
    const WeightEstimate w = estimate_z_weights(s, b.c, b.ens, b.base, 10);
    const int a = 10;
    double oracle = 0.0;
    for (int p = 0; p < b.ens.n_paths(); ++p) oracle += 2.0 * b.ens.x(a, p)[0];
    oracle /= b.ens.n_paths();
    CHECK(std::abs(w.value(0) - oracle) <= 0.05 * std::abs(oracle) + 3.0 * w.std_error(0));
  }
  SUBCASE("nonlinear example against regression Z") {
    ProblemSpec s = testing::unit_problem("sin(x)", 0.5, 20, 40000, "sin(y)", "0.2*cos(y)");
    Bundle b = prepare(s);
    for (int j : {5, 15}) {
      const int a = 20 - j;
      const WeightEstimate w = estimate_z_weights(s, b.c, b.ens, b.base, j);
      double reg = 0.0;
      for (int p = 0; p < b.ens.n_paths(); ++p) reg += b.base.z_at(a, p)(0);
      reg /= b.ens.n_paths();
      const double se = std::hypot(w.std_error(0), b.base.z_mean_se[static_cast<std::size_t>(a)]);
      CHECK(std::abs(w.value(0) - reg) <= 0.05 * std::abs(reg) + 3.0 * se);
    }
  }
}

TEST_CASE("discrete Z") {
  SUBCASE("trivial partition is the plain estimator") {
    ProblemSpec s = testing::unit_problem("x^2", 1.0, 10, 5000);
    const double times[] = {0.0, 1.0};
    s.partition = Partition::from_times(s.grid, times);
    Bundle b = prepare(s);
    const WeightEstimate d = estimate_z_discrete(s, b.c, b.ens, b.base, 4);
    const WeightEstimate w = estimate_z_weights(s, b.c, b.ens, b.base, 4);
    CHECK(d.value(0) == w.value(0));
    CHECK(d.std_error(0) == w.std_error(0));
  }
  SUBCASE("dependence on the later node only") {
    ProblemSpec s = testing::partition_problem("x1", 0.5, 20, 20000);
    Bundle b = prepare(s);
    const WeightEstimate w = estimate_z_discrete(s, b.c, b.ens, b.base, 15);
    CHECK(std::abs(w.value(0) - 1.0) <= 3.0 * w.std_error(0) + 1e-9);
    CHECK_THROWS_AS(estimate_z_discrete(s, b.c, b.ens, b.base, 10), ValidationError);
  }
  SUBCASE("one-sided limits around the interior node") {
    ProblemSpec s = testing::partition_problem("x0*x1", 1.0, 20, 40000);
    Bundle b = prepare(s);
    const JumpSolution js = solve_jump_system(s, b.c, b.ens, b.base);
    const WeightEstimate lo = estimate_z_discrete(s, b.c, b.ens, b.base, 9);
    const WeightEstimate hi = estimate_z_discrete(s, b.c, b.ens, b.base, 11);
    const double jump = hi.value(0) - lo.value(0);
    const double se = std::hypot(hi.std_error(0), lo.std_error(0));
    const double target = js.jumps[0].delta_z_mean(0);
    CHECK(std::abs(jump - target) <= 0.05 * std::abs(target) + 3.0 * se);
  }
}

TEST_CASE("malliavin derivative indicator") {
  ProblemSpec s = testing::unit_problem("x", 0.0, 6, 4);
  const ForwardBundle fb = simulate_forward(s, sample_noise(s, 0, 0));
  CHECK(malliavin_derivative(fb, 4, 2).dx(0, 0) == 0.0);
  CHECK(malliavin_derivative(fb, 3, 3).dx(0, 0) == 1.0);
  CHECK(malliavin_derivative(fb, 1, 5).dx(0, 0) == doctest::Approx(1.0));

  ProblemSpec lin = testing::unit_problem("x", 0.0, 6, 4, "0", "0", "-x", "1");
  const ForwardBundle lb = simulate_forward(lin, sample_noise(lin, 0, 0));
  CHECK(malliavin_derivative(lb, 1, 5).dx(0, 0) == doctest::Approx(std::pow(1.0 - 1.0 / 6, 4)));
}

TEST_CASE("weight gradient approaches the tree gradient") {
  double gap[2];
  int q = 0;
  for (int n : {4, 8}) {
    ProblemSpec s = testing::unit_problem("sin(x)", 0.5, n, 1 << n, "0.5*sin(y)");
    s.noise_mode = NoiseMode::kEnumerate;
    Bundle b = prepare(s);
    const WeightEstimate w = estimate_grad_u_weights(s, b.c, b.ens, b.base);
    gap[q++] = std::abs(w.value(0) - tree_enumerate(s, 0).grad_u(0));
  }
  CHECK(gap[1] < 0.65 * gap[0]);
}

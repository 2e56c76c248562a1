#include "bdsde/forward.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace bdsde;

TEST_CASE("no dynamics keeps the start point") {
  ProblemSpec s = testing::unit_problem("x", 1.5, 10, 4, "0", "0", "0", "0");
  const ForwardBundle fb = simulate_forward(s, sample_noise(s, 0, 0));
  for (std::size_t k = 0; k < fb.x_path.size(); ++k) {
    CHECK(fb.x_path[k](0) == 1.5);
    CHECK(fb.grad_x_path[k](0, 0) == 1.0);
  }
  CHECK(fb.singular_node == 0);
  CHECK_THROWS_AS(require_invertible_sigma(fb), SimulationError);
}

TEST_CASE("constant drift is integrated exactly") {
  ProblemSpec s = testing::unit_problem("x", 0.0, 8, 4, "0", "0", "1", "0");
  const ForwardBundle fb = simulate_forward(s, sample_noise(s, 0, 3));
  for (int k = 0; k <= 8; ++k) {
    const double paper = s.grid.paper_time(k);
    CHECK(fb.x_path[static_cast<std::size_t>(k)](0) == doctest::Approx(1.0 - paper));
  }
}

TEST_CASE("brownian moments at the end of the path") {
  ProblemSpec s = testing::unit_problem("x", 0.0, 20, 100000);
  const PathEnsemble ens = simulate_ensemble(s, s.coefficients, 0, false);
  double m = 0.0, v = 0.0;
  for (int p = 0; p < ens.n_paths(); ++p) m += ens.x(20, p)[0];
  m /= ens.n_paths();
  for (int p = 0; p < ens.n_paths(); ++p) v += std::pow(ens.x(20, p)[0] - m, 2);
  v /= ens.n_paths() - 1;
  CHECK(std::abs(m) <= 3.0 * std::sqrt(1.0 / 1e5));
  CHECK(v == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("ensemble matches single-path simulation") {
  ProblemSpec s = testing::unit_problem("x", 0.3, 6, 10, "0", "0", "-x", "1 + 0.2*sin(x)");
  const PathEnsemble ens = simulate_ensemble(s, s.coefficients, 0, true);
  for (int p = 0; p < 10; ++p) {
    const ForwardBundle fb = simulate_forward(s, sample_noise(s, 0, p));
    for (int k = 0; k <= 6; ++k) {
      CHECK(ens.x(k, p)[0] == fb.x_path[static_cast<std::size_t>(k)](0));
      CHECK(ens.grad(k, p)[0] == fb.grad_x_path[static_cast<std::size_t>(k)](0, 0));
    }
  }
}

TEST_CASE("ensemble does not depend on the thread count") {
  ProblemSpec s = testing::unit_problem("x", 0.3, 5, 9000, "0", "0", "-x", "1");
  const PathEnsemble a = simulate_ensemble(s, s.coefficients, 0, true);
  s.threads = 3;
  const PathEnsemble b = simulate_ensemble(s, s.coefficients, 0, true);
  for (int p = 0; p < 9000; p += 97) CHECK(a.x(5, p)[0] == b.x(5, p)[0]);
}

TEST_CASE("tangent of a linear drift is the Euler product") {
  const int n = 16;
  ProblemSpec s = testing::unit_problem("x", 0.7, n, 4, "0", "0", "-x", "1");
  const ForwardBundle fb = simulate_forward(s, sample_noise(s, 0, 1));
  const double delta = 1.0 / n;
  for (int k = 0; k <= n; ++k) {
    CHECK(fb.grad_x_path[static_cast<std::size_t>(k)](0, 0) == doctest::Approx(std::pow(1.0 - delta, k)).epsilon(1e-14));
  }
  const TangentReport r = tangent_consistency_check(fb);
  CHECK(r.max_product_deviation <= 1e-12);
  CHECK(r.min_sigma_singular_value >= 1.0 - 1e-12);
}

TEST_CASE("multiplicative noise tangent matches a bumped path") {
  ProblemSpec s = testing::unit_problem("x", 0.4, 10, 4, "0", "0", "sin(x)", "1 + 0.3*cos(x)");
  const NoisePath noise = sample_noise(s, 0, 2);
  const ForwardBundle fb = simulate_forward(s, noise);
  const double h = 1e-6;
  ProblemSpec up = s, dn = s;
  up.x(0) += h;
  dn.x(0) -= h;
  const ForwardBundle a = simulate_forward(up, noise);
  const ForwardBundle b = simulate_forward(dn, noise);
  const double fd = (a.x_path.back()(0) - b.x_path.back()(0)) / (2 * h);
  CHECK(fb.grad_x_path.back()(0, 0) == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("path dump header") {
  ProblemSpec s = testing::unit_problem("x", 0.0, 2, 2);
  std::ostringstream os;
  write_path_dump(os, s, simulate_forward(s, sample_noise(s, 0, 0)));
  CHECK(os.str().rfind("time,x1,g11\n", 0) == 0);
}

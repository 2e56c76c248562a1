#include "bdsde/coefficients.hpp"
#include "bdsde/grid.hpp"
#include "bdsde/problem.hpp"
#include "bdsde/rng.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace bdsde;

TEST_CASE("grid nodes") {
  const TimeGrid g = make_grid(1.0, 4);
  REQUIRE(g.nodes().size() == 5);
  for (int k = 0; k <= 4; ++k) CHECK(g.node(k) == doctest::Approx(0.25 * k));
  CHECK(g.paper_time(0) == 1.0);
  CHECK(g.paper_time(4) == 0.0);

  const TimeGrid one = make_grid(2.0, 1);
  CHECK(one.delta() == 2.0);
  CHECK(one.node(1) == 2.0);

  CHECK_THROWS_AS(make_grid(1.0, 0), ValidationError);
  CHECK_THROWS_AS(make_grid(-1.0, 4), ValidationError);
}

TEST_CASE("partition must sit on grid nodes") {
  const TimeGrid g = make_grid(1.0, 10);
  const double ok[] = {0.0, 0.5, 1.0};
  const Partition p = Partition::from_times(g, ok);
  CHECK(p.n_intervals() == 2);
  CHECK(p.is_node(5));
  CHECK(p.interval_containing(3) == 1);
  CHECK(p.interval_containing(7) == 2);
  const double bad[] = {0.0, 0.55, 1.0};
  CHECK_THROWS_AS(Partition::from_times(g, bad), ValidationError);
}

TEST_CASE("philox known answer") {
  // Reference vectors of the Random123 distribution.
  const auto zero = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
  CHECK(zero == Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  const auto ones = Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  CHECK(ones == Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
}

TEST_CASE("noise keying") {
  ProblemSpec s = testing::unit_problem("x", 0.0, 8, 4);
  s.n_outer_paths = 2;
  const NoisePath a = sample_noise(s, 0, 0);
  const NoisePath b = sample_noise(s, 0, 0);
  const NoisePath c = sample_noise(s, 0, 1);
  for (int k = 0; k < 8; ++k) {
    CHECK(a.w_increments[k](0) == b.w_increments[k](0));
    CHECK(a.b_increments[k](0) == c.b_increments[k](0));
  }
  bool differs = false;
  for (int k = 0; k < 8; ++k) differs = differs || a.w_increments[k](0) != c.w_increments[k](0);
  CHECK(differs);
  const NoisePath other = sample_noise(s, 1, 0);
  CHECK(other.b_increments[0](0) != a.b_increments[0](0));
  CHECK_THROWS_AS(sample_noise(s, 0, 4), ValidationError);
}

TEST_CASE("rademacher increments") {
  ProblemSpec s = testing::unit_problem("x", 0.0, 4, 16);
  s.noise_mode = NoiseMode::kRademacher;
  for (int p = 0; p < 16; ++p) {
    const NoisePath n = sample_noise(s, 0, p);
    for (int k = 0; k < 4; ++k) {
      CHECK(std::abs(n.w_increments[k](0)) == 0.5);
      CHECK(std::abs(n.b_increments[k](0)) == 0.5);
    }
  }
}

TEST_CASE("enumerate mode covers every sign pattern") {
  ProblemSpec s = testing::unit_problem("x", 0.0, 3, 8);
  s.noise_mode = NoiseMode::kEnumerate;
  s.validate();
  std::vector<int> seen(8, 0);
  for (int p = 0; p < 8; ++p) {
    const NoisePath n = sample_noise(s, 0, p);
    int code = 0;
    for (int k = 0; k < 3; ++k) code |= (n.w_increments[k](0) > 0 ? 1 : 0) << k;
    ++seen[code];
  }
  for (int v : seen) CHECK(v == 1);
  s.n_inner_paths = 7;
  CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("master grid gives matching block sums") {
  ProblemSpec coarse = testing::unit_problem("x", 0.0, 4, 4);
  ProblemSpec fine = testing::unit_problem("x", 0.0, 8, 4);
  coarse.noise_master_steps = 8;
  fine.noise_master_steps = 8;
  const NoisePath a = sample_noise(coarse, 0, 2);
  const NoisePath b = sample_noise(fine, 0, 2);
  for (int k = 0; k < 4; ++k) {
    CHECK(a.w_increments[k](0) == doctest::Approx(b.w_increments[2 * k](0) + b.w_increments[2 * k + 1](0)));
    CHECK(a.b_increments[k](0) == doctest::Approx(b.b_increments[2 * k](0) + b.b_increments[2 * k + 1](0)));
  }
}

TEST_CASE("gaussian increments have the right moments") {
  ProblemSpec s = testing::unit_problem("x", 0.0, 4, 20000);
  double m = 0.0, v = 0.0;
  const int n = 20000;
  for (int p = 0; p < n; ++p) {
    const double w = w_increment(s, 0, p, 1, 0);
    m += w;
    v += w * w;
  }
  m /= n;
  v /= n;
  CHECK(std::abs(m) < 4.0 * std::sqrt(0.25 / n));
  CHECK(v == doctest::Approx(0.25).epsilon(0.04));
}

TEST_CASE("expressions and symbolic partials") {
  const std::vector<std::string> vars{"x", "y"};
  const Expression e = Expression::parse("sin(x) * y^2 + exp(-x) - pi", vars);
  const double at[] = {0.3, 1.7};
  CHECK(e.eval(at) == doctest::Approx(std::sin(0.3) * 1.7 * 1.7 + std::exp(-0.3) - std::numbers::pi));
  CHECK(e.derivative(0).eval(at) == doctest::Approx(std::cos(0.3) * 1.7 * 1.7 - std::exp(-0.3)));
  CHECK(e.derivative(1).eval(at) == doctest::Approx(2.0 * std::sin(0.3) * 1.7));
  CHECK(Expression::parse("2 * 3 + 1", vars).is_constant());
  CHECK_THROWS_AS(Expression::parse("sin(q)", vars), ConfigurationError);
  CHECK_THROWS_AS(Expression::parse("(x + 1", vars), ConfigurationError);
}

TEST_CASE("coefficient partials match finite differences") {
  CoefficientExpressions ex;
  ex.dim = 2;
  ex.drift = {"-x1 + 0.1*x2", "sin(x1)"};
  ex.diffusion = {"1 + 0.1*cos(x1)", "0.2", "0", "1"};
  ex.driver = "sin(y) + 0.1*z1*z2 + x1";
  ex.noise = {"0.2*cos(y)", "0.1*x2"};
  ex.terminal = "x1^2 + sin(x2)";
  ex.ellipticity_c = 0.5;
  const CoefficientSet c = coefficients_from_expressions(ex);
  const CoefficientReport r = check_coefficients(c);
  CHECK(r.partials_ok);
  CHECK(r.partials_checked > 0);
  CHECK(r.ellipticity_ok);
}

TEST_CASE("coefficient report flags violated ellipticity") {
  CoefficientExpressions ex;
  ex.drift = {"0"};
  ex.diffusion = {"0.5"};
  ex.noise = {"0"};
  ex.ellipticity_c = 1.0;
  const CoefficientReport r = check_coefficients(coefficients_from_expressions(ex));
  CHECK_FALSE(r.ellipticity_ok);
  CHECK(r.min_ellipticity_ratio == doctest::Approx(0.25));
}

TEST_CASE("gauss hermite integrates polynomials") {
  const GaussHermiteRule g = gauss_hermite(8);
  double m0 = 0, m2 = 0, m4 = 0;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    m0 += g.weights[i];
    m2 += g.weights[i] * std::pow(g.nodes[i], 2);
    m4 += g.weights[i] * std::pow(g.nodes[i], 4);
  }
  CHECK(m0 == doctest::Approx(1.0));
  CHECK(m2 == doctest::Approx(1.0));
  CHECK(m4 == doctest::Approx(3.0));
}

TEST_CASE("mollify") {
  CoefficientExpressions ex;
  ex.drift = {"0"};
  ex.diffusion = {"1"};
  ex.noise = {"0"};
  ex.terminal = "x";
  ex.driver = "3";
  const CoefficientSet lin = mollify(coefficients_from_expressions(ex), 0.5);
  const Vec pts[] = {Vec::Constant(1, 1.3)};
  CHECK(lin.terminal(pts) == doctest::Approx(1.3));
  CHECK(lin.driver(0.2, Vec::Constant(1, -0.7), 0.4, RowVec::Zero(1)) == doctest::Approx(3.0));

  ex.terminal = "abs(x)";
  const CoefficientSet abs_m = mollify(coefficients_from_expressions(ex), 0.1);
  const Vec zero[] = {Vec::Zero(1)};
  // E|eps xi| = eps sqrt(2/pi), against trapezoid quadrature of the density.
  double q = 0.0;
  const int m = 200000;
  const double h = 20.0 / m;
  for (int i = 0; i <= m; ++i) {
    const double u = -10.0 + i * h;
    const double w = (i == 0 || i == m) ? 0.5 : 1.0;
    q += w * h * std::abs(0.1 * u) * std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
  }
  CHECK(abs_m.terminal(zero) == doctest::Approx(q).epsilon(1e-2));
  CHECK(q == doctest::Approx(0.0798).epsilon(1e-3));

  CHECK_THROWS_AS(mollify(coefficients_from_expressions(ex), 0.0), ValidationError);
  CHECK_THROWS_AS(mollify(coefficients_from_expressions(ex), -1.0), ValidationError);
}

TEST_CASE("problem validation") {
  ProblemSpec s = testing::unit_problem("x", 0.0, 4, 16);
  CHECK_NOTHROW(s.validate());
  s.n_inner_paths = 1;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = testing::partition_problem("x0*x1", 1.0, 10, 16);
  CHECK_NOTHROW(s.validate());
  s.partition.reset();
  CHECK_THROWS_AS(s.validate(), ConfigurationError);
  const auto nodes = terminal_nodes(testing::partition_problem("x0", 1.0, 10, 16));
  CHECK(nodes == std::vector<int>{10, 5, 0});
}

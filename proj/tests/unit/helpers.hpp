#pragma once

#include "bdsde/problem.hpp"

#include <string>

namespace testing {

/// d = 1 problem with b = 0, sigma = 1 unless overridden.
inline bdsde::ProblemSpec unit_problem(const std::string& terminal, double x, int n_steps, int paths,
                                       const std::string& driver = "0", const std::string& noise = "0",
                                       const std::string& drift = "0", const std::string& diffusion = "1") {
  bdsde::CoefficientExpressions e;
  e.drift = {drift};
  e.diffusion = {diffusion};
  e.driver = driver;
  e.noise = {noise};
  e.terminal = terminal;
  bdsde::ProblemSpec s;
  s.coefficients = bdsde::coefficients_from_expressions(e);
  s.t = 1.0;
  s.x = bdsde::Vec::Constant(1, x);
  s.grid = bdsde::make_grid(1.0, n_steps);
  s.n_inner_paths = paths;
  s.seed = 7;
  return s;
}

/// Terminal on the partition {0, 1/2, 1}; variables x0, x1, x2 in partition order.
inline bdsde::ProblemSpec partition_problem(const std::string& terminal, double x, int n_steps, int paths) {
  bdsde::CoefficientExpressions e;
  e.drift = {"0"};
  e.diffusion = {"1"};
  e.noise = {"0"};
  e.terminal = terminal;
  e.terminal_points = 3;
  bdsde::ProblemSpec s;
  s.coefficients = bdsde::coefficients_from_expressions(e);
  s.t = 1.0;
  s.x = bdsde::Vec::Constant(1, x);
  s.grid = bdsde::make_grid(1.0, n_steps);
  const double times[] = {0.0, 0.5, 1.0};
  s.partition = bdsde::Partition::from_times(s.grid, times);
  s.n_inner_paths = paths;
  s.seed = 11;
  return s;
}

}  // namespace testing

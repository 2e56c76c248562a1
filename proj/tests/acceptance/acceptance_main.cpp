#include "bdsde/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  bdsde::AcceptanceOptions o;
  app.add_option("--seed", o.seed);
  app.add_option("--threads", o.threads)->check(CLI::PositiveNumber);
  app.add_option("--path-scale", o.path_scale)->check(CLI::PositiveNumber);
  app.add_option("--only", o.only)->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  const bdsde::AcceptanceReport rep = bdsde::run_acceptance(o, &std::cout);
  int pass = 0;
  for (const auto& r : rep.results) pass += r.status == bdsde::CriterionStatus::kPass;
  std::cout << pass << "/" << rep.results.size() << " criteria passed\n";
  return rep.exit_code();
}

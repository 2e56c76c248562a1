#include "bdsde/harness.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace bdsde;

namespace {

const char* kHeat = R"(# heat test
id = heat
kind = u-estimate
terminal = x^2
x0 = 0
n_steps = 20
n_inner_paths = 20000
seed = 3
)";

}  // namespace

TEST_CASE("config parsing") {
  const ExperimentConfig c = parse_config(kHeat);
  CHECK(c.id == "heat");
  CHECK(c.coefficients.terminal == "x^2");
  CHECK(c.n_steps == 20);
  CHECK(c.seed == 3);
  CHECK_THROWS_AS(parse_config("colour = red\n"), ConfigurationError);
  CHECK_THROWS_AS(parse_config("n_steps = 3\nn_steps = 4\n"), ConfigurationError);
  CHECK_THROWS_AS(parse_config("n_steps = many\n"), ConfigurationError);
}

TEST_CASE("config round trip") {
  ExperimentConfig c = parse_config(kHeat);
  c.kind = "jumps";
  c.coefficients.dim = 2;
  c.coefficients.drift = {"-x1", "0.1*x2"};
  c.coefficients.diffusion = {"1", "0", "0.2", "1"};
  c.coefficients.noise = {"0.2*cos(y)", "0"};
  c.coefficients.terminal = "x0_1*x1_2";
  c.coefficients.terminal_points = 3;
  c.x0 = {0.1, -0.3};
  c.partition = {0.0, 0.5, 1.0};
  c.z_times = {0.25, 0.75};
  c.ladder = {{10, 100}, {20, 400}};
  c.mollify_eps = 0.1;
  c.noise_mode = NoiseMode::kRademacher;
  c.pde_spacing = 1.0 / 3.0;
  c.output = "out.csv";
  const ExperimentConfig back = parse_config(write_config(c));
  CHECK(back == c);
  CHECK(params_hash(back) == params_hash(c));
}

TEST_CASE("params hash ignores output and threads") {
  ExperimentConfig a = parse_config(kHeat);
  ExperimentConfig b = a;
  b.output = "elsewhere.csv";
  b.threads = 4;
  CHECK(params_hash(a) == params_hash(b));
  b.seed = 4;
  CHECK(params_hash(a) != params_hash(b));
}

TEST_CASE("kind requirements") {
  ExperimentConfig c = parse_config(kHeat);
  c.kind = "jumps";
  CHECK_THROWS_AS(to_problem(c), ConfigurationError);
  c.kind = "z-profile";
  CHECK_THROWS_AS(to_problem(c), ConfigurationError);
  c.kind = "convergence";
  CHECK_THROWS_AS(to_problem(c), ConfigurationError);
  c.kind = "sideways";
  CHECK_THROWS(run_experiment(c));
}

TEST_CASE("u-estimate on the heat test") {
  const auto records = run_experiment(parse_config(kHeat));
  REQUIRE(records.size() == 1);
  const ResultRecord& r = records.front();
  REQUIRE(r.oracle);
  CHECK(*r.oracle == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(std::abs(r.value - 1.0) <= 3.0 * r.std_error);
  CHECK(r.pass.value());
}

TEST_CASE("records do not depend on the thread count") {
  ExperimentConfig c = parse_config(kHeat);
  c.kind = "grad-weights";
  c.x0 = {1.0};
  const auto a = run_experiment(c);
  c.threads = 3;
  const auto b = run_experiment(c);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].value == b[i].value);
    CHECK(a[i].std_error == b[i].std_error);
    CHECK(a[i].params_hash == b[i].params_hash);
  }
}

TEST_CASE("z-profile with a linear terminal") {
  ExperimentConfig c = parse_config(kHeat);
  c.kind = "z-profile";
  c.coefficients.terminal = "x";
  c.z_times = {0.25, 0.5, 0.75};
  c.n_inner_paths = 20000;
  const auto records = run_experiment(c);
  CHECK(records.size() == 6);
  for (const auto& r : records) {
    CHECK(std::abs(r.value - 1.0) <= 3.0 * r.std_error + 1e-9);
    CHECK(r.pass.value());
  }
}

TEST_CASE("jumps experiment") {
  ExperimentConfig c = parse_config(kHeat);
  c.kind = "jumps";
  c.x0 = {1.0};
  c.coefficients.terminal = "x0*x1";
  c.coefficients.terminal_points = 3;
  c.partition = {0.0, 0.5, 1.0};
  const auto records = run_experiment(c);
  REQUIRE(records.size() == 4);
  CHECK(records[0].label.rfind("delta_z", 0) == 0);
  CHECK(records[0].value == doctest::Approx(1.0).epsilon(0.05));
  CHECK(records[3].pass.value());
}

TEST_CASE("convergence ladder") {
  ExperimentConfig c = parse_config(kHeat);
  c.kind = "convergence";
  c.ladder = {{50, 10000}, {100, 40000}, {200, 160000}};
  const auto records = run_experiment(c);
  REQUIRE(records.size() == 3);
  for (std::size_t i = 1; i < records.size(); ++i) CHECK(*records[i].abs_error < *records[i - 1].abs_error);
}

TEST_CASE("csv output") {
  ResultRecord r;
  r.experiment_id = "e";
  r.kind = "u-estimate";
  r.label = "u";
  r.value = 1.5;
  std::ostringstream os;
  write_records(os, {r});
  const std::string text = os.str();
  CHECK(text.rfind(csv_header() + "\n", 0) == 0);
  CHECK(csv_header() ==
        "experiment_id,kind,params_hash,label,time,value,std_error,oracle,abs_error,n_samples,pass,wall_clock_s");
  // Absent oracle, error and pass flag leave empty cells.
  CHECK(text.find(",,,") != std::string::npos);
}

TEST_CASE("acceptance reports insufficient samples when paths are cut") {
  AcceptanceOptions o;
  o.path_scale = 0.01;
  o.only = {1};
  const AcceptanceReport rep = run_acceptance(o);
  REQUIRE(rep.results.size() == 1);
  CHECK(rep.results[0].status == CriterionStatus::kInsufficient);
  CHECK(rep.exit_code() == 2);
}

#pragma once

#include "bdsde/coefficients.hpp"
#include "bdsde/problem.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bdsde {

struct LadderRung {
  int n_steps = 0;
  int n_inner_paths = 0;
  friend bool operator==(const LadderRung&, const LadderRung&) = default;
};

/// Experiment kinds accepted in the `kind` key.
inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds{"u-estimate", "grad-weights", "grad-variational",
                                              "z-profile",  "z-discrete",   "jumps",
                                              "oracle-compare", "convergence", "acceptance"};
  return kinds;
}

/// One experiment, as read from a `key = value` file.
struct ExperimentConfig {
  std::string id = "experiment";
  std::string kind = "u-estimate";
  CoefficientExpressions coefficients;
  double horizon = 1.0;
  std::vector<double> x0{0.0};
  int n_steps = 50;
  int n_inner_paths = 10000;
  int n_outer_paths = 1;
  int outer_id = 0;
  std::uint64_t seed = 1;
  int regression_degree = 3;
  std::optional<double> mollify_eps;
  std::vector<double> partition;  // paper-clock times; empty means none
  NoiseMode noise_mode = NoiseMode::kGaussian;
  int noise_master_steps = 0;
  int picard_iterations = 0;
  std::vector<double> z_times;
  std::vector<LadderRung> ladder;
  double pde_spacing = 1.0 / 256.0;
  int pde_time_steps = 0;  // 0: max(4 * n_steps, 200) rounded up to a multiple of n_steps
  std::string output;
  int threads = 1;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

ExperimentConfig default_config();
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);
/// Canonical text; parse_config(write_config(c)) == c.
std::string write_config(const ExperimentConfig& config);
/// FNV-1a of the canonical text without output and threads (they never change results).
std::uint64_t params_hash(const ExperimentConfig& config);

/// Checks kind-specific requirements and builds the problem.
ProblemSpec to_problem(const ExperimentConfig& config);

struct ResultRecord {
  std::string experiment_id;
  std::string kind;
  std::uint64_t params_hash = 0;
  std::string label;
  double time = 0.0;
  double value = 0.0;
  double std_error = 0.0;
  std::optional<double> oracle;
  std::optional<double> abs_error;
  int n_samples = 0;
  std::optional<bool> pass;
  double wall_clock_s = 0.0;
};

/// experiment_id,kind,params_hash,label,time,value,std_error,oracle,abs_error,n_samples,pass,wall_clock_s
std::string csv_header();
std::string csv_row(const ResultRecord& r);
void write_records(std::ostream& os, const std::vector<ResultRecord>& records, bool header = true);

/// Records pass when |value - oracle| <= 3 SE + 2% of max(1, |oracle|).
bool record_tolerance_pass(double value, double se, double oracle);

std::vector<ResultRecord> run_experiment(const ExperimentConfig& config);

enum class CriterionStatus { kPass, kFail, kInsufficient };
std::string to_string(CriterionStatus s);

struct CriterionResult {
  int id = 0;
  std::string name;
  CriterionStatus status = CriterionStatus::kFail;
  std::string detail;
  double seconds = 0.0;
  double statistic = 0.0;
  double target = 0.0;
};

struct AcceptanceOptions {
  std::uint64_t seed = 20240611;
  int threads = 1;
  /// Multiplies every path count; below 1 the SE-aware criteria may report insufficient samples.
  double path_scale = 1.0;
  /// Criteria to run (1-based); empty runs all.
  std::vector<int> only;
};

struct AcceptanceReport {
  std::vector<CriterionResult> results;
  bool all_pass() const;
  /// 0 all pass, 1 any failure, 2 insufficient samples without failures.
  int exit_code() const;
};

/// Runs the acceptance criteria, printing one line per criterion to `log` when given.
AcceptanceReport run_acceptance(const AcceptanceOptions& options, std::ostream* log = nullptr);

}  // namespace bdsde

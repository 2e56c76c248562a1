#include "bdsde/bdsde_solver.hpp"
#include "bdsde/harness.hpp"
#include "bdsde/oracles.hpp"
#include "bdsde/weights.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace bdsde;

namespace {

ProblemSpec make_problem(const std::string& terminal, std::vector<double> x, double horizon, int n_steps, int n_paths,
                         std::vector<std::string> drift, std::vector<std::string> diffusion, const std::string& driver,
                         std::vector<std::string> noise, std::uint64_t seed, const std::string& noise_mode,
                         int regression_degree, int threads) {
  const int d = static_cast<int>(x.size());
  CoefficientExpressions e;
  e.dim = d;
  e.drift = drift.empty() ? std::vector<std::string>(d, "0") : std::move(drift);
  if (diffusion.empty()) {
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) e.diffusion.push_back(i == j ? "1" : "0");
  } else {
    e.diffusion = std::move(diffusion);
  }
  e.driver = driver;
  e.noise = noise.empty() ? std::vector<std::string>(d, "0") : std::move(noise);
  e.terminal = terminal;
  ProblemSpec s;
  s.coefficients = coefficients_from_expressions(e);
  s.t = horizon;
  s.x = Eigen::Map<const Eigen::VectorXd>(x.data(), d);
  s.grid = make_grid(horizon, n_steps);
  s.n_inner_paths = n_paths;
  s.seed = seed;
  s.noise_mode = noise_mode_from_string(noise_mode);
  s.regression_degree = regression_degree;
  s.threads = threads;
  s.validate();
  return s;
}

py::array_t<double> simulate_paths(const ProblemSpec& s, int outer) {
  const PathEnsemble ens = simulate_ensemble(s, effective_coefficients(s), outer, false);
  const int n = s.n_steps() + 1, np = ens.n_paths(), d = s.dim();
  py::array_t<double> out({n, np, d});
  auto a = out.mutable_unchecked<3>();
  for (int k = 0; k < n; ++k)
    for (int p = 0; p < np; ++p)
      for (int c = 0; c < d; ++c) a(k, p, c) = ens.x(k, p)[c];
  return out;
}

double pde_u(const ProblemSpec& s, double spacing, int n_time_steps, int outer) {
  PdeOptions o;
  o.space = space_grid_around(s.x(0), 1.0, s.t, spacing, 8.0);
  o.n_time_steps = n_time_steps;
  const CoefficientSet c = effective_coefficients(s);
  const PdeResult r = c.noise_is_zero ? pde_solve(c, s.t, o) : spde_solve_pathwise(c, s.t, o, sample_b_increments(s, outer));
  return r.outputs.front()(s.x(0));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Monte Carlo solvers and oracles for backward doubly stochastic equations";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ConfigurationError>(m, "ConfigurationError", PyExc_ValueError);
  py::register_exception<SimulationError>(m, "SimulationError", PyExc_RuntimeError);
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);
  py::register_exception<UnsupportedError>(m, "UnsupportedError", PyExc_NotImplementedError);

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init(&default_config))
      .def_readwrite("id", &ExperimentConfig::id)
      .def_readwrite("kind", &ExperimentConfig::kind)
      .def_readwrite("horizon", &ExperimentConfig::horizon)
      .def_readwrite("x0", &ExperimentConfig::x0)
      .def_readwrite("n_steps", &ExperimentConfig::n_steps)
      .def_readwrite("n_inner_paths", &ExperimentConfig::n_inner_paths)
      .def_readwrite("n_outer_paths", &ExperimentConfig::n_outer_paths)
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def_readwrite("regression_degree", &ExperimentConfig::regression_degree)
      .def_readwrite("partition", &ExperimentConfig::partition)
      .def_readwrite("z_times", &ExperimentConfig::z_times)
      .def_readwrite("noise_master_steps", &ExperimentConfig::noise_master_steps)
      .def_readwrite("threads", &ExperimentConfig::threads)
      .def("__eq__", [](const ExperimentConfig& a, const ExperimentConfig& b) { return a == b; })
      .def("__str__", &write_config);

  m.def("parse_config", &parse_config, py::arg("text"));
  m.def("load_config", &load_config, py::arg("path"));
  m.def("write_config", &write_config, py::arg("config"));
  m.def("params_hash", &params_hash, py::arg("config"));

  py::class_<ResultRecord>(m, "ResultRecord")
      .def_readonly("experiment_id", &ResultRecord::experiment_id)
      .def_readonly("kind", &ResultRecord::kind)
      .def_readonly("params_hash", &ResultRecord::params_hash)
      .def_readonly("label", &ResultRecord::label)
      .def_readonly("time", &ResultRecord::time)
      .def_readonly("value", &ResultRecord::value)
      .def_readonly("std_error", &ResultRecord::std_error)
      .def_readonly("oracle", &ResultRecord::oracle)
      .def_readonly("abs_error", &ResultRecord::abs_error)
      .def_readonly("n_samples", &ResultRecord::n_samples)
      .def_readonly("passed", &ResultRecord::pass)
      .def_readonly("wall_clock_s", &ResultRecord::wall_clock_s)
      .def("csv", &csv_row);

  m.def("csv_header", &csv_header);
  m.def("run_experiment", &run_experiment, py::arg("config"), py::call_guard<py::gil_scoped_release>());

  py::class_<ProblemSpec>(m, "Problem")
      .def_property_readonly("dim", &ProblemSpec::dim)
      .def_property_readonly("n_steps", &ProblemSpec::n_steps)
      .def_property_readonly("delta", &ProblemSpec::delta)
      .def_readwrite("n_inner_paths", &ProblemSpec::n_inner_paths)
      .def_readwrite("seed", &ProblemSpec::seed);

  m.def("make_problem", &make_problem, py::arg("terminal"), py::arg("x"), py::arg("horizon") = 1.0,
        py::arg("n_steps") = 50, py::arg("n_paths") = 10000, py::arg("drift") = std::vector<std::string>{},
        py::arg("diffusion") = std::vector<std::string>{}, py::arg("driver") = "0",
        py::arg("noise") = std::vector<std::string>{}, py::arg("seed") = 1, py::arg("noise_mode") = "gaussian",
        py::arg("regression_degree") = 3, py::arg("threads") = 1,
        "Problem with expression coefficients; diffusion entries are row-major.");

  m.def("simulate_paths", &simulate_paths, py::arg("problem"), py::arg("outer") = 0,
        "Forward paths as an array (n_steps + 1, n_paths, dim); index 0 is the start.");
  m.def(
      "evaluate_u",
      [](const ProblemSpec& s, int outer) {
        UEstimate u;
        {
          py::gil_scoped_release release;
          u = evaluate_u(s, outer);
        }
        return py::make_tuple(u.value, u.std_error);
      },
      py::arg("problem"), py::arg("outer") = 0);
  m.def(
      "grad_u_weights",
      [](const ProblemSpec& s, int outer) {
        const WeightEstimate w = estimate_grad_u_weights(s, outer);
        return py::make_tuple(Eigen::VectorXd(w.value), Eigen::VectorXd(w.std_error));
      },
      py::arg("problem"), py::arg("outer") = 0);
  m.def(
      "z_weights",
      [](const ProblemSpec& s, int s_index, int outer) {
        const WeightEstimate w = estimate_z_weights(s, outer, s_index);
        return py::make_tuple(Eigen::VectorXd(w.value), Eigen::VectorXd(w.std_error));
      },
      py::arg("problem"), py::arg("s_index"), py::arg("outer") = 0);
  m.def(
      "grad_u_variational",
      [](const ProblemSpec& s, int outer) {
        const CoefficientSet c = effective_coefficients(s);
        const PathEnsemble ens = simulate_ensemble(s, c, outer, true);
        const BackwardSolution base = solve_bdsde(s, c, ens);
        const VariationalSolution v = solve_variational(s, c, ens, base);
        return py::make_tuple(Eigen::VectorXd(v.grad_u_value), Eigen::VectorXd(v.std_error));
      },
      py::arg("problem"), py::arg("outer") = 0);
  m.def("pde_u", &pde_u, py::arg("problem"), py::arg("spacing") = 1.0 / 256.0, py::arg("n_time_steps") = 200,
        py::arg("outer") = 0, "Crank-Nicolson (or pathwise splitting when g != 0) value at the start point; d = 1.");
  m.def(
      "tree_u", [](const ProblemSpec& s, int outer) { return tree_enumerate(s, outer, {.gradient = false, .jumps = false}).u; },
      py::arg("problem"), py::arg("outer") = 0);

  m.def(
      "run_acceptance",
      [](std::uint64_t seed, double path_scale, std::vector<int> only) {
        AcceptanceOptions o;
        o.seed = seed;
        o.path_scale = path_scale;
        o.only = std::move(only);
        AcceptanceReport rep;
        {
          py::gil_scoped_release release;
          rep = run_acceptance(o);
        }
        py::list out;
        for (const auto& r : rep.results) out.append(py::make_tuple(r.id, r.name, to_string(r.status), r.detail));
        return out;
      },
      py::arg("seed") = AcceptanceOptions{}.seed, py::arg("path_scale") = 1.0, py::arg("only") = std::vector<int>{});
}

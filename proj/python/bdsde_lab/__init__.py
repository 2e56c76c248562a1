"""Monte Carlo lab for backward doubly stochastic differential equations."""

from ._core import (
    ConfigurationError,
    ExperimentConfig,
    Problem,
    ResultRecord,
    SimulationError,
    SolverError,
    UnsupportedError,
    ValidationError,
    csv_header,
    evaluate_u,
    grad_u_variational,
    grad_u_weights,
    load_config,
    make_problem,
    params_hash,
    parse_config,
    pde_u,
    run_acceptance,
    run_experiment,
    simulate_paths,
    tree_u,
    write_config,
    z_weights,
)

__version__ = "0.1.0"

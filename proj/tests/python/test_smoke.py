import math

import numpy as np
import pytest

import bdsde_lab as bl

HEAT = """
id = heat
kind = u-estimate
terminal = x^2
n_steps = 20
n_inner_paths = 20000
seed = 5
"""


def test_heat_value_against_pde():
    p = bl.make_problem("x^2", [0.0], n_steps=20, n_paths=20000)
    u, se = bl.evaluate_u(p)
    assert abs(u - 1.0) <= 3 * se
    assert bl.pde_u(p) == pytest.approx(1.0, abs=1e-3)


def test_paths_shape_and_start():
    p = bl.make_problem("x1 + x2", [0.5, -0.5], n_steps=4, n_paths=10)
    x = bl.simulate_paths(p)
    assert x.shape == (5, 10, 2)
    assert np.all(x[0] == np.array([0.5, -0.5]))


def test_gradients_agree():
    p = bl.make_problem("x^2", [1.0], n_steps=20, n_paths=20000)
    g, se = bl.grad_u_weights(p)
    v, vse = bl.grad_u_variational(p)
    assert abs(g[0] - 2.0) <= 3 * se[0]
    assert abs(v[0] - 2.0) <= 3 * vse[0]


def test_tree_is_exact_for_quadratic():
    p = bl.make_problem("x^2", [0.0], n_steps=4, n_paths=16, noise_mode="enumerate")
    assert bl.tree_u(p) == pytest.approx(1.0, abs=1e-14)
    u, _ = bl.evaluate_u(p)
    assert u == pytest.approx(1.0, abs=1e-14)


def test_config_round_trip_and_experiment():
    c = bl.parse_config(HEAT)
    assert bl.parse_config(bl.write_config(c)) == c
    recs = bl.run_experiment(c)
    assert len(recs) == 1
    r = recs[0]
    assert r.oracle == pytest.approx(1.0, abs=1e-3)
    assert r.passed
    assert r.csv().count(",") == bl.csv_header().count(",")


def test_errors_are_python_exceptions():
    with pytest.raises(ValueError):
        bl.parse_config("no_such_key = 1\n")
    with pytest.raises(ValueError):
        bl.make_problem("x", [0.0], n_steps=0)


def test_acceptance_marks_small_runs_insufficient():
    rows = bl.run_acceptance(path_scale=0.01, only=[1])
    assert rows[0][2] == "INSUFFICIENT"

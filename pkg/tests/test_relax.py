import numpy as np
import pytest

from btrcia.grid import build_grid
from btrcia.pde import PdeConfig, gradient
from btrcia.relax import (
    RelaxParams,
    criticality,
    criticality_from_gradient,
    criticality_tilde,
    criticality_tilde_from_gradient,
    solve_relaxation,
    threshold_round,
)


@pytest.fixture(scope="module")
def cfg():
    return PdeConfig()


@pytest.fixture(scope="module")
def small_run(cfg):
    g = build_grid(16)
    params = RelaxParams(max_iter=800, crit_tol=1e-7, bb_warm_start=True)
    return g, solve_relaxation(g, np.zeros(g.num_cells), params, cfg)


def test_params_validation():
    with pytest.raises(ValueError):
        RelaxParams(armijo_c=1.5)
    with pytest.raises(ValueError):
        RelaxParams(armijo_shrink=0.0)
    with pytest.raises(ValueError):
        RelaxParams(crit_tol=-1.0)


def test_zero_target_has_zero_solution(cfg):
    g = build_grid(8)
    params = RelaxParams(crit_tol=1e-12)
    res = solve_relaxation(g, np.zeros(g.num_cells), params, cfg, target=np.zeros(g.num_cells))
    assert res.converged
    assert np.all(res.control == 0.0)
    assert res.objective == 0.0
    assert res.criticality == 0.0


def test_objective_trace_nonincreasing(small_run):
    _, res = small_run
    objectives = [row.objective for row in res.trace]
    assert all(b <= a for a, b in zip(objectives, objectives[1:]))


def test_iterates_stay_feasible(small_run):
    _, res = small_run
    assert np.min(res.control) >= 0.0
    assert np.max(res.control) <= 1.0


def test_criticality_nonnegative_on_path(small_run):
    _, res = small_run
    assert all(row.criticality >= 0.0 for row in res.trace)


def test_stopping_contract(small_run):
    _, res = small_run
    if res.converged:
        assert res.criticality <= 1e-7


def test_rejects_infeasible_start(cfg):
    g = build_grid(4)
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        solve_relaxation(g, np.full(g.num_cells, 1.5), RelaxParams(), cfg)


def test_criticality_zero_when_gradient_nonnegative_at_zero():
    x = np.zeros(10)
    p = np.abs(np.random.default_rng(0).normal(size=10))
    assert criticality_from_gradient(x, p, 0.25) == 0.0


def test_criticality_binary_characterization(cfg):
    # for a binary control, the primal gap equals the mass of the negative
    # part of the sign-flipped gradient
    g = build_grid(8)
    rng = np.random.default_rng(21)
    u = (rng.uniform(size=g.num_cells) < 0.4).astype(float)
    p = gradient(g, u, cfg)
    gfield = p * (1.0 - 2.0 * u)
    via_descent = g.cell_volume * float(np.sum(np.maximum(-gfield, 0.0)))
    assert criticality_from_gradient(u, p, g.cell_volume) == pytest.approx(via_descent, rel=1e-12)


def test_criticality_function_matches_kernel(cfg):
    g = build_grid(8)
    rng = np.random.default_rng(6)
    x = rng.uniform(0, 1, g.num_cells)
    p = gradient(g, x, cfg)
    assert criticality(g, x, cfg) == criticality_from_gradient(x, p, g.cell_volume)


def test_criticality_tilde_zero_gradient():
    x = np.random.default_rng(1).uniform(0, 1, 20)
    assert criticality_tilde_from_gradient(x, np.zeros(20), 0.1) == 0.0


def test_criticality_tilde_full_displacement():
    # x = 0 with gradient -1 everywhere: every cell projects to 1
    g = build_grid(8)
    x = np.zeros(g.num_cells)
    p = -np.ones(g.num_cells)
    assert criticality_tilde_from_gradient(x, p, g.cell_volume) == pytest.approx(4.0)


def test_criticality_measures_share_zero_set():
    rng = np.random.default_rng(17)
    v = 0.5
    for _ in range(20):
        x = rng.uniform(0, 1, 30)
        p = rng.normal(size=30)
        c = criticality_from_gradient(x, p, v)
        ct = criticality_tilde_from_gradient(x, p, v)
        assert (c <= 1e-12) == (ct <= 1e-12)
    # stationary case: gradient pushes every cell against its active bound
    x = np.zeros(30)
    x[:10] = 1.0
    p = np.where(x == 1.0, -1.0, 1.0)
    assert criticality_from_gradient(x, p, v) == 0.0
    assert criticality_tilde_from_gradient(x, p, v) == 0.0


def test_criticality_tilde_function_runs(cfg, small_run):
    g, res = small_run
    assert criticality_tilde(g, res.control, cfg) >= 0.0


def test_threshold_round():
    assert np.all(threshold_round(np.full(9, 0.25)) == 0.0)
    assert np.all(threshold_round(np.full(9, 0.5)) == 1.0)
    u = np.array([0.0, 1.0, 1.0, 0.0])
    assert np.array_equal(threshold_round(u), u)


def test_max_iter_flag(cfg):
    g = build_grid(8)
    params = RelaxParams(max_iter=2, crit_tol=1e-16)
    res = solve_relaxation(g, np.zeros(g.num_cells), params, cfg)
    assert not res.converged
    assert "not reached" in res.message
    assert res.iterations == 2

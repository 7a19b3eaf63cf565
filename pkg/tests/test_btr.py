import itertools

import numpy as np
import pytest

from btrcia.btr import TrustRegionParams, btr_run, find_step, predicted_reduction
from btrcia.grid import build_grid
from btrcia.pde import PdeConfig


@pytest.fixture(scope="module")
def cfg():
    return PdeConfig()


@pytest.fixture(scope="module")
def run16(cfg):
    g = build_grid(16)
    result = btr_run(g, np.zeros(g.num_cells), TrustRegionParams(), cfg)
    return g, result


def test_params_validation():
    with pytest.raises(ValueError):
        TrustRegionParams(delta_max=4.0)
    with pytest.raises(ValueError):
        TrustRegionParams(delta0=3.0, delta_max=2.0)
    with pytest.raises(ValueError):
        TrustRegionParams(sigma1=0.8, sigma2=0.5)
    with pytest.raises(ValueError):
        TrustRegionParams(omega=1.0)


def test_find_step_no_negative_cells():
    g = build_grid(4)
    assert find_step(g, np.abs(np.random.default_rng(0).normal(size=16)), 1.0).size == 0


def test_find_step_zero_capacity():
    g = build_grid(4)
    assert find_step(g, -np.ones(16), 0.9 * g.cell_volume).size == 0


def test_find_step_respects_capacity():
    g = build_grid(4)
    step = find_step(g, -np.ones(16), 3.4 * g.cell_volume)
    assert step.size == 3


def test_find_step_exact_integer_capacity():
    g = build_grid(4)
    step = find_step(g, -np.ones(16), 2.0)  # delta_max-style dyadic radius
    assert step.size == int(2.0 / g.cell_volume)


def test_find_step_tie_break_lowest_hilbert_rank():
    g = build_grid(2)
    step = find_step(g, -np.ones(4), 1.5 * g.cell_volume)
    assert list(step) == [0]  # rank 0 is the lower-left cell


def test_find_step_matches_exhaustive_minimum():
    rng = np.random.default_rng(7)
    for _ in range(25):
        g = build_grid(int(rng.choice([1, 2, 4])))
        gfield = rng.integers(-128, 129, size=g.num_cells) / 64.0
        capacity = int(rng.integers(0, 4))
        step = find_step(g, gfield, (capacity + 0.5) * g.cell_volume)
        best = 0.0
        for k in range(0, capacity + 1):
            for combo in itertools.combinations(range(g.num_cells), k):
                best = min(best, sum(gfield[c] for c in combo))
        assert sum(gfield[c] for c in step) == best


def test_predicted_reduction_empty_and_single():
    g = build_grid(4)
    gfield = np.zeros(16)
    assert predicted_reduction(g, gfield, np.empty(0, dtype=np.int64)) == 0.0
    gfield[5] = -2.0
    assert predicted_reduction(g, gfield, np.array([5])) == -2.0 * g.cell_volume


def test_predicted_reduction_equals_pairing():
    rng = np.random.default_rng(3)
    g = build_grid(4)
    u = (rng.uniform(size=16) < 0.5).astype(float)
    p = rng.normal(size=16)
    gfield = p * (1.0 - 2.0 * u)
    step = find_step(g, gfield, 5.2 * g.cell_volume)
    d = np.zeros(16)
    d[step] = 1.0 - 2.0 * u[step]  # flip direction on the step set
    pairing = g.cell_volume * float(np.sum(p[step] * d[step]))
    assert predicted_reduction(g, gfield, step) == pytest.approx(pairing, rel=1e-14)


def test_stationary_start_terminates_unchanged(cfg):
    # zero target: the zero control is stationary, so nothing is accepted
    g = build_grid(8)
    res = btr_run(g, np.zeros(g.num_cells), TrustRegionParams(), cfg, target=np.zeros(g.num_cells))
    assert res.termination == "stationary"
    assert res.accepted_steps == 0
    assert np.all(res.control == 0.0)
    assert res.criticality == 0.0


def test_rejects_non_binary_start(cfg):
    g = build_grid(4)
    with pytest.raises(ValueError, match="binary"):
        btr_run(g, np.full(g.num_cells, 0.5), TrustRegionParams(), cfg)


def test_run_terminates_by_radius(run16):
    _, res = run16
    assert res.termination == "radius below cell volume"
    assert res.accepted_steps > 0


def test_iterates_stay_binary(run16):
    _, res = run16
    assert np.all((res.control == 0.0) | (res.control == 1.0))


def test_objective_strictly_decreases_on_accepted_steps(run16):
    _, res = run16
    accepted = [row for row in res.trace if row.accepted]
    assert accepted
    for row in accepted:
        assert row.actual < 0.0
    objectives = [row.objective for row in res.trace]
    assert all(b <= a for a, b in zip(objectives, objectives[1:]))


def test_acceptance_inequality_holds(run16):
    _, res = run16
    params = TrustRegionParams()
    for row in res.trace:
        if row.accepted:
            assert row.actual <= params.sigma1 * row.predicted + 1e-12
            assert row.predicted < 0.0


def test_radius_transitions_follow_the_rules(run16):
    g, res = run16
    params = TrustRegionParams()
    for row, nxt in zip(res.trace, res.trace[1:]):
        if not row.accepted:
            assert nxt.delta == 0.5 * row.delta
        elif row.actual <= params.sigma2 * row.predicted:
            assert nxt.delta == min(2.0 * row.delta, params.delta_max)
        else:
            assert nxt.delta == row.delta
        assert 0.0 < nxt.delta <= params.delta_max


def test_steps_fit_in_radius(run16):
    g, res = run16
    for row in res.trace:
        assert row.step_cells * g.cell_volume <= row.delta * (1.0 + 1e-9)


def test_delta_param_recorded(run16):
    _, res = run16
    params = TrustRegionParams()
    for row in res.trace:
        if row.step_cells > 0:
            expected = min(params.omega, 0.5 * row.criticality / 4.0, row.delta)
            assert row.delta_param == pytest.approx(expected, rel=1e-14)


def test_running_min_criticality_nonincreasing(run16):
    _, res = run16
    best = np.inf
    mins = []
    for row in res.trace:
        if row.accepted:
            best = min(best, row.criticality)
            mins.append(best)
    assert all(b <= a for a, b in zip(mins, mins[1:]))


def test_max_iter_flagged(cfg):
    g = build_grid(8)
    params = TrustRegionParams(max_iter=3)
    res = btr_run(g, np.zeros(g.num_cells), params, cfg)
    assert res.termination == "max_iter reached"
    assert res.iterations == 3

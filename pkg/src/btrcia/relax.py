"""Projected gradient descent with Armijo backtracking for the box-relaxed
problem min J(x) over cellwise 0 <= x <= 1, plus the first-order criticality
measures used for stopping and diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid
from .pde import (
    PdeConfig,
    gradient,
    gradient_from_state,
    objective_from_state,
    solve_state,
    target_field,
)

_MAX_BACKTRACKS = 60
_BB_STEP_MAX = 1e8
_BB_STEP_MIN = 1e-10


@dataclass(frozen=True)
class RelaxParams:
    max_iter: int = 5000
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    step0: float = 1.0
    crit_tol: float = 1e-9
    bb_warm_start: bool = False

    def __post_init__(self) -> None:
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not 0 < self.armijo_c < 1:
            raise ValueError("armijo_c must be in (0, 1)")
        if not 0 < self.armijo_shrink < 1:
            raise ValueError("armijo_shrink must be in (0, 1)")
        if not self.step0 > 0:
            raise ValueError("step0 must be positive")
        if not self.crit_tol > 0:
            raise ValueError("crit_tol must be positive")


@dataclass(frozen=True)
class RelaxTraceRow:
    iteration: int
    objective: float
    criticality: float
    step: float


@dataclass
class RelaxResult:
    control: np.ndarray
    trace: list[RelaxTraceRow] = field(default_factory=list)
    converged: bool = False
    message: str = ""
    iterations: int = 0

    @property
    def objective(self) -> float:
        return self.trace[-1].objective

    @property
    def criticality(self) -> float:
        return self.trace[-1].criticality


def criticality_from_gradient(x: np.ndarray, p: np.ndarray, cell_volume: float) -> float:
    """Primal gap value h^2 * sum_c [p_c x_c + max(-p_c, 0)]; zero exactly at
    stationary points of the box-constrained problem."""
    return cell_volume * float(p @ x + np.sum(np.maximum(-p, 0.0)))


def criticality(grid: Grid, x: np.ndarray, cfg: PdeConfig, target: np.ndarray | None = None) -> float:
    return criticality_from_gradient(x, gradient(grid, x, cfg, target), grid.cell_volume)


def criticality_tilde_from_gradient(x: np.ndarray, p: np.ndarray, cell_volume: float) -> float:
    """Projection-displacement measure h^2 * sum_c |x_c - clip(x_c - p_c, 0, 1)|."""
    return cell_volume * float(np.sum(np.abs(x - np.clip(x - p, 0.0, 1.0))))


def criticality_tilde(
    grid: Grid, x: np.ndarray, cfg: PdeConfig, target: np.ndarray | None = None
) -> float:
    return criticality_tilde_from_gradient(x, gradient(grid, x, cfg, target), grid.cell_volume)


def threshold_round(x: np.ndarray) -> np.ndarray:
    """Cellwise rounding to {0, 1}; the tie at 0.5 rounds to 1."""
    x = np.asarray(x, dtype=float)
    return (x >= 0.5).astype(float)


def _validate_box(x: np.ndarray) -> None:
    if np.min(x) < 0.0 or np.max(x) > 1.0:
        raise ValueError("control must be cellwise in [0, 1]")


def solve_relaxation(
    grid: Grid,
    x0: np.ndarray,
    params: RelaxParams,
    cfg: PdeConfig,
    target: np.ndarray | None = None,
) -> RelaxResult:
    """Projected gradient descent from x0, stopping once the criticality
    measure drops to params.crit_tol or max_iter is hit.

    Each iteration projects x - t * grad onto the box and backtracks t until
    the Armijo condition holds, so the objective trace is nonincreasing.  With
    ``bb_warm_start`` the trial step is the Barzilai-Borwein length from the
    last accepted step (still safeguarded by the same backtracking), which is
    much faster on this badly conditioned problem than a fixed trial step.
    """
    if target is None:
        target = target_field(grid)
    x = np.asarray(x0, dtype=float).ravel().copy()
    if x.size != grid.num_cells:
        raise ValueError("initial control does not match the grid")
    _validate_box(x)

    v = grid.cell_volume
    y = solve_state(grid, x, cfg)
    j = objective_from_state(grid, y, target)
    result = RelaxResult(control=x)
    x_prev: np.ndarray | None = None
    p_prev: np.ndarray | None = None

    for k in range(params.max_iter + 1):
        p = gradient_from_state(grid, y, cfg, target, guess=p_prev)
        crit = criticality_from_gradient(x, p, v)
        if crit <= params.crit_tol:
            result.trace.append(RelaxTraceRow(k, j, crit, 0.0))
            result.converged = True
            result.message = "criticality tolerance reached"
            break
        if k == params.max_iter:
            result.trace.append(RelaxTraceRow(k, j, crit, 0.0))
            result.message = "tolerance not reached"
            break

        t = params.step0
        if params.bb_warm_start and x_prev is not None:
            s = x - x_prev
            dg = p - p_prev
            denom = float(s @ dg)
            if denom > 0.0:
                t = min(max(float(s @ s) / denom, _BB_STEP_MIN), _BB_STEP_MAX)

        accepted = False
        for _ in range(_MAX_BACKTRACKS):
            cand = np.clip(x - t * p, 0.0, 1.0)
            d = cand - x
            decrease = v * float(p @ d)
            if decrease == 0.0:
                break
            y_cand = solve_state(grid, cand, cfg, guess=y)
            j_cand = objective_from_state(grid, y_cand, target)
            if j_cand <= j + params.armijo_c * decrease:
                accepted = True
                break
            t *= params.armijo_shrink
        if not accepted:
            result.trace.append(RelaxTraceRow(k, j, crit, 0.0))
            result.message = "line search stalled; tolerance not reached"
            break

        result.trace.append(RelaxTraceRow(k, j, crit, t))
        x_prev, p_prev = x, p
        x, y, j = cand, y_cand, j_cand

    result.control = x
    result.iterations = len(result.trace) - 1
    return result

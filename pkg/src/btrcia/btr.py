"""Binary trust-region steepest descent.

The iterate is a binary cellwise control.  Each iteration computes the signed
descent field g (the gradient with its sign flipped on active cells), greedily
collects the most negative cells up to the trust-region capacity, and flips
the control there if the actual objective decrease reaches a fraction sigma1
of the linear prediction.  The radius doubles after sigma2-strong successes
(capped at delta_max), stays put after plain successes, and halves after
rejections; the run stops once the radius drops below one cell volume, the
descent field has no negative cell (a stationary point), or max_iter is hit.

Because all cells share one volume, the greedy step solves the trust-region
subproblem exactly: it is a knapsack with unit weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import DOMAIN_AREA, Grid
from .pde import (
    PdeConfig,
    gradient_from_state,
    objective_from_state,
    signed_descent_from_gradient,
    solve_state,
    target_field,
)


@dataclass(frozen=True)
class TrustRegionParams:
    delta_max: float = 0.5 * DOMAIN_AREA
    delta0: float = 0.1 * DOMAIN_AREA
    sigma1: float = 0.1
    sigma2: float = 0.75
    omega: float = 0.5
    max_iter: int = 1_000_000

    def __post_init__(self) -> None:
        if not 0 < self.delta_max < DOMAIN_AREA:
            raise ValueError(f"delta_max must be in (0, {DOMAIN_AREA}), got {self.delta_max}")
        if not 0 < self.delta0 <= self.delta_max:
            raise ValueError("delta0 must be in (0, delta_max]")
        if not 0 < self.sigma1 < self.sigma2 <= 1:
            raise ValueError("need 0 < sigma1 < sigma2 <= 1")
        if not 0 < self.omega < 1:
            raise ValueError("omega must be in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass(frozen=True)
class BtrTraceRow:
    iteration: int
    objective: float
    criticality: float
    delta: float
    delta_param: float
    step_cells: int
    predicted: float
    actual: float
    accepted: bool


@dataclass
class BtrResult:
    control: np.ndarray
    trace: list[BtrTraceRow] = field(default_factory=list)
    iterations: int = 0
    accepted_steps: int = 0
    termination: str = ""
    objective: float = float("nan")
    criticality: float = float("nan")


def find_step(grid: Grid, g: np.ndarray, delta: float) -> np.ndarray:
    """Cells to flip: up to floor(delta / cell volume) cells with the most
    negative descent values, strictly negative only; ties between equal values
    go to the lower Hilbert rank.  Returns row-major cell indices, sorted."""
    if delta < 0:
        raise ValueError("trust-region radius must be nonnegative")
    g = np.asarray(g, dtype=float).ravel()
    # relative guard so an exact-integer ratio is not floored down by roundoff
    capacity = int(np.floor(delta / grid.cell_volume * (1.0 + 1e-12)))
    if capacity == 0:
        return np.empty(0, dtype=np.int64)
    negative = np.nonzero(g < 0.0)[0]
    if negative.size == 0:
        return np.empty(0, dtype=np.int64)
    order = np.lexsort((grid.hilbert_rank[negative], g[negative]))
    chosen = negative[order[:capacity]]
    return np.sort(chosen)


def predicted_reduction(grid: Grid, g: np.ndarray, step_cells: np.ndarray) -> float:
    """Linear model of the objective change for flipping the given cells."""
    if step_cells.size == 0:
        return 0.0
    return grid.cell_volume * float(np.sum(g[step_cells]))


def btr_run(
    grid: Grid,
    x0: np.ndarray,
    params: TrustRegionParams,
    cfg: PdeConfig,
    target: np.ndarray | None = None,
) -> BtrResult:
    """Run the trust-region loop from a binary control x0."""
    if target is None:
        target = target_field(grid)
    u = np.asarray(x0, dtype=float).ravel().copy()
    if u.size != grid.num_cells:
        raise ValueError("initial control does not match the grid")
    if not np.all((u == 0.0) | (u == 1.0)):
        raise ValueError("initial control must be binary")

    v = grid.cell_volume
    y = solve_state(grid, u, cfg)
    j = objective_from_state(grid, y, target)
    # the gradient is cached per accepted iterate; rejections do not re-solve
    p = gradient_from_state(grid, y, cfg, target)

    result = BtrResult(control=u)
    delta = params.delta0
    iteration = 0
    while True:
        if delta < v:
            result.termination = "radius below cell volume"
            g = signed_descent_from_gradient(p, u)
            result.criticality = v * float(np.sum(np.maximum(-g, 0.0)))
            break
        if iteration >= params.max_iter:
            result.termination = "max_iter reached"
            g = signed_descent_from_gradient(p, u)
            result.criticality = v * float(np.sum(np.maximum(-g, 0.0)))
            break

        g = signed_descent_from_gradient(p, u)
        crit = v * float(np.sum(np.maximum(-g, 0.0)))
        if crit == 0.0:
            result.trace.append(
                BtrTraceRow(iteration, j, crit, delta, 0.0, 0, 0.0, 0.0, False)
            )
            result.termination = "stationary"
            result.criticality = 0.0
            break

        delta_param = min(params.omega, 0.5 * crit / grid.domain_area, delta)
        step = find_step(grid, g, delta)
        predicted = predicted_reduction(grid, g, step)

        candidate = u.copy()
        candidate[step] = 1.0 - candidate[step]
        y_cand = solve_state(grid, candidate, cfg, guess=y)
        j_cand = objective_from_state(grid, y_cand, target)
        actual = j_cand - j
        accepted = actual <= params.sigma1 * predicted

        result.trace.append(
            BtrTraceRow(
                iteration, j, crit, delta, delta_param, int(step.size), predicted, actual, accepted
            )
        )
        if accepted:
            u, y, j = candidate, y_cand, j_cand
            p = gradient_from_state(grid, y, cfg, target, guess=p)
            result.accepted_steps += 1
            if actual <= params.sigma2 * predicted:
                delta = min(2.0 * delta, params.delta_max)
        else:
            delta = 0.5 * delta
        iteration += 1

    result.control = u
    result.objective = j
    result.iterations = iteration
    return result

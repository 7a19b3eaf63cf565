"""Evaluation of computed controls: optimality gap against the relaxed
solution and geometric interface length between the 0 and 1 level sets."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .grid import Grid
from .pde import PdeConfig, objective


@dataclass(frozen=True)
class RunReport:
    """Per-run summary serialized into report.json by the CLI."""

    method: str
    objective: float
    relaxed_objective: float | None
    optimality_gap: float | None
    interface_length: float | None
    iterations: int
    wall_time_s: float

    def to_dict(self) -> dict:
        return asdict(self)


def interface_length(grid: Grid, u: np.ndarray) -> float:
    """Total length of interior edges separating cells with value 0 from
    cells with value 1 (4-neighborhood; domain boundary edges not counted)."""
    u = np.asarray(u, dtype=float).ravel()
    if u.size != grid.num_cells:
        raise ValueError("control does not match the grid")
    if not np.all((u == 0.0) | (u == 1.0)):
        raise ValueError("control is not binary (expected exact 0/1 values)")
    a = u.reshape(grid.n, grid.n)
    edges = np.count_nonzero(a[1:, :] != a[:-1, :]) + np.count_nonzero(a[:, 1:] != a[:, :-1])
    return grid.h * float(edges)


def optimality_gap(grid: Grid, u: np.ndarray, relaxed_objective: float, cfg: PdeConfig) -> float:
    """J(u) minus the objective of the relaxed solution on the same grid."""
    return objective(grid, u, cfg) - relaxed_objective

"""Forward and adjoint solves for the screened Poisson operator, and the
tracking objective driving the control problem.

The state equation -eps * Lap(y) + y = x with zero Dirichlet data is
discretized with the 5-point stencil on the cell centers; stencil neighbors
outside the domain are mirrored ghost cells (ghost value = -inner value), so
the homogeneous Dirichlet condition sits on the domain boundary itself and
the scheme stays second-order consistent up to the boundary.  The resulting
system (eps * L_h + I) y = x is symmetric positive definite and is solved
with plain conjugate gradients.  The operator is self-adjoint, so the adjoint
solve reuses the forward matrix.

All inner products and norms are weighted with the cell volume h^2, so the
gradient field p returned by :func:`gradient` satisfies
J(x + d) ~= J(x) + h^2 * sum_c p_c d_c.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import cg

from .grid import DOMAIN_SIDE, Grid


@dataclass(frozen=True)
class PdeConfig:
    """Diffusion coefficient and linear-solver controls."""

    epsilon: float = 1e-2
    cg_tol: float = 1e-10
    cg_max_iter: int = 20000

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 < self.cg_tol < 1:
            raise ValueError(f"cg_tol must be in (0, 1), got {self.cg_tol}")
        if self.cg_max_iter < 1:
            raise ValueError(f"cg_max_iter must be at least 1, got {self.cg_max_iter}")


def tracking_target(s1, s2):
    """Target state 0.25 * sin(3 (s1-1)(s2-1))^2 * (|s1-1| + |s2-1|)."""
    u = s1 - 1.0
    w = s2 - 1.0
    return 0.25 * np.sin(3.0 * u * w) ** 2 * (np.abs(u) + np.abs(w))


def target_field(grid: Grid) -> np.ndarray:
    """Tracking target evaluated at every cell center (row-major)."""
    s1, s2 = grid.cell_centers()
    return tracking_target(s1, s2)


@functools.lru_cache(maxsize=None)
def _system_matrix(n: int, epsilon: float) -> sparse.csr_matrix:
    h = DOMAIN_SIDE / n
    # mirrored ghosts pin the zero value on the boundary face: each boundary
    # face adds +1 to the diagonal of the 1-D second-difference matrix
    main = 2.0 * np.ones(n)
    main[0] += 1.0
    main[-1] += 1.0
    off = -np.ones(n - 1)
    t = sparse.diags([off, main, off], offsets=[-1, 0, 1], format="csr")
    eye = sparse.identity(n, format="csr")
    lap = (sparse.kron(eye, t) + sparse.kron(t, eye)) / (h * h)
    a = epsilon * lap + sparse.identity(n * n)
    return a.tocsr()


def _as_field(grid: Grid, values: np.ndarray) -> np.ndarray:
    x = np.asarray(values, dtype=float).ravel()
    if x.size != grid.num_cells:
        raise ValueError(f"field has {x.size} values, grid has {grid.num_cells} cells")
    if not np.all(np.isfinite(x)):
        raise ValueError("field contains non-finite values")
    return x


def _solve(grid: Grid, rhs: np.ndarray, cfg: PdeConfig, guess: np.ndarray | None = None) -> np.ndarray:
    a = _system_matrix(grid.n, cfg.epsilon)
    y, info = cg(a, rhs, x0=guess, rtol=cfg.cg_tol, atol=0.0, maxiter=cfg.cg_max_iter)
    if info != 0:
        raise RuntimeError(
            f"conjugate gradient did not reach rtol={cfg.cg_tol} "
            f"within {cfg.cg_max_iter} iterations (info={info})"
        )
    return y


def solve_state(
    grid: Grid, x: np.ndarray, cfg: PdeConfig, guess: np.ndarray | None = None
) -> np.ndarray:
    """Solve (eps * L_h + I) y = x for the discrete state y.

    The optional guess warm-starts the iteration; the residual stopping rule
    is relative to the right-hand side, so the accuracy contract is unchanged.
    """
    return _solve(grid, _as_field(grid, x), cfg, guess)


def objective_from_state(grid: Grid, y: np.ndarray, target: np.ndarray) -> float:
    r = y - target
    return 0.5 * grid.cell_volume * float(r @ r)


def objective(grid: Grid, x: np.ndarray, cfg: PdeConfig, target: np.ndarray | None = None) -> float:
    """Tracking objective 0.5 * ||y - y_d||^2 with y = solve_state(x)."""
    if target is None:
        target = target_field(grid)
    y = solve_state(grid, x, cfg)
    return objective_from_state(grid, y, target)


def gradient_from_state(
    grid: Grid,
    y: np.ndarray,
    cfg: PdeConfig,
    target: np.ndarray | None = None,
    guess: np.ndarray | None = None,
) -> np.ndarray:
    """Adjoint solve p = (eps * L_h + I)^{-1} (y - y_d) for a known state y."""
    if target is None:
        target = target_field(grid)
    return _solve(grid, y - target, cfg, guess)


def gradient(grid: Grid, x: np.ndarray, cfg: PdeConfig, target: np.ndarray | None = None) -> np.ndarray:
    """Cell averages of the objective gradient at control x (forward + adjoint solve)."""
    y = solve_state(grid, x, cfg)
    return gradient_from_state(grid, y, cfg, target)


def _check_binary(values: np.ndarray) -> None:
    if not np.all((values == 0.0) | (values == 1.0)):
        raise ValueError("control is not binary (expected exact 0/1 values)")


def signed_descent_from_gradient(p: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Flip the gradient sign on cells where the binary control is one."""
    return p * (1.0 - 2.0 * u)


def signed_descent_field(
    grid: Grid, u: np.ndarray, cfg: PdeConfig, target: np.ndarray | None = None
) -> np.ndarray:
    """Descent indicator g for a binary control: cells with g < 0 admit a
    first-order decrease of the objective when their value is flipped."""
    u = _as_field(grid, u)
    _check_binary(u)
    return signed_descent_from_gradient(gradient(grid, u, cfg, target), u)

"""Uniform square-cell grids on (0, 2)^2 with a Hilbert-curve cell ordering.

Cells are indexed row-major with row 0 at the bottom of the domain: the cell
in row i, column j has index ``i * n + j`` and center
``((j + 0.5) * h, (i + 0.5) * h)``.  The Hilbert ordering is stored as an
explicit permutation because the rounding passes iterate over it many times.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DOMAIN_SIDE = 2.0
DOMAIN_AREA = DOMAIN_SIDE * DOMAIN_SIDE


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def hilbert_positions(n: int) -> np.ndarray:
    """Return the (row, col) positions of all cells of an n x n grid in curve order.

    The curve starts in the lower-left cell and its 2 x 2 base motif visits
    (row, col) = (0,0), (1,0), (1,1), (0,1), i.e. up, right, down with row 0 at
    the bottom.  Consecutive positions are edge-adjacent, and every aligned
    2 x 2 block occupies four consecutive ranks, in the same order in which the
    half-resolution curve visits the corresponding coarse cells.  Any fixed
    orientation would do; this one is pinned for reproducibility.

    Returns an (n*n, 2) int array of (row, col) pairs, rank by rank.
    """
    if not _is_power_of_two(n):
        raise ValueError(f"grid size must be a power of two, got n={n}")
    t = np.arange(n * n, dtype=np.int64)
    x = np.zeros(n * n, dtype=np.int64)  # column
    y = np.zeros(n * n, dtype=np.int64)  # row
    s = 1
    while s < n:
        rx = 1 & (t // 2)
        ry = 1 & (t ^ rx)
        flip = (ry == 0) & (rx == 1)
        xf = np.where(flip, s - 1 - x, x)
        yf = np.where(flip, s - 1 - y, y)
        swap = ry == 0
        x, y = np.where(swap, yf, xf), np.where(swap, xf, yf)
        x = x + s * rx
        y = y + s * ry
        t = t // 4
        s *= 2
    return np.stack([y, x], axis=1)


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform n x n partition of (0, 2)^2 into square cells.

    ``hilbert_order[rank]`` is the row-major cell index visited at that rank;
    ``hilbert_rank`` is the inverse permutation.
    """

    n: int
    h: float
    cell_volume: float
    hilbert_order: np.ndarray
    hilbert_rank: np.ndarray

    @property
    def num_cells(self) -> int:
        return self.n * self.n

    @property
    def domain_area(self) -> float:
        return DOMAIN_AREA

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates (s1, s2) of all cell centers, row-major."""
        idx = np.arange(self.num_cells)
        rows, cols = idx // self.n, idx % self.n
        return (cols + 0.5) * self.h, (rows + 0.5) * self.h


def build_grid(n: int) -> Grid:
    """Construct the n x n grid; n must be a power of two (dyadic nesting)."""
    if not isinstance(n, (int, np.integer)) or not _is_power_of_two(int(n)):
        raise ValueError(f"grid size must be a power of two, got n={n}")
    n = int(n)
    pos = hilbert_positions(n)
    order = pos[:, 0] * n + pos[:, 1]
    rank = np.empty(n * n, dtype=np.int64)
    rank[order] = np.arange(n * n, dtype=np.int64)
    order.setflags(write=False)
    rank.setflags(write=False)
    h = DOMAIN_SIDE / n
    return Grid(n=n, h=h, cell_volume=h * h, hilbert_order=order, hilbert_rank=rank)


def _check_nesting(coarse_n: int, fine_n: int) -> None:
    if not (_is_power_of_two(coarse_n) and _is_power_of_two(fine_n)):
        raise ValueError("grid sizes must be powers of two")
    if fine_n % coarse_n != 0:
        raise ValueError(
            f"incompatible grid sizes: fine n={fine_n} is not a multiple of coarse n={coarse_n}"
        )


def prolongate(coarse_values: np.ndarray, coarse_n: int, fine_n: int) -> np.ndarray:
    """Constant injection of a cellwise field from a coarse grid onto a finer one.

    Each fine cell inherits the value of the coarse cell containing it, so the
    integral of the field is preserved and binary fields stay binary.
    """
    _check_nesting(coarse_n, fine_n)
    values = np.asarray(coarse_values, dtype=float).reshape(coarse_n, coarse_n)
    r = fine_n // coarse_n
    out = np.repeat(np.repeat(values, r, axis=0), r, axis=1)
    return out.ravel()


def restrict_averages(fine_values: np.ndarray, fine_n: int, coarse_n: int) -> np.ndarray:
    """Cellwise averages of a fine field over the cells of a coarser grid."""
    _check_nesting(coarse_n, fine_n)
    values = np.asarray(fine_values, dtype=float).reshape(fine_n, fine_n)
    r = fine_n // coarse_n
    out = values.reshape(coarse_n, r, coarse_n, r).mean(axis=(1, 3))
    return out.ravel()

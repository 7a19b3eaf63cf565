"""Rounding of relaxed cellwise controls to binary ones along the Hilbert
cell ordering.

Three passes are provided.  ``sur`` is the greedy sum-up rounding pass whose
maximum cumulative deviation is bounded by sum_{i=2}^m (1/i) * max cell
volume.  ``cor`` minimizes that maximum deviation exactly, and ``shg``
minimizes the number of label changes between consecutive cells in the
ordering subject to a theta-scaled deviation budget.  The two exact passes
are dynamic programs over the running count of label-1 cells; with uniform
cell volumes the deviation after k cells depends only on that count, and the
budget confines the count to a narrow band around the prefix sums, so both
run in O(N * band width).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid

# Base slack, in units of cell count, used when comparing cumulative
# deviations against a budget; _count_bands widens it with the worst-case
# roundoff of the prefix sums so that the greedy pass's feasibility witness
# survives accumulation over ~1e5 cells.  Both stay far below the spacing of
# distinct deviation values that occur in practice.
_DEV_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class RoundingInstance:
    """Cell volumes and per-cell convex weights, both listed in rank order.

    ``averages[k, i]`` is the weight of label i+1 on the cell at rank k; each
    row must sum to one.
    """

    volumes: np.ndarray
    averages: np.ndarray

    def __post_init__(self) -> None:
        volumes = np.asarray(self.volumes, dtype=float)
        averages = np.asarray(self.averages, dtype=float)
        if averages.ndim != 2 or averages.shape[1] < 2:
            raise ValueError("averages must be an (N, m) array with m >= 2")
        if volumes.shape != (averages.shape[0],):
            raise ValueError("volumes must have one entry per rank")
        if volumes.size == 0:
            raise ValueError("instance must contain at least one cell")
        if np.min(volumes) <= 0:
            raise ValueError("cell volumes must be positive")
        if np.min(averages) < -1e-12 or np.max(averages) > 1 + 1e-12:
            raise ValueError("averages must lie in [0, 1]")
        if np.max(np.abs(averages.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("averages must sum to one on every rank")
        object.__setattr__(self, "volumes", volumes)
        object.__setattr__(self, "averages", averages)

    @property
    def num_cells(self) -> int:
        return self.volumes.size

    @property
    def num_labels(self) -> int:
        return self.averages.shape[1]


@dataclass(frozen=True)
class RoundingResult:
    """Labels in rank order (values 1..m), the achieved maximum cumulative
    deviation, and the number of label changes between consecutive ranks."""

    labels: np.ndarray
    eta: float
    jumps: int


def _count_jumps(labels: np.ndarray) -> int:
    return int(np.count_nonzero(labels[1:] != labels[:-1]))


def _eta_for_labels(inst: RoundingInstance, labels: np.ndarray) -> float:
    w = np.zeros_like(inst.averages)
    w[np.arange(inst.num_cells), labels - 1] = 1.0
    phi = np.cumsum((inst.averages - w) * inst.volumes[:, None], axis=0)
    return float(np.max(np.abs(phi)))


def sur(inst: RoundingInstance) -> RoundingResult:
    """Greedy pass: on each cell pick the label with the largest cumulative
    backlog; argmax ties go to the lowest label index."""
    n, m = inst.num_cells, inst.num_labels
    labels = np.empty(n, dtype=np.int64)
    phi = np.zeros(m)
    eta = 0.0
    for k in range(n):
        gamma = phi + inst.averages[k] * inst.volumes[k]
        i = int(np.argmax(gamma))
        labels[k] = i + 1
        phi = gamma
        phi[i] -= inst.volumes[k]
        worst = float(np.max(np.abs(phi)))
        if worst > eta:
            eta = worst
    return RoundingResult(labels=labels, eta=eta, jumps=_count_jumps(labels))


def _require_binary_uniform(inst: RoundingInstance) -> float:
    if inst.num_labels != 2:
        raise ValueError(f"this pass supports m = 2 only, got m = {inst.num_labels}")
    v = float(inst.volumes[0])
    if np.max(np.abs(inst.volumes - v)) > 1e-12 * v:
        raise ValueError("this pass requires uniform cell volumes")
    return v


def _count_bands(prefix: np.ndarray, budget: float) -> tuple[np.ndarray, np.ndarray]:
    """Feasible label-1 counts per rank: |prefix_k - c| <= budget, 0 <= c <= k."""
    n = prefix.size
    slack = _DEV_SLACK + float(prefix[-1]) * n * np.finfo(float).eps
    lo = np.maximum(0, np.ceil(prefix - budget - slack).astype(np.int64))
    hi = np.minimum(np.arange(1, n + 1), np.floor(prefix + budget + slack).astype(np.int64))
    if np.any(lo > hi):
        raise RuntimeError("deviation budget admits no labeling")
    return lo, hi


def _min_max_deviation(prefix: np.ndarray, band: tuple[np.ndarray, np.ndarray]) -> float:
    """Smallest achievable max_k |prefix_k - c_k| over monotone count paths
    confined to the band (counts increase by 0 or 1 per rank)."""
    lo, hi = band
    inf = np.inf
    f = np.full(hi[0] - lo[0] + 1, inf)
    for c in range(lo[0], hi[0] + 1):
        f[c - lo[0]] = abs(prefix[0] - c)
    for k in range(1, prefix.size):
        width = hi[k] - lo[k] + 1
        f_new = np.full(width, inf)
        for c in range(lo[k], hi[k] + 1):
            best = inf
            for cp in (c, c - 1):
                if lo[k - 1] <= cp <= hi[k - 1]:
                    val = f[cp - lo[k - 1]]
                    if val < best:
                        best = val
            if best < inf:
                f_new[c - lo[k]] = max(best, abs(prefix[k] - c))
        f = f_new
    return float(np.min(f))


def _min_jump_labels(prefix: np.ndarray, budget: float) -> np.ndarray:
    """Binary labels minimizing consecutive-rank label changes subject to
    |prefix_k - (#label-1 cells among the first k)| <= budget for all k.

    Ties are broken toward continuing the previous label, then label 1; among
    optimal endpoints, toward fewer label-1 cells, then label 1.
    """
    lo, hi = _count_bands(prefix, budget)
    n = prefix.size
    big = np.iinfo(np.int32).max // 2
    # cost[k][c - lo[k], l]: min jumps for the first k+1 cells, count c,
    # cell k labeled l+1; choice[...] stores the predecessor label.
    cost: list[np.ndarray] = []
    choice: list[np.ndarray] = []

    c0 = np.full((hi[0] - lo[0] + 1, 2), big, dtype=np.int32)
    for label, inc in ((1, 1), (2, 0)):
        if lo[0] <= inc <= hi[0]:
            c0[inc - lo[0], label - 1] = 0
    cost.append(c0)
    choice.append(np.zeros_like(c0, dtype=np.int8))

    for k in range(1, n):
        ck = np.full((hi[k] - lo[k] + 1, 2), big, dtype=np.int32)
        pk = np.zeros_like(ck, dtype=np.int8)
        prev = cost[k - 1]
        for c in range(lo[k], hi[k] + 1):
            for label, inc in ((1, 1), (2, 0)):
                cp = c - inc
                if not lo[k - 1] <= cp <= hi[k - 1]:
                    continue
                row = prev[cp - lo[k - 1]]
                best, best_from = big, 0
                for cand in (label, 1, 2):
                    val = row[cand - 1] + (0 if cand == label else 1)
                    if val < best:
                        best, best_from = val, cand
                if best < big:
                    ck[c - lo[k], label - 1] = best
                    pk[c - lo[k], label - 1] = best_from
        cost.append(ck)
        choice.append(pk)

    last = cost[-1]
    end_c, end_label, end_cost = -1, 0, big
    for c in range(lo[-1], hi[-1] + 1):
        for label in (1, 2):
            val = last[c - lo[-1], label - 1]
            if val < end_cost:
                end_c, end_label, end_cost = c, label, int(val)
    if end_cost >= big:
        raise RuntimeError("deviation budget admits no labeling")

    labels = np.empty(n, dtype=np.int64)
    c, label = end_c, end_label
    for k in range(n - 1, 0, -1):
        labels[k] = label
        prev_label = int(choice[k][c - lo[k], label - 1])
        c -= 1 if label == 1 else 0
        label = prev_label
    labels[0] = label
    return labels


def cor(inst: RoundingInstance) -> RoundingResult:
    """Exact minimizer of the maximum cumulative deviation for m = 2.

    Among all optimal labelings, the returned one has the fewest consecutive
    label changes (and then the fewest label-1 cells).
    """
    _require_binary_uniform(inst)
    prefix = np.cumsum(inst.averages[:, 0])
    # The greedy pass never deviates by more than half a cell, so the optimum
    # lives inside a two-count band around the prefix sums.
    band = _count_bands(prefix, 0.5)
    eta_star = _min_max_deviation(prefix, band)
    labels = _min_jump_labels(prefix, eta_star)
    return RoundingResult(labels=labels, eta=_eta_for_labels(inst, labels), jumps=_count_jumps(labels))


def shg(inst: RoundingInstance, theta: float = 1.0) -> RoundingResult:
    """Fewest consecutive-rank label changes subject to a cumulative deviation
    budget of theta * 0.5 * cell volume (m = 2; feasible for every theta >= 1
    because the greedy pass supplies a witness)."""
    if theta < 1.0:
        raise ValueError(f"theta must be at least 1, got {theta}")
    _require_binary_uniform(inst)
    prefix = np.cumsum(inst.averages[:, 0])
    labels = _min_jump_labels(prefix, 0.5 * theta)
    return RoundingResult(labels=labels, eta=_eta_for_labels(inst, labels), jumps=_count_jumps(labels))


def instance_from_control(grid: Grid, x: np.ndarray) -> RoundingInstance:
    """Binary-label instance for a relaxed control: weights (x, 1 - x) listed
    along the grid's Hilbert ordering with the uniform cell volume."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != grid.num_cells:
        raise ValueError("control does not match the grid")
    if np.min(x) < 0.0 or np.max(x) > 1.0:
        raise ValueError("control must be cellwise in [0, 1]")
    ranked = x[grid.hilbert_order]
    averages = np.stack([ranked, 1.0 - ranked], axis=1)
    volumes = np.full(grid.num_cells, grid.cell_volume)
    return RoundingInstance(volumes=volumes, averages=averages)


def labels_to_control(grid: Grid, labels: np.ndarray) -> np.ndarray:
    """Binary control with value one on the cells assigned label 1."""
    out = np.zeros(grid.num_cells)
    out[grid.hilbert_order[labels == 1]] = 1.0
    return out


def run_method(inst: RoundingInstance, method: str, theta: float = 1.0) -> RoundingResult:
    if method == "sur":
        return sur(inst)
    if method == "cor":
        return cor(inst)
    if method == "shg":
        return shg(inst, theta)
    raise ValueError(f"unknown rounding method {method!r}")


def round_control(grid: Grid, x: np.ndarray, method: str, theta: float = 1.0) -> np.ndarray:
    """Round a relaxed control to binary with the chosen pass."""
    result = run_method(instance_from_control(grid, x), method, theta)
    return labels_to_control(grid, result.labels)

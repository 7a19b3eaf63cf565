"""Matplotlib renderings written next to the delimited outputs: control
fields as grayscale images (value one black, zero white, row 0 at the bottom)
and per-iteration traces."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_control_figure(path: str | Path, n: int, values: np.ndarray, title: str | None = None) -> None:
    values = np.asarray(values, dtype=float).reshape(n, n)
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.imshow(values, cmap="gray_r", vmin=0.0, vmax=1.0, origin="lower", extent=(0, 2, 0, 2))
    ax.set_xticks([0, 1, 2])
    ax.set_yticks([0, 1, 2])
    if title:
        ax.set_title(title)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def save_relax_trace_figure(path: str | Path, trace) -> None:
    its = [row.iteration for row in trace]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3))
    ax1.plot(its, [row.objective for row in trace])
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("objective")
    ax2.semilogy(its, [max(row.criticality, 1e-300) for row in trace])
    ax2.set_xlabel("iteration")
    ax2.set_ylabel("criticality")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_btr_trace_figure(path: str | Path, trace) -> None:
    its = [row.iteration for row in trace]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3))
    ax1.plot(its, [row.objective for row in trace])
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("objective")
    ax2.semilogy(its, [row.delta for row in trace], label="radius")
    ax2.semilogy(its, [max(row.criticality, 1e-300) for row in trace], label="criticality")
    ax2.set_xlabel("iteration")
    ax2.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)

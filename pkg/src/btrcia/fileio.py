"""On-disk formats for controls, traces, and reports.

Control CSV: line 1 is ``n=<int>``, followed by n lines of n comma-separated
values, row-major with row 0 at the bottom of the domain.  Control PGM
(plain P2, maxval 255): value 1 maps to gray 0 (black), value 0 to gray 255
(white), intermediate values linearly.  Both writers are byte-deterministic
for a given field.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def write_control_csv(path: str | Path, n: int, values: np.ndarray) -> None:
    values = np.asarray(values, dtype=float).reshape(n, n)
    lines = [f"n={n}"]
    for row in values:
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_control_csv(path: str | Path) -> tuple[int, np.ndarray]:
    text = Path(path).read_text().strip().splitlines()
    if not text or not text[0].startswith("n="):
        raise ValueError(f"{path}: missing 'n=<int>' header line")
    n = int(text[0][2:])
    rows = text[1:]
    if len(rows) != n:
        raise ValueError(f"{path}: expected {n} data rows, found {len(rows)}")
    values = np.empty((n, n))
    for i, row in enumerate(rows):
        parts = row.split(",")
        if len(parts) != n:
            raise ValueError(f"{path}: row {i} has {len(parts)} values, expected {n}")
        values[i] = [float(p) for p in parts]
    return n, values.ravel()


def write_control_pgm(path: str | Path, n: int, values: np.ndarray) -> None:
    values = np.asarray(values, dtype=float).reshape(n, n)
    gray = np.clip(np.rint(255.0 * (1.0 - values)), 0, 255).astype(int)
    lines = ["P2", f"{n} {n}", "255"]
    for row in gray[::-1]:  # image rows run top to bottom
        lines.append(" ".join(str(g) for g in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_report_json(path: str | Path, report: dict) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")


def read_report_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


def write_rows_csv(path: str | Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")

"""Binary control of distributed systems: box relaxation, rounding along a
Hilbert cell ordering, and binary trust-region steepest descent, instantiated
on an elliptic tracking problem on (0, 2)^2."""

from .btr import BtrResult, BtrTraceRow, TrustRegionParams, btr_run, find_step, predicted_reduction
from .grid import Grid, build_grid, hilbert_positions, prolongate, restrict_averages
from .metrics import RunReport, interface_length, optimality_gap
from .pde import (
    PdeConfig,
    gradient,
    objective,
    signed_descent_field,
    solve_state,
    target_field,
    tracking_target,
)
from .relax import (
    RelaxParams,
    RelaxResult,
    criticality,
    criticality_tilde,
    solve_relaxation,
    threshold_round,
)
from .rounding import RoundingInstance, RoundingResult, cor, round_control, shg, sur

__version__ = "0.1.0"

__all__ = [
    "BtrResult",
    "BtrTraceRow",
    "Grid",
    "PdeConfig",
    "RelaxParams",
    "RelaxResult",
    "RoundingInstance",
    "RoundingResult",
    "RunReport",
    "TrustRegionParams",
    "btr_run",
    "build_grid",
    "cor",
    "criticality",
    "criticality_tilde",
    "find_step",
    "gradient",
    "hilbert_positions",
    "interface_length",
    "objective",
    "optimality_gap",
    "predicted_reduction",
    "prolongate",
    "restrict_averages",
    "round_control",
    "shg",
    "signed_descent_field",
    "solve_relaxation",
    "solve_state",
    "sur",
    "target_field",
    "threshold_round",
    "tracking_target",
]

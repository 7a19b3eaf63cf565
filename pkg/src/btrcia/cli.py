"""Experiment harness.

Subcommands: ``relax`` (solve the box relaxation), ``cia`` (relax then round
to binary along the Hilbert ordering), ``btr`` (trust-region descent from a
configurable start), ``hybrid`` (round on a coarse grid, then trust-region
descent on the fine one), ``metrics`` (re-evaluate a stored control), and
``sweep`` (mesh-refinement study; ``--full`` adds the large comparison and
hybridization tables).

Every run writes its controls as CSV + PGM + PNG into --out, a trace CSV
where applicable, and a report.json with the summary numbers and a config
echo.  Identical configs produce byte-identical CSV/PGM outputs.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import fileio, figures
from .btr import BtrResult, TrustRegionParams, btr_run
from .grid import Grid, build_grid, prolongate, restrict_averages
from .metrics import RunReport, interface_length
from .pde import PdeConfig, objective
from .relax import RelaxParams, solve_relaxation, threshold_round
from .rounding import instance_from_control, labels_to_control, run_method

FULL_SWEEP_N = 256
HYBRID_COARSE_NS = (8, 16, 32, 64, 128, 256)


@dataclass
class ExperimentConfig:
    command: str
    n: int | None = None
    epsilon: float = 1e-2
    cg_tol: float = 1e-10
    out: str = "out"
    relax_max_iter: int = 5000
    crit_tol: float = 1e-9
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    step0: float = 1.0
    bb: bool = True
    sigma1: float = 0.1
    sigma2: float = 0.75
    omega: float = 0.5
    delta0: float = 0.4
    delta_max: float = 2.0
    max_iter: int = 1_000_000
    method: str = "sur"
    theta: float = 1.0
    init: str = "zero"
    init_file: str | None = None
    relaxed_file: str | None = None
    coarse_n: int | None = None
    control_file: str | None = None
    ns: str = "32,64,128"
    full: bool = False
    seed: int | None = None

    def pde_config(self) -> PdeConfig:
        return PdeConfig(epsilon=self.epsilon, cg_tol=self.cg_tol)

    def relax_params(self) -> RelaxParams:
        return RelaxParams(
            max_iter=self.relax_max_iter,
            armijo_c=self.armijo_c,
            armijo_shrink=self.armijo_shrink,
            step0=self.step0,
            crit_tol=self.crit_tol,
            bb_warm_start=self.bb,
        )

    def tr_params(self) -> TrustRegionParams:
        return TrustRegionParams(
            delta_max=self.delta_max,
            delta0=self.delta0,
            sigma1=self.sigma1,
            sigma2=self.sigma2,
            omega=self.omega,
            max_iter=self.max_iter,
        )

    def to_dict(self) -> dict:
        return asdict(self)


def _outdir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_control(outdir: Path, stem: str, n: int, values: np.ndarray, title: str) -> None:
    fileio.write_control_csv(outdir / f"{stem}.csv", n, values)
    fileio.write_control_pgm(outdir / f"{stem}.pgm", n, values)
    figures.save_control_figure(outdir / f"{stem}.png", n, values, title)


def _write_relax_trace(outdir: Path, stem: str, trace) -> None:
    rows = [[r.iteration, r.objective, r.criticality, r.step] for r in trace]
    fileio.write_rows_csv(outdir / f"{stem}.csv", ["iteration", "objective", "criticality", "step"], rows)
    figures.save_relax_trace_figure(outdir / f"{stem}.png", trace)


def _write_btr_trace(outdir: Path, stem: str, trace) -> None:
    header = [
        "iteration", "objective", "criticality", "delta", "delta_param",
        "step_cells", "predicted", "actual", "accepted",
    ]
    rows = [
        [r.iteration, r.objective, r.criticality, r.delta, r.delta_param,
         r.step_cells, r.predicted, r.actual, int(r.accepted)]
        for r in trace
    ]
    fileio.write_rows_csv(outdir / f"{stem}.csv", header, rows)
    figures.save_btr_trace_figure(outdir / f"{stem}_fig.png", trace)


def _report(cfg: ExperimentConfig, method: str, objective_value: float,
            relaxed_objective: float | None, interface: float | None,
            iterations: int, wall_time_s: float, **extras) -> dict:
    gap = None if relaxed_objective is None else objective_value - relaxed_objective
    report = RunReport(
        method=method,
        objective=objective_value,
        relaxed_objective=relaxed_objective,
        optimality_gap=gap,
        interface_length=interface,
        iterations=iterations,
        wall_time_s=wall_time_s,
    ).to_dict()
    report["config"] = cfg.to_dict()
    report.update(extras)
    return report


def _relaxed_control(cfg: ExperimentConfig, grid: Grid, outdir: Path | None):
    """Relaxed control for downstream stages: loaded from --relaxed-file when
    given, otherwise solved from zero (and written next to the other outputs)."""
    pde_cfg = cfg.pde_config()
    if cfg.relaxed_file is not None:
        n_file, values = fileio.read_control_csv(cfg.relaxed_file)
        if n_file != grid.n:
            raise ValueError(
                f"relaxed control file has n={n_file}, expected n={grid.n}"
            )
        return values, objective(grid, values, pde_cfg), None
    result = solve_relaxation(grid, np.zeros(grid.num_cells), cfg.relax_params(), pde_cfg)
    if outdir is not None:
        _write_control(outdir, "relaxed", grid.n, result.control, "relaxed control")
        _write_relax_trace(outdir, "relax_trace", result.trace)
    return result.control, result.objective, result


def run_relax(cfg: ExperimentConfig) -> dict:
    t0 = time.perf_counter()
    grid = build_grid(cfg.n)
    outdir = _outdir(cfg)
    result = solve_relaxation(grid, np.zeros(grid.num_cells), cfg.relax_params(), cfg.pde_config())
    wall = time.perf_counter() - t0
    _write_control(outdir, "relaxed", grid.n, result.control, "relaxed control")
    _write_relax_trace(outdir, "relax_trace", result.trace)
    report = _report(
        cfg, "rel", result.objective, result.objective, None, result.iterations, wall,
        criticality=result.criticality, converged=result.converged, message=result.message,
    )
    fileio.write_report_json(outdir / "report.json", report)
    print(f"[relax] n={grid.n} objective={result.objective:.6e} "
          f"criticality={result.criticality:.3e} iterations={result.iterations} ({result.message})")
    return report


def run_cia(cfg: ExperimentConfig) -> dict:
    t0 = time.perf_counter()
    grid = build_grid(cfg.n)
    outdir = _outdir(cfg)
    pde_cfg = cfg.pde_config()
    relaxed, relaxed_objective, _ = _relaxed_control(cfg, grid, outdir)

    rounding_result = run_method(instance_from_control(grid, relaxed), cfg.method, cfg.theta)
    control = labels_to_control(grid, rounding_result.labels)
    j = objective(grid, control, pde_cfg)
    interface = interface_length(grid, control)
    extras = {
        "eta": rounding_result.eta,
        "jumps": rounding_result.jumps,
        "criticality": None,
    }
    if cfg.method == "cor":
        sur_result = run_method(instance_from_control(grid, relaxed), "sur")
        extras["coincides_with_sur"] = bool(
            np.array_equal(labels_to_control(grid, sur_result.labels), control)
        )
    wall = time.perf_counter() - t0
    stem = f"control_{cfg.method}"
    _write_control(outdir, stem, grid.n, control, f"cia ({cfg.method})")
    report = _report(cfg, f"cia_{cfg.method}", j, relaxed_objective, interface, 0, wall, **extras)
    fileio.write_report_json(outdir / "report.json", report)
    print(f"[cia:{cfg.method}] n={grid.n} objective={j:.6e} "
          f"gap={report['optimality_gap']:.3e} interface={interface:.3f} jumps={rounding_result.jumps}")
    return report


def _initial_control(cfg: ExperimentConfig, grid: Grid, outdir: Path):
    """Starting control for the trust-region run plus the relaxed reference
    used for the optimality gap."""
    relaxed, relaxed_objective, _ = _relaxed_control(cfg, grid, outdir)
    if cfg.init == "zero":
        start = np.zeros(grid.num_cells)
    elif cfg.init == "threshold":
        start = threshold_round(relaxed)
    elif cfg.init == "sur":
        start = labels_to_control(grid, run_method(instance_from_control(grid, relaxed), "sur").labels)
    elif cfg.init == "file":
        if cfg.init_file is None:
            raise ValueError("--init file requires --init-file")
        n_file, start = fileio.read_control_csv(cfg.init_file)
        if n_file != grid.n:
            raise ValueError(f"init control file has n={n_file}, expected n={grid.n}")
    else:
        raise ValueError(f"unknown init mode {cfg.init!r}")
    return start, relaxed_objective


def run_btr(cfg: ExperimentConfig) -> dict:
    t0 = time.perf_counter()
    grid = build_grid(cfg.n)
    outdir = _outdir(cfg)
    start, relaxed_objective = _initial_control(cfg, grid, outdir)
    result = btr_run(grid, start, cfg.tr_params(), cfg.pde_config())
    wall = time.perf_counter() - t0
    _write_control(outdir, "control_btr", grid.n, result.control, f"btr (init={cfg.init})")
    _write_btr_trace(outdir, "btr_trace", result.trace)
    interface = interface_length(grid, result.control)
    report = _report(
        cfg, f"btr_{cfg.init}", result.objective, relaxed_objective, interface,
        result.iterations, wall, accepted_steps=result.accepted_steps,
        termination=result.termination, criticality=result.criticality,
    )
    fileio.write_report_json(outdir / "report.json", report)
    print(f"[btr:{cfg.init}] n={grid.n} objective={result.objective:.6e} "
          f"gap={report['optimality_gap']:.3e} interface={interface:.3f} "
          f"iterations={result.iterations} ({result.termination})")
    return report


def run_hybrid(cfg: ExperimentConfig) -> dict:
    t0 = time.perf_counter()
    if cfg.coarse_n is None:
        raise ValueError("hybrid requires --coarse-n")
    grid = build_grid(cfg.n)
    coarse = build_grid(cfg.coarse_n)
    if grid.n % coarse.n != 0:
        raise ValueError(f"--coarse-n {coarse.n} must divide --n {grid.n}")
    outdir = _outdir(cfg)
    relaxed, relaxed_objective, _ = _relaxed_control(cfg, grid, outdir)

    coarse_avg = restrict_averages(relaxed, grid.n, coarse.n)
    coarse_control = labels_to_control(
        coarse, run_method(instance_from_control(coarse, coarse_avg), "sur").labels
    )
    start = prolongate(coarse_control, coarse.n, grid.n)
    _write_control(outdir, f"coarse_sur_{coarse.n}", coarse.n, coarse_control,
                   f"sur on {coarse.n}x{coarse.n}")
    _write_control(outdir, "init", grid.n, start, f"sur from {coarse.n}x{coarse.n}")

    btr_t0 = time.perf_counter()
    result = btr_run(grid, start, cfg.tr_params(), cfg.pde_config())
    btr_time = time.perf_counter() - btr_t0
    wall = time.perf_counter() - t0
    _write_control(outdir, "control_btr", grid.n, result.control, f"btr from sur {coarse.n}")
    _write_btr_trace(outdir, "btr_trace", result.trace)
    interface = interface_length(grid, result.control)
    report = _report(
        cfg, f"hybrid_sur{coarse.n}", result.objective, relaxed_objective, interface,
        result.iterations, wall, accepted_steps=result.accepted_steps,
        termination=result.termination, criticality=result.criticality, btr_time_s=btr_time,
    )
    fileio.write_report_json(outdir / "report.json", report)
    print(f"[hybrid:{coarse.n}->{grid.n}] objective={result.objective:.6e} "
          f"gap={report['optimality_gap']:.3e} interface={interface:.3f} iterations={result.iterations}")
    return report


def run_metrics(cfg: ExperimentConfig) -> dict:
    t0 = time.perf_counter()
    if cfg.control_file is None:
        raise ValueError("metrics requires --control-file")
    n_file, control = fileio.read_control_csv(cfg.control_file)
    if cfg.n is not None and cfg.n != n_file:
        raise ValueError(f"control file has n={n_file}, configured grid has n={cfg.n}")
    grid = build_grid(n_file)
    pde_cfg = cfg.pde_config()
    interface = interface_length(grid, control)  # rejects non-binary controls
    j = objective(grid, control, pde_cfg)
    relaxed_objective = None
    if cfg.relaxed_file is not None:
        n_rel, relaxed = fileio.read_control_csv(cfg.relaxed_file)
        if n_rel != n_file:
            raise ValueError(f"relaxed file has n={n_rel}, control file has n={n_file}")
        relaxed_objective = objective(grid, relaxed, pde_cfg)
    wall = time.perf_counter() - t0
    outdir = _outdir(cfg)
    report = _report(cfg, "metrics", j, relaxed_objective, interface, 0, wall)
    fileio.write_report_json(outdir / "report.json", report)
    gap = report["optimality_gap"]
    print(f"[metrics] n={n_file} objective={j:.6e} interface={interface:.3f}"
          + (f" gap={gap:.3e}" if gap is not None else ""))
    return report


def _sweep_ns(cfg: ExperimentConfig) -> list[int]:
    ns = sorted({int(part) for part in cfg.ns.split(",") if part.strip()})
    if cfg.full and FULL_SWEEP_N not in ns:
        ns.append(FULL_SWEEP_N)
        ns.sort()
    return ns


def run_sweep(cfg: ExperimentConfig) -> dict:
    """Mesh-refinement study: per mesh size, solve the relaxation and run the
    trust-region descent from zero.  With --full, also assemble the method
    comparison and the coarse-rounding hybridization study on the finest grid."""
    outdir = _outdir(cfg)
    pde_cfg = cfg.pde_config()
    ns = _sweep_ns(cfg)
    table2_rows = []
    by_n: dict[int, dict] = {}
    for n in ns:
        sub = Path(outdir) / f"n{n:03d}"
        sub.mkdir(parents=True, exist_ok=True)
        grid = build_grid(n)
        t0 = time.perf_counter()
        rel = solve_relaxation(grid, np.zeros(grid.num_cells), cfg.relax_params(), pde_cfg)
        rel_time = time.perf_counter() - t0
        _write_control(sub, "relaxed", n, rel.control, f"relaxed {n}x{n}")
        _write_relax_trace(sub, "relax_trace", rel.trace)

        t0 = time.perf_counter()
        result = btr_run(grid, np.zeros(grid.num_cells), cfg.tr_params(), pde_cfg)
        btr_time = time.perf_counter() - t0
        _write_control(sub, "control_btr", n, result.control, f"btr from zero {n}x{n}")
        _write_btr_trace(sub, "btr_trace", result.trace)

        gap = result.objective - rel.objective
        interface = interface_length(grid, result.control)
        by_n[n] = {
            "grid": grid, "relaxed": rel, "btr": result, "gap": gap,
            "interface": interface, "btr_time": btr_time, "rel_time": rel_time,
        }
        table2_rows.append([n, rel.objective, result.objective, gap,
                            result.iterations, interface, btr_time])
        print(f"[sweep] n={n} gap={gap:.3e} iterations={result.iterations} "
              f"interface={interface:.3f} (btr {btr_time:.1f}s, relax {rel_time:.1f}s)")

    fileio.write_rows_csv(
        outdir / "table2.csv",
        ["mesh_n", "relaxed_objective", "objective", "optimality_gap",
         "btr_iterations", "interface_length", "btr_time_s"],
        table2_rows,
    )
    report = _report(cfg, "sweep", table2_rows[-1][2], table2_rows[-1][1], None, 0, 0.0,
                     mesh_sizes=ns)
    if cfg.full:
        _run_full_studies(cfg, outdir, pde_cfg, by_n[FULL_SWEEP_N])
    fileio.write_report_json(outdir / "report.json", report)
    return report


def _run_full_studies(cfg: ExperimentConfig, outdir: Path, pde_cfg: PdeConfig, fine: dict) -> None:
    grid: Grid = fine["grid"]
    relaxed = fine["relaxed"].control
    rel_objective = fine["relaxed"].objective
    tr_params = cfg.tr_params()

    # method comparison on the finest grid
    cases: dict[str, dict] = {
        "rel": {"objective": rel_objective, "gap": 0.0, "time_s": fine["rel_time"],
                "btr_iterations": None, "interface_length": None},
    }
    sur_control = None
    for method, theta in (("cor", 1.0), ("shg", 10.0), ("sur", 1.0)):
        t0 = time.perf_counter()
        res = run_method(instance_from_control(grid, relaxed), method, theta)
        control = labels_to_control(grid, res.labels)
        elapsed = fine["rel_time"] + (time.perf_counter() - t0)
        j = objective(grid, control, pde_cfg)
        _write_control(outdir, f"control_{method}", grid.n, control, f"cia ({method})")
        cases[f"cia_{method}"] = {
            "objective": j, "gap": j - rel_objective, "time_s": elapsed,
            "btr_iterations": None, "interface_length": interface_length(grid, control),
        }
        if method == "sur":
            sur_control = control
        print(f"[full] cia_{method} gap={j - rel_objective:.3e}")

    starts = {
        "cia_sur_btr": sur_control,
        "rel_btr": threshold_round(relaxed),
        "btr": np.zeros(grid.num_cells),
    }
    for name, start in starts.items():
        if name == "btr":
            result: BtrResult = fine["btr"]
            btr_time = fine["btr_time"]
        else:
            t0 = time.perf_counter()
            result = btr_run(grid, start, tr_params, pde_cfg)
            btr_time = time.perf_counter() - t0
            _write_control(outdir, f"control_{name}", grid.n, result.control, name)
        cases[name] = {
            "objective": result.objective, "gap": result.objective - rel_objective,
            "time_s": fine["rel_time"] + btr_time, "btr_iterations": result.iterations,
            "interface_length": interface_length(grid, result.control),
        }
        print(f"[full] {name} gap={cases[name]['gap']:.3e} iterations={result.iterations}")

    order = ["rel", "cia_cor", "cia_shg", "cia_sur", "cia_sur_btr", "rel_btr", "btr"]
    rows = []
    for metric in ("objective", "gap", "time_s", "btr_iterations", "interface_length"):
        row = [metric]
        for case in order:
            value = cases[case][metric]
            row.append("" if value is None else value)
        rows.append(row)
    fileio.write_rows_csv(outdir / "table1.csv", ["metric"] + order, rows)

    # hybridization: rounding on coarser grids, descent on the fine one
    table3_rows = []
    for coarse_n in HYBRID_COARSE_NS:
        coarse = build_grid(coarse_n)
        coarse_avg = restrict_averages(relaxed, grid.n, coarse_n)
        coarse_control = labels_to_control(
            coarse, run_method(instance_from_control(coarse, coarse_avg), "sur").labels
        )
        start = prolongate(coarse_control, coarse_n, grid.n)
        t0 = time.perf_counter()
        result = btr_run(grid, start, tr_params, pde_cfg)
        btr_time = time.perf_counter() - t0
        gap = result.objective - rel_objective
        interface = interface_length(grid, result.control)
        table3_rows.append([coarse_n, gap, btr_time, result.iterations, interface])
        _write_control(outdir, f"control_hybrid_{coarse_n:03d}", grid.n, result.control,
                       f"btr from sur {coarse_n}x{coarse_n}")
        print(f"[full] hybrid coarse={coarse_n} gap={gap:.3e} "
              f"iterations={result.iterations} interface={interface:.3f}")
    fileio.write_rows_csv(
        outdir / "table3.csv",
        ["sur_mesh_n", "optimality_gap", "btr_time_s", "btr_iterations", "interface_length"],
        table3_rows,
    )


RUNNERS = {
    "relax": run_relax,
    "cia": run_cia,
    "btr": run_btr,
    "hybrid": run_hybrid,
    "metrics": run_metrics,
    "sweep": run_sweep,
}


def _add_solver_args(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--epsilon", type=float, default=1e-2, help="diffusion coefficient")
    sp.add_argument("--cg-tol", type=float, default=1e-10, help="linear solver relative tolerance")
    sp.add_argument("--out", default="out", help="output directory")
    sp.add_argument("--seed", type=int, default=None, help="seed echoed into reports")


def _add_relax_args(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--relax-max-iter", type=int, default=5000)
    sp.add_argument("--crit-tol", type=float, default=1e-9, help="criticality stopping tolerance")
    sp.add_argument("--armijo-c", type=float, default=1e-4)
    sp.add_argument("--armijo-shrink", type=float, default=0.5)
    sp.add_argument("--step0", type=float, default=1.0)
    sp.add_argument("--bb", action=argparse.BooleanOptionalAction, default=True,
                    help="Barzilai-Borwein trial steps in the line search")


def _add_tr_args(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--sigma1", type=float, default=0.1)
    sp.add_argument("--sigma2", type=float, default=0.75)
    sp.add_argument("--omega", type=float, default=0.5)
    sp.add_argument("--delta0", type=float, default=0.4)
    sp.add_argument("--delta-max", type=float, default=2.0)
    sp.add_argument("--max-iter", type=int, default=1_000_000, help="trust-region iteration cap")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="btrcia",
        description="Binary control of an elliptic tracking problem: relaxation, "
                    "rounding, and binary trust-region descent.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("relax", help="solve the box relaxation from zero")
    sp.add_argument("--n", type=int, required=True, help="cells per side (power of two)")
    _add_solver_args(sp)
    _add_relax_args(sp)

    sp = sub.add_parser("cia", help="solve the relaxation and round to binary")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--method", choices=["sur", "cor", "shg"], default="sur")
    sp.add_argument("--theta", type=float, default=1.0, help="deviation budget scale for shg")
    sp.add_argument("--relaxed-file", default=None, help="reuse a stored relaxed control")
    _add_solver_args(sp)
    _add_relax_args(sp)

    sp = sub.add_parser("btr", help="binary trust-region descent")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--init", choices=["zero", "threshold", "sur", "file"], default="zero")
    sp.add_argument("--init-file", default=None)
    sp.add_argument("--relaxed-file", default=None)
    _add_solver_args(sp)
    _add_relax_args(sp)
    _add_tr_args(sp)

    sp = sub.add_parser("hybrid", help="coarse-grid rounding, fine-grid descent")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--coarse-n", type=int, required=True)
    sp.add_argument("--relaxed-file", default=None)
    _add_solver_args(sp)
    _add_relax_args(sp)
    _add_tr_args(sp)

    sp = sub.add_parser("metrics", help="re-evaluate a stored binary control")
    sp.add_argument("--control-file", required=True)
    sp.add_argument("--relaxed-file", default=None)
    sp.add_argument("--n", type=int, default=None, help="expected grid size (validated)")
    _add_solver_args(sp)

    sp = sub.add_parser("sweep", help="mesh refinement study")
    sp.add_argument("--ns", default="32,64,128", help="comma-separated mesh sizes")
    sp.add_argument("--full", action="store_true",
                    help="include the 256 grid plus the comparison and hybridization tables")
    _add_solver_args(sp)
    _add_relax_args(sp)
    _add_tr_args(sp)

    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    fields = {k: v for k, v in vars(args).items() if k in ExperimentConfig.__dataclass_fields__}
    return ExperimentConfig(**fields)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = config_from_args(args)
    try:
        RUNNERS[cfg.command](cfg)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

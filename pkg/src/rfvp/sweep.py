"""Sweep harness: run every requested estimator over a (ratio, lambda) grid.

Grid points are dispatched to a worker pool; each (activation, ratio) unit
derives its own counter-based random streams from the master seed, so the
emitted rows do not depend on worker count or on which other estimators run.
Rows are merged single-threaded and ordered canonically by
(activation, lambda, ratio, estimator), which makes CSV diffs meaningful.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig, build_profiles
from .detequiv import AssumptionError, ConvergenceError, EtaSchedule, ResidueError, square_risks
from .gaussfun import parse_activation
from .mc import ModelParams, RiskReport, lozenge_risk_grid, monte_carlo_risk_grid
from .profiles import Dimensions

CSV_FIELDS = (
    "ratio", "lambda", "activation", "estimator", "e_train", "e_test",
    "std_err_train", "std_err_test", "wall_time_ms", "iterations",
    "imag_residue", "status",
)


@dataclass
class SweepRow:
    ratio: float
    lam: float
    activation: str
    estimator: str
    e_train: float = float("nan")
    e_test: float = float("nan")
    std_err_train: float = 0.0
    std_err_test: float = 0.0
    wall_time_ms: float = 0.0
    iterations: int = 0
    imag_residue: float = 0.0
    status: str = "ok"

    def as_csv_values(self):
        return (
            _fmt(self.ratio), _fmt(self.lam), self.activation, self.estimator,
            _fmt(self.e_train), _fmt(self.e_test), _fmt(self.std_err_train),
            _fmt(self.std_err_test), _fmt(self.wall_time_ms),
            str(self.iterations), _fmt(self.imag_residue), self.status,
        )


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def _row_from_report(ratio, lam, activation, rep: RiskReport, wall_ms, iterations=0, residue=0.0):
    return SweepRow(
        ratio, lam, activation, rep.estimator, rep.e_train, rep.e_test,
        rep.std_err_train, rep.std_err_test, wall_ms, iterations, residue,
        "ok" if not rep.flags else "ok;" + ";".join(rep.flags),
    )


def _unit_stream(ai: int, ri: int, family: int) -> int:
    # one independent counter-based stream per (activation, ratio, family)
    return (ai * 4096 + ri) * 4 + family


def _run_unit(cfg: ExperimentConfig, profiles, ai: int, ri: int) -> list[SweepRow]:
    """All rows for one (activation, ratio) unit across the lambda grid."""
    profile, profile_test = profiles
    activation = cfg.activations[ai]
    ratio = cfg.ratio_grid[ri]
    h = parse_activation(activation)
    m = max(1, round(ratio * cfg.n))
    dims = Dimensions(cfg.n, m, cfg.p, cfg.n_test)
    base = ModelParams(cfg.alpha, cfg.sigma, cfg.lambda_grid[0], cfg.entry_law)
    schedule = EtaSchedule(cfg.c_eta, cfg.eta_exponent, cfg.delta)
    rows: list[SweepRow] = []

    mc_wanted = [e for e in ("empirical", "trace_form") if e in cfg.estimators]
    if mc_wanted:
        t0 = time.perf_counter()
        try:
            grid = monte_carlo_risk_grid(
                profile, profile_test, h, base, m, cfg.lambda_grid,
                trials=cfg.trials, seed=cfg.seed, estimators=mc_wanted,
                stream=_unit_stream(ai, ri, 0),
            )
            wall = (time.perf_counter() - t0) * 1000 / len(cfg.lambda_grid)
            for lam, reports in grid.items():
                for rep in reports.values():
                    rows.append(_row_from_report(ratio, lam, activation, rep, wall))
        except (ValueError, ArithmeticError) as exc:
            for lam in cfg.lambda_grid:
                for est in mc_wanted:
                    rows.append(SweepRow(ratio, lam, activation, est, status=f"error:{exc}"))

    if "lozenge" in cfg.estimators:
        t0 = time.perf_counter()
        try:
            grid = lozenge_risk_grid(
                profile, profile_test, h, base, m, cfg.lambda_grid,
                trials=cfg.trials, seed=cfg.seed, chaos=cfg.chaos_form,
                stream=_unit_stream(ai, ri, 1),
            )
            wall = (time.perf_counter() - t0) * 1000 / len(cfg.lambda_grid)
            for lam, rep in grid.items():
                rows.append(_row_from_report(ratio, lam, activation, rep, wall))
        except (ValueError, ArithmeticError) as exc:
            for lam in cfg.lambda_grid:
                rows.append(SweepRow(ratio, lam, activation, "lozenge", status=f"error:{exc}"))

    if "square" in cfg.estimators:
        for lam in cfg.lambda_grid:
            t0 = time.perf_counter()
            try:
                rep, diag = square_risks(
                    profile, profile_test, h,
                    ModelParams(cfg.alpha, cfg.sigma, lam, cfg.entry_law),
                    dims, chaos=cfg.chaos_form, schedule=schedule,
                )
                wall = (time.perf_counter() - t0) * 1000
                rows.append(
                    _row_from_report(
                        ratio, lam, activation, rep, wall,
                        iterations=diag.get("iterations", 0),
                        residue=diag.get("imag_residue", 0.0),
                    )
                )
            except (AssumptionError, ConvergenceError, ResidueError, ValueError) as exc:
                rows.append(SweepRow(ratio, lam, activation, "square", status=f"error:{exc}"))
    return rows


def run_sweep(cfg: ExperimentConfig) -> list[SweepRow]:
    """Evaluate the whole grid; deterministic for a fixed seed and estimator set."""
    profiles = build_profiles(cfg)
    units = [(ai, ri) for ai in range(len(cfg.activations)) for ri in range(len(cfg.ratio_grid))]
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            chunks = list(pool.map(lambda u: _run_unit(cfg, profiles, *u), units))
    else:
        chunks = [_run_unit(cfg, profiles, *u) for u in units]
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda r: (r.activation, r.lam, r.ratio, r.estimator))
    return rows


def detect_peak(curve) -> float | None:
    """Grid ratio of the strict interior maximum of a risk curve.

    ``curve`` is an iterable of (ratio, value) pairs (at least five); returns
    None when the maximum sits on the boundary (no interior peak).
    """
    pts = sorted((float(r), float(v)) for r, v in curve)
    if len(pts) < 5:
        raise ValueError("peak detection needs at least 5 grid points")
    values = [v for _, v in pts]
    k = int(np.argmax(values))
    if k == 0 or k == len(pts) - 1:
        return None
    return pts[k][0]


def rows_to_curve(rows: list[SweepRow], activation: str, lam: float, estimator: str):
    sel = [
        (r.ratio, r.e_test)
        for r in rows
        if r.activation == activation and r.lam == lam and r.estimator == estimator
        and r.status.startswith("ok")
    ]
    return sorted(sel)


def emit_csv(rows: list[SweepRow], path) -> None:
    """Write the sweep schema; floats carry 10 significant digits."""
    with open(path, "w") as fh:
        fh.write(",".join(CSV_FIELDS) + "\n")
        for row in rows:
            fh.write(",".join(row.as_csv_values()) + "\n")

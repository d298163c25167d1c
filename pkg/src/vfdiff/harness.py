"""Config-driven runs: steady state, evolution, diagnostics and their artifacts.

Every numeric artifact is a deterministic function of the config, so reruns
reproduce the CSV and JSON files byte for byte.  Wall-clock time is kept
apart in ``timing.json``.
"""
from __future__ import annotations

import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .config import ExperimentConfig
from .criticality import classify_regime
from .diagnostics import csv_header, fit_decay_rate, gradient_bound_check
from .evolution import Problem, evolve
from .grid import Field, Grid, make_grid
from .io import read_field_csv, write_field_csv, write_json, write_rows
from .sources import SourceTerm, TimeProfile, eval_source, load_tabulated_csv, project_zero_mean
from .steady import build_steady_state

logger = logging.getLogger(__name__)


class RunFailure(RuntimeError):
    pass


def build_grid(cfg: ExperimentConfig) -> Grid:
    return make_grid(cfg.dimension, cfg.extents, cfg.resolutions)


def cosine_mode(grid: Grid, modes) -> Field:
    """``prod_a cos(modes[a] pi x_a / L_a)`` at cell centers."""
    vals = np.ones(grid.shape)
    for coord, mode, L in zip(grid.mesh(), modes, grid.extents):
        vals = vals * np.cos(mode * np.pi * coord / L)
    return Field(grid, vals)


def build_source(cfg: ExperimentConfig, grid: Grid) -> SourceTerm:
    if cfg.source_profile == "file":
        return load_tabulated_csv(Path(cfg.base_dir) / cfg.source_file, grid)
    if cfg.source_profile == "zero":
        phi = grid.constant(0.0)
    else:
        phi = project_zero_mean(cosine_mode(grid, cfg.source_modes) * cfg.source_amplitude)
    if cfg.time_profile == "constant":
        return SourceTerm.time_homogeneous(phi)
    return SourceTerm.separable(TimeProfile("exp_decay", rate=cfg.time_rate), phi)


def build_initial(cfg: ExperimentConfig, grid: Grid, source: SourceTerm, k: float) -> Field:
    if cfg.v0_kind == "constant":
        return grid.constant(cfg.v0_constant)
    if cfg.v0_kind == "file":
        return read_field_csv(Path(cfg.base_dir) / cfg.v0_file, grid)
    base = build_steady_state(source.limit_field(), k, cfg.v0_mass).v_infinity
    v0 = base + cosine_mode(grid, cfg.v0_modes) * cfg.v0_perturbation
    if v0.min() <= 0:
        raise RunFailure("steady state plus perturbation is not positive; lower the amplitude")
    return v0


@dataclass
class RunSummary:
    config: dict
    status: str = "ok"
    error: Optional[str] = None
    regime: Optional[dict] = None
    steady_state: Optional[dict] = None
    final: Optional[dict] = None
    rate_fit: Optional[dict] = None
    rate_fit_note: Optional[str] = None
    termination: Optional[str] = None
    mass_drift: Optional[float] = None
    u_sum_drift: Optional[float] = None
    gradient_bound: Optional[dict] = None
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("wall_time")
        return d


def _record_dict(rec, ps) -> dict:
    return dict(zip(csv_header(ps), rec.row(ps)))


def write_trajectory(traj, out: Path, ps) -> None:
    write_rows(out / "diagnostics.csv", csv_header(ps), (r.row(ps) for r in traj.records))
    s = traj.steps
    write_rows(out / "steps.csv", ["t", "dt", "v_min", "v_max", "mass", "u_sum", "energy"],
               zip(s["t"], s["dt"], s["v_min"], s["v_max"], s["mass"], s["u_sum"], s["energy"]))
    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    entries = []
    for i, (t, v) in enumerate(zip(traj.times, traj.snapshots)):
        name = f"snapshot_{i:05d}.csv"
        write_field_csv(snap_dir / name, v)
        entries.append({"file": f"snapshots/{name}", "t": t})
    write_json(out / "manifest.json", {
        "scheme": traj.scheme,
        "k": traj.k,
        "mass": traj.mass,
        "snapshots": entries,
        "termination": traj.termination,
    })


def fit_rate(times, dist, floor_rel: float, t_min=None, scale: float = 1.0):
    """Decay fit of the H1 distance, or ``(None, reason)`` when there is no decay to fit."""
    dist = np.asarray(dist, dtype=float)
    if dist.size == 0 or float(np.max(dist)) <= 1e-13 * scale:
        return None, "insufficient decay"
    try:
        fit = fit_decay_rate(times, dist, floor_rel=floor_rel, t_min=t_min)
    except ValueError as exc:
        return None, f"insufficient decay: {exc}"
    if not fit.decay_rate > 0:
        return None, f"insufficient decay: fitted rate {fit.decay_rate:.3e} is not positive"
    return fit, None


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> RunSummary:
    """Build, classify, evolve and write all artifacts; failures land in the summary."""
    start = time.perf_counter()
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = RunSummary(config=cfg.echo())
    ps = cfg.entropy_p
    try:
        grid = build_grid(cfg)
        k = cfg.k
        source = build_source(cfg, grid)
        v0 = build_initial(cfg, grid, source, k)
        problem = Problem(grid, k, source, v0)
        regime = classify_regime(cfg.dimension, k, cfg.r, cfg.s, source.is_time_homogeneous,
                                 v0=v0, f0=eval_source(source, 0.0))
        summary.regime = regime.to_dict()

        steady = build_steady_state(source.limit_field(), k, problem.M)
        summary.steady_state = steady.summary()
        write_field_csv(out / "steady.csv", steady.v_infinity)

        traj = evolve(problem, cfg.scheme, cfg.T, cfg.dt0, cfg.record_every,
                      v_infinity=steady.v_infinity, entropy_ps=ps)
        write_trajectory(traj, out, ps)
        summary.termination = traj.termination
        summary.final = _record_dict(traj.records[-1], ps)
        if traj.steps["mass"]:
            M = problem.M
            summary.mass_drift = float(np.max(np.abs(traj.step_array("mass") - M)) / M)
            summary.u_sum_drift = float(np.max(np.abs(traj.step_array("u_sum") - M)) / M)
        gb = gradient_bound_check(traj)
        summary.gradient_bound = {"bounded": gb.holds, **gb.detail}

        t, d = traj.series("h1_dist")
        fit, note = fit_rate(t, d, cfg.fit_floor, cfg.fit_t_min, scale=steady.v_infinity.sup_norm())
        summary.rate_fit = fit.to_dict() if fit is not None else None
        summary.rate_fit_note = note
        if fit is not None:
            write_json(out / "rate_fit.json", fit.to_dict())
        if traj.termination != "reached T":
            summary.status = "incomplete"
    except Exception as exc:  # the summary is the product, whatever went wrong
        logger.debug("run failed", exc_info=True)
        summary.status = "failed"
        summary.error = f"{type(exc).__name__}: {exc}"
    summary.wall_time = time.perf_counter() - start
    write_json(out / "summary.json", summary.to_dict())
    write_json(out / "timing.json", {"wall_time": summary.wall_time})
    return summary


def run_steady(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Steady state for the config's source limit and initial mass; writes CSV and JSON."""
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = build_grid(cfg)
    source = build_source(cfg, grid)
    v0 = build_initial(cfg, grid, source, cfg.k)
    M = Problem(grid, cfg.k, source, v0).M
    ss = build_steady_state(source.limit_field(), cfg.k, M)
    write_field_csv(out / "steady.csv", ss.v_infinity)
    info = ss.summary()
    write_json(out / "steady.json", info)
    return info


SWEEP_COLUMNS = ["k", "r", "s", "verdict", "lambda", "r_squared", "final_h1_dist", "mass_drift"]


def _sweep_point(args):
    cfg, out = args
    return run_experiment(cfg, out)


def run_sweep(cfg: ExperimentConfig, out_dir=None, jobs: int = 1) -> list:
    """Run every ``(k, r, s)`` point into its own subdirectory and aggregate ``sweep.csv``."""
    if not cfg.k_values or not cfg.r_values or not cfg.s_values:
        raise ValueError("sweep lists must be nonempty")
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    points = list(itertools.product(cfg.k_values, cfg.r_values, cfg.s_values))
    tasks = [(cfg.point(k, r, s), out / f"point_{i:03d}") for i, (k, r, s) in enumerate(points)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            summaries = list(pool.map(_sweep_point, tasks))
    else:
        summaries = [_sweep_point(t) for t in tasks]

    rows = []
    for (k, r, s), sm in zip(points, summaries):
        fit = sm.rate_fit or {}
        final = sm.final or {}
        rows.append([
            k, _num(r), _num(s),
            (sm.regime or {}).get("verdict", "invalid"),
            _num(fit.get("lambda", math.nan)), _num(fit.get("r_squared", math.nan)),
            _num(final.get("h1_dist", math.nan)),
            _num(sm.mass_drift if sm.mass_drift is not None else math.nan),
        ])
    write_rows(out / "sweep.csv", SWEEP_COLUMNS, rows)
    return summaries


def _num(x):
    x = float(x)
    if math.isinf(x):
        return "inf"
    if math.isnan(x):
        return "nan"
    return x

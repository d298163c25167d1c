"""Linearly implicit time stepping for ``v_t = v^k (lap v - f)`` and its PME form.

Two schemes are provided.  The v-form freezes the mobility ``v^k`` at the
old level, which makes ``sum (v_{n+1} - v_n) / v_n^k`` vanish exactly.  The
u-form works with ``u = v^(1-k)`` in flux form, ``u_t = div(u^-m grad u) +
f / (m - 1)``, and conserves ``sum u`` exactly.
"""
from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .grid import Field, Grid, divergence_matrix, integrate, laplacian_matrix
from .sources import SourceTerm, eval_source

logger = logging.getLogger(__name__)

SCHEMES = ("v_form", "u_form")
SOLVE_RTOL = 1e-10
LOG_CHANGE_MAX = 0.5


class PositivityError(ArithmeticError):
    """A step produced a non-positive cell; the caller should retry with a smaller step."""


class LinearSolveError(RuntimeError):
    pass


def to_u(v: Field, k: float) -> Field:
    """``u = v^(1-k)``."""
    _require_positive(v, "v")
    return Field(v.grid, v.values ** (1.0 - k))


def to_v(u: Field, k: float) -> Field:
    """Inverse of :func:`to_u`."""
    _require_positive(u, "u")
    return Field(u.grid, u.values ** (1.0 / (1.0 - k)))


def _require_positive(f: Field, name: str) -> None:
    bad = np.flatnonzero(~(f.flat > 0))
    if bad.size:
        i = int(bad[0])
        raise ValueError(f"{name} must be positive; cell {i} has value {f.flat[i]!r}")


@functools.lru_cache(maxsize=16)
def _cached_laplacian(grid: Grid) -> sp.csr_matrix:
    return laplacian_matrix(grid)


def _solve(A: sp.csr_matrix, b: np.ndarray) -> np.ndarray:
    x = spsolve(A.tocsc(), b)
    res = np.linalg.norm(A @ x - b)
    if not np.all(np.isfinite(x)) or res > SOLVE_RTOL * max(np.linalg.norm(b), 1e-300):
        raise LinearSolveError(f"linear solve failed (residual {res:.3e})")
    return x


def step_v_form(v_n: Field, dt: float, k: float, source: SourceTerm, t_next: float) -> Field:
    """One linearly implicit Euler step of the v-equation.

    Solves ``(v_{n+1} - v_n) / (dt v_n^k) = lap v_{n+1} - f(t_next)``.

    Raises
    ------
    PositivityError
        If any cell of the new state is not positive.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    _require_positive(v_n, "v_n")
    grid = v_n.grid
    inv_mob = 1.0 / (dt * v_n.flat ** k)
    A = sp.diags(inv_mob) - _cached_laplacian(grid)
    b = inv_mob * v_n.flat - eval_source(source, t_next).flat
    x = _solve(A, b)
    if not np.all(x > 0):
        raise PositivityError(f"v-form step produced min value {x.min():.3e}")
    return Field(grid, x)


def face_mobility(u: Field, m: float) -> list:
    """Per-axis face coefficients ``(arithmetic mean of neighbours)^(-m)``."""
    out = []
    for a in range(u.grid.ndim):
        n = u.grid.shape[a]
        lo = np.take(u.values, np.arange(n - 1), axis=a)
        hi = np.take(u.values, np.arange(1, n), axis=a)
        out.append((0.5 * (lo + hi)) ** (-m))
    return out


def step_u_form(u_n: Field, dt: float, m: float, source: SourceTerm, k: float, t_next: float) -> Field:
    """One conservative finite-volume step of ``u_t = div(u^-m grad u) + f / (m - 1)``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    _require_positive(u_n, "u_n")
    grid = u_n.grid
    D = divergence_matrix(grid, face_mobility(u_n, m))
    A = sp.identity(grid.size, format="csr") / dt - D
    b = u_n.flat / dt + eval_source(source, t_next).flat / (m - 1.0)
    x = _solve(A, b)
    if not np.all(x > 0):
        raise PositivityError(f"u-form step produced min value {x.min():.3e}")
    return Field(grid, x)


@dataclass
class Problem:
    """Grid, exponent, source and positive initial data."""

    grid: Grid
    k: float
    source: SourceTerm
    v0: Field

    def __post_init__(self):
        if not self.k > 1:
            raise ValueError(f"k must exceed 1, got {self.k}")
        if self.v0.grid != self.grid or self.source.grid != self.grid:
            raise ValueError("v0 and source must live on the problem grid")
        _require_positive(self.v0, "v0")

    @property
    def M(self) -> float:
        return integrate(self.v0 ** (1.0 - self.k))

    @property
    def m(self) -> float:
        return self.k / (self.k - 1.0)


@dataclass
class Trajectory:
    """Recorded snapshots, diagnostics and per-step history of one run."""

    scheme: str
    k: float
    mass: float
    times: List[float] = field(default_factory=list)
    snapshots: List[Field] = field(default_factory=list)
    records: list = field(default_factory=list)
    steps: dict = field(default_factory=lambda: {
        "t": [], "dt": [], "v_min": [], "v_max": [], "mass": [], "u_sum": [], "energy": []})
    termination: str = "running"
    v_infinity: Optional[Field] = None

    @property
    def dt_history(self) -> list:
        return self.steps["dt"]

    @property
    def final(self) -> Field:
        return self.snapshots[-1]

    def step_array(self, key: str) -> np.ndarray:
        return np.asarray(self.steps[key], dtype=float)

    def series(self, attr: str) -> tuple:
        """``(t, values)`` of one diagnostics attribute across records."""
        t = np.array([r.t for r in self.records])
        return t, np.array([getattr(r, attr) for r in self.records], dtype=float)


def _log_step(traj: Trajectory, t: float, dt: float, v: Field, u_sum: float, f: Field) -> None:
    from .diagnostics import energy, mass

    s = traj.steps
    s["t"].append(t)
    s["dt"].append(dt)
    s["v_min"].append(v.min())
    s["v_max"].append(v.max())
    s["mass"].append(mass(v, traj.k))
    s["u_sum"].append(u_sum)
    s["energy"].append(energy(v, f))


def evolve(problem: Problem, scheme: str = "v_form", T: float = 1.0, dt0: float = 1e-3,
           record_every: float = None, v_infinity: Field = None,
           entropy_ps: Sequence[float] = ()) -> Trajectory:
    """Integrate to time ``T`` with step control.

    A step is rejected, and ``dt`` halved, when it loses positivity or
    changes ``log v`` by more than 0.5 in some cell.  After five accepted
    steps at a reduced ``dt`` the step is doubled again, never above ``dt0``.
    Snapshots and diagnostics are recorded every ``record_every`` time units
    (default: every ``dt0``); steps are shortened to land on recording times.

    When ``dt`` falls below ``1e-14 T`` the run stops with termination reason
    ``"step underflow"`` and the partial trajectory is returned.
    """
    from .diagnostics import compute_record
    from .steady import build_steady_state

    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    if not T > 0:
        raise ValueError("T must be positive")
    if not dt0 > 0:
        raise ValueError("dt0 must be positive")
    if record_every is None:
        record_every = dt0
    if not record_every > 0:
        raise ValueError("record_every must be positive")

    k, m, source = problem.k, problem.m, problem.source
    M = problem.M
    if v_infinity is None:
        v_infinity = build_steady_state(source.limit_field(), k, M).v_infinity
    traj = Trajectory(scheme=scheme, k=k, mass=M, v_infinity=v_infinity)
    ps = tuple(entropy_ps)

    def record(t, v):
        traj.times.append(t)
        traj.snapshots.append(v)
        traj.records.append(compute_record(t, v, k, eval_source(source, t), v_infinity, M, ps))

    v = problem.v0
    u = to_u(v, k)
    t = 0.0
    record(t, v)
    n_records = int(math.floor(T / record_every + 1e-9))
    record_times = [j * record_every for j in range(1, n_records + 1)]
    if not record_times or record_times[-1] < T * (1 - 1e-12):
        record_times.append(T)
    next_rec = 0

    dt = dt0
    reduced_streak = 0
    dt_min = 1e-14 * T
    while next_rec < len(record_times):
        target = record_times[next_rec]
        remaining = target - t
        landing = dt >= remaining * (1 - 1e-10)
        h = remaining if landing else dt
        t_next = target if landing else t + h
        try:
            if scheme == "v_form":
                v_new = step_v_form(v, h, k, source, t_next)
                u_new = None
            else:
                u_new = step_u_form(u, h, m, source, k, t_next)
                v_new = to_v(u_new, k)
            change = float(np.max(np.abs(np.log(v_new.values) - np.log(v.values))))
            if change > LOG_CHANGE_MAX:
                raise PositivityError(f"log-change {change:.3f} exceeds {LOG_CHANGE_MAX}")
        except (PositivityError, LinearSolveError) as exc:
            dt = h / 2.0
            reduced_streak = 0
            logger.debug("t=%.6g: step %.3e rejected (%s)", t, h, exc)
            if dt < dt_min:
                traj.termination = "step underflow"
                return traj
            continue

        t = t_next
        v = v_new
        u = u_new if u_new is not None else to_u(v, k)
        _log_step(traj, t, h, v, integrate(u), eval_source(source, t))
        if landing:
            record(t, v)
            next_rec += 1
        if dt < dt0:
            reduced_streak += 1
            if reduced_streak >= 5:
                dt = min(2.0 * dt, dt0)
                reduced_streak = 0
    traj.termination = "reached T"
    return traj

"""Zero-mean source terms f(x, t) and their mixed space-time norms."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .grid import Field, Grid, integrate


def project_zero_mean(field: Field) -> Field:
    """Subtract the mean so the field integrates to zero."""
    mean = integrate(field) / field.grid.volume
    return field - mean


@dataclass(frozen=True)
class TimeProfile:
    """Scalar time factor ``g(t)`` of a separable source.

    ``kind`` is one of ``"constant"``, ``"exp_decay"`` (``g = exp(-rate t)``)
    or ``"tabulated"`` (piecewise linear through ``samples``, clamped at the ends).
    """

    kind: str = "constant"
    rate: float = 1.0
    samples: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("constant", "exp_decay", "tabulated"):
            raise ValueError(f"unknown time profile {self.kind!r}")
        if self.kind == "tabulated":
            if not self.samples or len(self.samples) < 1:
                raise ValueError("tabulated time profile needs samples")
            ts = [t for t, _ in self.samples]
            if any(b <= a for a, b in zip(ts, ts[1:])):
                raise ValueError("time samples must be strictly increasing")

    def __call__(self, t: float) -> float:
        if self.kind == "constant":
            return 1.0
        if self.kind == "exp_decay":
            return math.exp(-self.rate * t)
        ts, gs = zip(*self.samples)
        return float(np.interp(t, ts, gs))

    def limit(self) -> float:
        if self.kind == "constant":
            return 1.0
        if self.kind == "exp_decay":
            return 0.0 if self.rate > 0 else 1.0
        return float(self.samples[-1][1])


class SourceTerm:
    """Zero-mean source ``f(x, t)``.

    Use the constructors :meth:`time_homogeneous`, :meth:`separable` and
    :meth:`tabulated`.  Every stored field is projected to zero mean, and
    tabulated interpolants are re-projected after each evaluation.
    """

    def __init__(self, kind: str, grid: Grid, phi: Optional[Field] = None,
                 profile: Optional[TimeProfile] = None,
                 times: Optional[np.ndarray] = None, fields: Optional[Sequence[Field]] = None):
        self.kind = kind
        self.grid = grid
        self.phi = project_zero_mean(phi) if phi is not None else None
        self.profile = profile
        self.times = None if times is None else np.asarray(times, dtype=float)
        self.fields = None if fields is None else [project_zero_mean(f) for f in fields]
        self.zero_mean_enforced = True

    @classmethod
    def time_homogeneous(cls, phi: Field) -> "SourceTerm":
        return cls("time_homogeneous", phi.grid, phi=phi)

    @classmethod
    def zero(cls, grid: Grid) -> "SourceTerm":
        return cls.time_homogeneous(grid.constant(0.0))

    @classmethod
    def separable(cls, profile, phi: Field) -> "SourceTerm":
        if not isinstance(profile, TimeProfile):
            profile = TimeProfile(**profile) if isinstance(profile, dict) else TimeProfile(profile)
        return cls("separable", phi.grid, phi=phi, profile=profile)

    @classmethod
    def tabulated(cls, times: Sequence[float], fields: Sequence[Field]) -> "SourceTerm":
        times = np.asarray(times, dtype=float)
        if times.ndim != 1 or times.size == 0 or len(fields) != times.size:
            raise ValueError("need one field per time sample")
        if np.any(np.diff(times) <= 0):
            raise ValueError("time samples must be strictly increasing")
        grid = fields[0].grid
        for f in fields:
            if f.grid != grid:
                raise ValueError("all tabulated fields must share one grid")
        return cls("tabulated", grid, times=times, fields=list(fields))

    @property
    def is_time_homogeneous(self) -> bool:
        if self.kind == "time_homogeneous":
            return True
        if self.kind == "separable":
            return self.profile.kind == "constant"
        return len(self.fields) == 1

    def limit_field(self) -> Field:
        """The large-time limit ``f_inf``."""
        if self.kind == "time_homogeneous":
            return self.phi
        if self.kind == "separable":
            return self.phi * self.profile.limit()
        return self.fields[-1]

    def __call__(self, t: float) -> Field:
        return eval_source(self, t)


def eval_source(source: SourceTerm, t: float) -> Field:
    """``f(., t)``; tabulated sources interpolate linearly and clamp outside their range."""
    if source.kind == "time_homogeneous":
        return source.phi
    if source.kind == "separable":
        return source.phi * source.profile(t)
    ts = source.times
    if t <= ts[0]:
        return source.fields[0]
    if t >= ts[-1]:
        return source.fields[-1]
    j = int(np.searchsorted(ts, t, side="right")) - 1
    theta = (t - ts[j]) / (ts[j + 1] - ts[j])
    mixed = source.fields[j] * (1.0 - theta) + source.fields[j + 1] * theta
    return project_zero_mean(mixed)


def source_time_derivative(source: SourceTerm, t: float, eps: float = 1e-6) -> Field:
    """Centered difference of :func:`eval_source` in time (one-sided at ``t < eps``)."""
    if source.is_time_homogeneous:
        return source.grid.constant(0.0)
    lo = max(t - eps, 0.0)
    hi = t + eps
    return (eval_source(source, hi) - eval_source(source, lo)) / (hi - lo)


def _space_norm(f: Field, r: float) -> float:
    if math.isinf(r):
        return f.sup_norm()
    return integrate(Field(f.grid, np.abs(f.values) ** r)) ** (1.0 / r)


def ls_lr_norm(source: SourceTerm, s: float, r: float, t_grid: Sequence[float]) -> float:
    """Discrete ``L^s(0, T; L^r(Omega))`` norm on the sampling times ``t_grid``.

    The space norm uses the midpoint rule (max over cells when ``r = inf``),
    the time norm the trapezoid rule on ``t_grid`` (max when ``s = inf``).
    """
    if not (s >= 1):
        raise ValueError(f"time exponent s must lie in [1, inf], got {s}")
    if not (r > 1):
        raise ValueError(f"space exponent r must lie in (1, inf], got {r}")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0:
        raise ValueError("t_grid must be a nonempty 1D sequence")
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    inner = np.array([_space_norm(eval_source(source, t), r) for t in t_grid])
    if math.isinf(s):
        return float(inner.max())
    if t_grid.size == 1:
        return 0.0
    return float(np.trapezoid(inner ** s, t_grid) ** (1.0 / s))


def time_derivative_l1_l2(source: SourceTerm, t_grid: Sequence[float]) -> float:
    """Difference-quotient proxy for ``int ||f_t||_2 dt`` over ``t_grid``.

    Only a diagnostic: a bounded value on a finite window says nothing about
    integrability on the half line.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    total = 0.0
    prev = eval_source(source, t_grid[0])
    for t0, t1 in zip(t_grid[:-1], t_grid[1:]):
        cur = eval_source(source, t1)
        total += _space_norm(cur - prev, 2.0)
        prev = cur
    return total


def load_tabulated_csv(path, grid: Grid) -> SourceTerm:
    """Read a tabulated source: header ``t,cell_0,...,cell_{M-1}``, one row per time."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = ["t"] + [f"cell_{i}" for i in range(grid.size)]
        if [h.strip() for h in header] != expected:
            raise ValueError(
                f"{path}: header must be t,cell_0,...,cell_{grid.size - 1} ({grid.size} cells)"
            )
        times, fields = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != grid.size + 1:
                raise ValueError(f"{path}:{lineno}: expected {grid.size + 1} columns, got {len(row)}")
            times.append(float(row[0]))
            fields.append(Field(grid, [float(x) for x in row[1:]]))
    return SourceTerm.tabulated(times, fields)


def write_tabulated_csv(path, times: Sequence[float], fields: Sequence[Field]) -> None:
    size = fields[0].grid.size
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"cell_{i}" for i in range(size)])
        for t, f in zip(times, fields):
            w.writerow([repr(float(t))] + [f"{x:.17g}" for x in f.flat])

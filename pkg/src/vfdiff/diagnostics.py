"""Conserved quantities, Lyapunov functionals, identity residuals and decay fits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np

from .grid import Field, check_same_grid, grad_sq_integral, h1_distance, integrate, laplacian
from .sources import SourceTerm, eval_source, source_time_derivative


def _positive_values(v: Field) -> np.ndarray:
    bad = np.flatnonzero(~(v.flat > 0))
    if bad.size:
        i = int(bad[0])
        raise ValueError(f"field must be positive; cell {i} has value {v.flat[i]!r}")
    return v.values


def mass(v: Field, k: float) -> float:
    """``integral v^(1-k)``, conserved by the continuous flow."""
    return integrate(Field(v.grid, _positive_values(v) ** (1.0 - k)))


def energy(v: Field, f: Field) -> float:
    """``E(v) = integral (|grad v|^2 / 2 + f v)``."""
    check_same_grid(v, f)
    return 0.5 * grad_sq_integral(v) + integrate(f * v)


def entropy(v: Field, p: float) -> float:
    """``integral v^(-p)``."""
    if not p > 0:
        raise ValueError(f"entropy exponent must be positive, got {p}")
    return integrate(Field(v.grid, _positive_values(v) ** (-p)))


@dataclass
class DiagnosticsRecord:
    t: float
    mass: float
    mass_drift_rel: float
    energy: float
    entropy: Dict[float, float]
    grad_w_sq: float
    h1_dist: float
    v_min: float
    v_max: float
    grad_v_sq: float

    def row(self, ps: Sequence[float]) -> list:
        return ([self.t, self.mass, self.mass_drift_rel, self.energy]
                + [self.entropy[p] for p in ps]
                + [self.grad_w_sq, self.h1_dist, self.v_min, self.v_max, self.grad_v_sq])


def csv_header(ps: Sequence[float]) -> list:
    return (["t", "mass", "mass_drift_rel", "energy"]
            + [f"entropy_p{p:g}" for p in ps]
            + ["grad_w_sq", "h1_dist", "v_min", "v_max", "grad_v_sq"])


def compute_record(t: float, v: Field, k: float, f: Field, v_inf: Field, M: float,
                   ps: Sequence[float] = ()) -> DiagnosticsRecord:
    mv = mass(v, k)
    w = v - v_inf
    return DiagnosticsRecord(
        t=float(t),
        mass=mv,
        mass_drift_rel=abs(mv - M) / M,
        energy=energy(v, f),
        entropy={p: entropy(v, p) for p in ps},
        grad_w_sq=grad_sq_integral(w),
        h1_dist=h1_distance(v, v_inf),
        v_min=v.min(),
        v_max=v.max(),
        grad_v_sq=grad_sq_integral(v),
    )


def _uniform_spacing(times: Sequence[float]) -> float:
    t = np.asarray(times, dtype=float)
    if t.size < 3:
        raise ValueError("identity residuals need at least 3 snapshots")
    d = np.diff(t)
    if np.max(np.abs(d - d[0])) > 1e-9 * d[0]:
        raise ValueError("snapshots must be recorded at a uniform interval")
    return float(d[0])


def energy_identity_residual(trajectory, source: SourceTerm) -> np.ndarray:
    """Residual of ``dE/dt + integral v^k (lap v - f)^2 - integral v f_t`` at interior snapshots.

    ``dE/dt`` is a centered difference of the recorded snapshots.
    """
    delta = _uniform_spacing(trajectory.times)
    k = trajectory.k
    ts, vs = trajectory.times, trajectory.snapshots
    E = [energy(v, eval_source(source, t)) for t, v in zip(ts, vs)]
    out = []
    for n in range(1, len(ts) - 1):
        v, t = vs[n], ts[n]
        f = eval_source(source, t)
        dissipation = integrate(v ** k * (laplacian(v) - f) ** 2)
        work = integrate(v * source_time_derivative(source, t))
        out.append((E[n + 1] - E[n - 1]) / (2 * delta) + dissipation - work)
    return np.array(out)


def _check_entropy_exponent(p: float, k: float) -> None:
    if not p > k - 1 or p == k:
        raise ValueError(f"entropy identity needs p > k - 1 and p != k (p={p}, k={k})")


def entropy_identity_residual(trajectory, source: SourceTerm, p: float) -> np.ndarray:
    """Residual of the ``integral v^(-p)`` identity at interior snapshots.

    ``d/dt Y + 4 (p+1-k) p / (p-k)^2 integral |grad v^(-(p-k)/2)|^2 - p integral f v^(k-1-p)``
    with ``Y = integral v^(-p)``.
    """
    k = trajectory.k
    _check_entropy_exponent(p, k)
    delta = _uniform_spacing(trajectory.times)
    ts, vs = trajectory.times, trajectory.snapshots
    Y = [entropy(v, p) for v in vs]
    coeff = 4.0 * (p + 1.0 - k) * p / (p - k) ** 2
    out = []
    for n in range(1, len(ts) - 1):
        v = vs[n]
        f = eval_source(source, ts[n])
        grad_term = coeff * grad_sq_integral(v ** (-(p - k) / 2.0))
        forcing = p * integrate(f * v ** (k - 1.0 - p))
        out.append((Y[n + 1] - Y[n - 1]) / (2 * delta) + grad_term - forcing)
    return np.array(out)


@dataclass
class BoundReport:
    holds: bool
    worst_margin: float
    margins: list = field(default_factory=list)
    detail: dict = field(default_factory=dict)


def positivity_lower_bound(v_min0: float, f_sup: float, k: float, t):
    """``(v_min0^-(k-1) + (k-1) f_sup t)^(-1/(k-1))``."""
    return (v_min0 ** (-(k - 1.0)) + (k - 1.0) * f_sup * np.asarray(t)) ** (-1.0 / (k - 1.0))


def positivity_bound_check(trajectory, f_sup: float, k: float, slack: float = 1e-9) -> BoundReport:
    """Compare ``min v(t)`` with the lower bound for a bounded time-homogeneous source."""
    ts = np.asarray(trajectory.times)
    mins = np.array([v.min() for v in trajectory.snapshots])
    bound = positivity_lower_bound(mins[0], f_sup, k, ts)
    margins = mins - bound
    return BoundReport(
        holds=bool(np.all(margins >= -slack)),
        worst_margin=float(margins.min()),
        margins=margins.tolist(),
        detail={"t_worst": float(ts[int(np.argmin(margins))])},
    )


def gradient_bound_check(trajectory, growth_factor: float = 10.0) -> BoundReport:
    """Track ``||grad v||_2`` over the snapshots; flags growth beyond ``growth_factor``.

    Growth is measured against the initial value, or against the first
    nonzero value when the data start flat.
    """
    g = np.sqrt([grad_sq_integral(v) for v in trajectory.snapshots])
    first, last = float(g[0]), float(g[-1])
    nonzero = g[g > 0]
    reference = first if first > 0 else (float(nonzero[0]) if nonzero.size else 0.0)
    unbounded = last > growth_factor * reference if reference > 0 else False
    i = int(np.argmax(g))
    return BoundReport(
        holds=bool(np.all(np.isfinite(g)) and not unbounded),
        worst_margin=float(g.max()),
        margins=g.tolist(),
        detail={"sup": float(g.max()), "t_sup": float(trajectory.times[i]), "initial": first, "final": last},
    )


@dataclass
class RateFit:
    """Least-squares fit ``d(t) ~ amplitude * exp(-decay_rate * t)``."""

    decay_rate: float
    amplitude: float
    r_squared: float
    t_a: float
    t_b: float
    floor: float

    def to_dict(self) -> dict:
        return {"lambda": self.decay_rate, "amplitude": self.amplitude,
                "r_squared": self.r_squared, "t_a": self.t_a, "t_b": self.t_b}

    def predict(self, t):
        return self.amplitude * np.exp(-self.decay_rate * np.asarray(t, dtype=float))


def fit_decay_rate(t, d, floor_rel: float = 1e-6, t_min: Optional[float] = None,
                   min_points: int = 5) -> RateFit:
    """Fit a line to ``(t, log d)`` on the trailing run of points above the floor.

    The floor is ``floor_rel * max(d)``.  Points before ``t_min`` are ignored.
    ``r_squared`` is reported as 1 when ``log d`` has zero variance.
    """
    t = np.asarray(t, dtype=float).reshape(-1)
    d = np.asarray(d, dtype=float).reshape(-1)
    if t.shape != d.shape:
        raise ValueError("t and d must have the same length")
    floor = floor_rel * float(np.max(d)) if d.size else 0.0
    keep = (d > floor) & np.isfinite(d)
    if t_min is not None:
        keep &= t >= t_min
    # trailing contiguous run of admissible points
    end = len(keep)
    while end > 0 and not keep[end - 1]:
        end -= 1
    start = end
    while start > 0 and keep[start - 1]:
        start -= 1
    if end - start < min_points:
        raise ValueError(
            f"insufficient decay data: {end - start} points above floor {floor:.3e}, need {min_points}"
        )
    tw, yw = t[start:end], np.log(d[start:end])
    tc = tw - tw.mean()
    yc = yw - yw.mean()
    slope = float(np.sum(tc * yc) / np.sum(tc * tc))
    intercept = float(yw.mean() - slope * tw.mean())
    ss_tot = float(np.sum(yc * yc))
    ss_res = float(np.sum((yc - slope * tc) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    return RateFit(-slope, math.exp(intercept), r2, float(tw[0]), float(tw[-1]), floor)

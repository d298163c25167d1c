"""Steady states: Neumann Poisson solve plus calibration of the mass constraint."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .grid import Field, integrate, laplacian, laplacian_matrix, make_grid


class CompatibilityError(ValueError):
    """The Neumann problem has no solution: the source does not integrate to zero."""


class ConvergenceError(RuntimeError):
    """An iterative solve hit its iteration cap."""


class CalibrationError(ValueError):
    """No representable positive shift meets the mass constraint."""


def l2_norm(field: Field) -> float:
    return math.sqrt(integrate(field * field))


def _project(x: np.ndarray) -> np.ndarray:
    return x - x.mean()


def solve_neumann_poisson(f_inf: Field, rtol: float = 1e-10, maxiter: int = None) -> Field:
    """Mean-zero solution of ``laplacian(phi) = f_inf``.

    Preconditioned conjugate gradients (Jacobi) on ``-laplacian``, with the
    right-hand side and every iterate projected onto the mean-zero subspace,
    which removes the constant null space.

    Raises
    ------
    CompatibilityError
        If ``integrate(f_inf)`` exceeds ``1e-12 * sup|f_inf|`` (times |Omega|).
    ConvergenceError
        If the relative residual does not reach ``rtol`` within ``maxiter``
        iterations (default ``50 * sqrt(cells)``).
    """
    grid = f_inf.grid
    sup = f_inf.sup_norm()
    mean_int = integrate(f_inf)
    if abs(mean_int) > 1e-12 * sup * grid.volume + 1e-300:
        raise CompatibilityError(
            f"Neumann compatibility violated: integral of the source is {mean_int:.3e}, must be 0"
        )
    if sup == 0.0:
        return grid.constant(0.0)
    if maxiter is None:
        maxiter = max(int(50 * math.sqrt(grid.size)), 50)

    A = -laplacian_matrix(grid)
    b = _project(-f_inf.flat.copy())
    diag = A.diagonal().copy()
    diag[diag == 0.0] = 1.0
    bnorm = np.linalg.norm(b)

    x = np.zeros_like(b)
    r = b.copy()
    z = _project(r / diag)
    p = z.copy()
    rz = r @ z
    for it in range(maxiter + 1):
        rnorm = np.linalg.norm(r)
        if rnorm <= rtol * bnorm:
            break
        if it == maxiter:
            raise ConvergenceError(
                f"Neumann Poisson solve did not converge in {maxiter} iterations "
                f"(relative residual {rnorm / bnorm:.3e} > {rtol:.1e})"
            )
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        r = _project(r)
        z = _project(r / diag)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return Field(grid, _project(x))


def mass_functional(phi: Field, c: float, k: float) -> float:
    """``G(c) = integral of (phi + c)^(1-k)``."""
    return integrate(Field(phi.grid, (phi.values + c) ** (1.0 - k)))


def calibrate_mass(phi: Field, k: float, M: float, rtol: float = 1e-10) -> float:
    """Shift ``c`` with ``integral (phi + c)^(1-k) = M`` and ``phi + c > 0``.

    ``G(c)`` is strictly decreasing on ``(-min phi, inf)`` from ``+inf`` to 0,
    so a bracket always exists; bisection narrows it and Newton polishes.
    """
    if not M > 0:
        raise ValueError(f"mass M must be positive, got {M}")
    if not k > 1:
        raise ValueError(f"k must exceed 1, got {k}")
    vals = phi.values
    vol = phi.grid.cell_volume

    def G(c):
        return float(np.sum(((vals + c) ** (1.0 - k)).reshape(-1)) * vol)

    def dG(c):
        return float((1.0 - k) * np.sum(((vals + c) ** (-k)).reshape(-1)) * vol)

    lo = -phi.min() + 1e-12 * (1.0 + phi.sup_norm())
    while not G(lo) > M:
        # on a fixed grid G stays finite near -min(phi); walk the bracket toward it
        gap = lo + phi.min()
        lo_next = -phi.min() + gap * 1e-3
        if not np.all(vals + lo_next > 0) or lo_next == lo:
            raise CalibrationError(
                f"mass {M:g} needs min(v_inf) below floating-point resolution on this grid"
            )
        lo = lo_next
    step = 1.0
    hi = lo + step
    while G(hi) >= M:
        step *= 2.0
        hi = lo + step

    c = 0.5 * (lo + hi)
    for _ in range(200):
        c = 0.5 * (lo + hi)
        g = G(c)
        if abs(g - M) <= 1e-3 * M or hi - lo <= 1e-15 * max(1.0, abs(c)):
            break
        if g > M:
            lo = c
        else:
            hi = c
    for _ in range(50):
        g = G(c)
        if abs(g - M) <= 1e-2 * rtol * M:
            break
        c_new = c - (g - M) / dG(c)
        if not lo < c_new < hi:
            c_new = 0.5 * (lo + hi)
        if G(c_new) > M:
            lo = c_new
        else:
            hi = c_new
        if c_new == c:
            break
        c = c_new
    return float(c)


@dataclass(frozen=True)
class SteadyState:
    """Calibrated positive steady state ``v_inf = phi + c``."""

    v_infinity: Field
    calibration_constant: float
    poisson_residual: float
    mass_error: float
    k: float
    mass: float

    @property
    def min_v(self) -> float:
        return self.v_infinity.min()

    def summary(self) -> dict:
        return {
            "c": self.calibration_constant,
            "poisson_residual": self.poisson_residual,
            "mass_error": self.mass_error,
            "min_v": self.min_v,
        }


def build_steady_state(f_inf: Field, k: float, M: float, rtol: float = 1e-10) -> SteadyState:
    phi = solve_neumann_poisson(f_inf, rtol=rtol)
    c = calibrate_mass(phi, k, M)
    v = Field(phi.grid, phi.values + c, positive=True)
    residual = l2_norm(laplacian(v) - f_inf)
    mass_error = abs(integrate(v ** (1.0 - k)) - M) / M
    return SteadyState(v, c, residual, mass_error, float(k), float(M))


@dataclass
class RefinementReport:
    rows: list  # (h, min_v, c) per resolution
    verdict: str

    def as_dict(self) -> dict:
        return {
            "rows": [{"h": h, "min_v": mv, "c": c} for h, mv, c in self.rows],
            "verdict": self.verdict,
        }


def positivity_refinement_check(
    f_inf: Callable,
    k: float,
    M: float,
    resolutions: Sequence,
    extents: Sequence[float] = None,
    stable_rel_change: float = 0.05,
) -> RefinementReport:
    """Track ``min v_inf`` across a refinement ladder.

    ``f_inf`` is a function of cell-center coordinates; it is sampled and
    projected to zero mean on each grid.  ``resolutions`` holds one cell
    count per level (an int, applied to every axis, or a tuple).

    Verdicts: ``"stable"`` when the last refinement changes ``min v_inf`` by
    less than ``stable_rel_change``; ``"degenerating"`` when ``min v_inf``
    keeps falling; ``"unsettled"`` otherwise.
    """
    from .sources import project_zero_mean

    if len(resolutions) < 2:
        raise ValueError("need at least two resolutions")
    rows = []
    for res in resolutions:
        if isinstance(res, (tuple, list)):
            res = tuple(int(n) for n in res)
        else:
            res = (int(res),) * (len(extents) if extents is not None else 1)
        ext = tuple(extents) if extents is not None else (1.0,) * len(res)
        grid = make_grid(len(res), ext, res)
        f = project_zero_mean(grid.sample(f_inf))
        try:
            ss = build_steady_state(f, k, M)
        except CalibrationError:
            # the minimum has collapsed to round-off: record it as zero
            phi = solve_neumann_poisson(f)
            rows.append((max(grid.spacing), 0.0, -phi.min()))
            continue
        rows.append((max(grid.spacing), ss.min_v, ss.calibration_constant))
    mins = [r[1] for r in rows]
    last_change = abs(mins[-1] - mins[-2]) / max(abs(mins[-2]), 1e-300)
    if mins[-1] > 0 and last_change < stable_rel_change:
        verdict = "stable"
    elif all(b < a or b == 0.0 for a, b in zip(mins, mins[1:])):
        verdict = "degenerating"
    else:
        verdict = "unsettled"
    return RefinementReport(rows, verdict)

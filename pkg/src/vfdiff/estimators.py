"""scikit-learn style wrappers around the functional core.

These expose ``get_params``/``set_params`` and the fit/predict/transform
protocol so decay fits and steady-state solves compose with sklearn tooling
(cloning, parameter grids, pipelines over time series).
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted, column_or_1d

from .diagnostics import fit_decay_rate
from .evolution import Problem, evolve
from .grid import Field
from .sources import SourceTerm
from .steady import build_steady_state


def _times(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected a single time column, got shape {X.shape}")
        X = X[:, 0]
    return column_or_1d(X)


class DecayRateEstimator(RegressorMixin, BaseEstimator):
    """Exponential decay ``d(t) = A exp(-lambda t)`` fitted in log space.

    Parameters
    ----------
    floor_rel : float, default=1e-6
        Points below ``floor_rel * max(d)`` are discarded; the fit uses the
        trailing run of points above the floor.
    t_min : float, optional
        Ignore samples before this time (initial transients).
    min_points : int, default=5

    Attributes
    ----------
    rate_ : float
    amplitude_ : float
    r_squared_ : float
        Coefficient of determination of the log-linear fit.
    window_ : tuple of float
    """

    def __init__(self, floor_rel=1e-6, t_min=None, min_points=5):
        self.floor_rel = floor_rel
        self.t_min = t_min
        self.min_points = min_points

    def fit(self, X, y):
        t = _times(X)
        d = column_or_1d(np.asarray(y, dtype=float))
        if t.shape != d.shape:
            raise ValueError("X and y have inconsistent lengths")
        fit = fit_decay_rate(t, d, floor_rel=self.floor_rel, t_min=self.t_min,
                             min_points=self.min_points)
        self.fit_ = fit
        self.rate_ = fit.decay_rate
        self.amplitude_ = fit.amplitude
        self.r_squared_ = fit.r_squared
        self.window_ = (fit.t_a, fit.t_b)
        return self

    def predict(self, X):
        check_is_fitted(self, "rate_")
        return self.amplitude_ * np.exp(-self.rate_ * _times(X))


class SteadyStateSolver(TransformerMixin, BaseEstimator):
    """Calibrated steady state for a limit source; ``transform`` returns ``v - v_inf``.

    Parameters
    ----------
    k : float
        Mobility exponent, ``k > 1``.
    mass : float
        Target value of ``integral v_inf^(1-k)``.
    rtol : float, default=1e-10
        Relative residual of the Poisson solve.
    """

    def __init__(self, k=2.0, mass=1.0, rtol=1e-10):
        self.k = k
        self.mass = mass
        self.rtol = rtol

    def fit(self, f_inf: Field, y=None):
        ss = build_steady_state(f_inf, self.k, self.mass, rtol=self.rtol)
        self.steady_state_ = ss
        self.v_infinity_ = ss.v_infinity
        self.calibration_constant_ = ss.calibration_constant
        return self

    def transform(self, v: Field) -> Field:
        check_is_fitted(self, "v_infinity_")
        return v - self.v_infinity_


class Simulator(BaseEstimator):
    """Evolution run as an estimator: ``fit(v0, source)`` stores the trajectory.

    Parameters mirror :func:`vfdiff.evolution.evolve`.
    """

    def __init__(self, k=2.0, scheme="v_form", T=1.0, dt0=1e-3, record_every=None, entropy_p=()):
        self.k = k
        self.scheme = scheme
        self.T = T
        self.dt0 = dt0
        self.record_every = record_every
        self.entropy_p = entropy_p

    def fit(self, v0: Field, source: SourceTerm = None):
        if source is None:
            source = SourceTerm.zero(v0.grid)
        problem = Problem(v0.grid, self.k, source, v0)
        self.trajectory_ = evolve(problem, self.scheme, self.T, self.dt0, self.record_every,
                                  entropy_ps=self.entropy_p)
        self.final_ = self.trajectory_.final
        return self

    def predict(self, X):
        """Recorded snapshot at the latest time not after each requested time."""
        check_is_fitted(self, "trajectory_")
        times = np.asarray(self.trajectory_.times)
        idx = np.clip(np.searchsorted(times, _times(X) + 1e-12, side="right") - 1, 0, len(times) - 1)
        return [self.trajectory_.snapshots[i] for i in idx]

"""Named verification suites with pinned tolerances.

Each check runs a small experiment, measures one property and compares it
with a fixed tolerance.  ``run_suite(name)`` returns the list of checks.
"""
from __future__ import annotations

import filecmp
import math
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from . import criticality as crit
from .config import parse_config_text
from .diagnostics import (energy, energy_identity_residual, entropy_identity_residual,
                          fit_decay_rate, positivity_bound_check)
from .evolution import Problem, evolve
from .grid import integrate, laplacian, make_grid
from .harness import run_experiment, run_steady
from .sources import SourceTerm
from .steady import build_steady_state, calibrate_mass, mass_functional


@dataclass
class Check:
    name: str
    passed: bool
    measured: dict
    tolerance: dict
    runtime: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        meas = ", ".join(f"{k}={_short(v)}" for k, v in self.measured.items())
        tol = ", ".join(f"{k}: {v}" for k, v in self.tolerance.items())
        return f"[{status}] {self.name}: {meas} | {tol} | {self.runtime:.2f}s"

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "measured": self.measured,
                "tolerance": self.tolerance, "runtime": self.runtime}


def _short(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_short(x) for x in v) + "]"
    return str(v)


def _timed(name, runtime_limit, func) -> Check:
    start = time.perf_counter()
    passed, measured, tolerance = func()
    elapsed = time.perf_counter() - start
    tolerance = dict(tolerance, runtime_s=f"< {runtime_limit}")
    return Check(name, bool(passed and elapsed < runtime_limit), measured, tolerance, elapsed)


def _cos_grid(n, k_mode=1):
    g = make_grid(1, [1.0], [n])
    return g, g.sample(lambda x: np.cos(k_mode * np.pi * x))


# ---------------------------------------------------------------- conservation

def check_u_conservation() -> Check:
    def run():
        g, c = _cos_grid(128)
        p = Problem(g, 3.0, SourceTerm.time_homogeneous(c), g.constant(1.0))
        tr = evolve(p, "u_form", T=1.0, dt0=1e-3, record_every=0.1)
        us = tr.step_array("u_sum")
        drift = float(np.max(np.abs(us - p.M)) / p.M)
        return drift <= 1e-10, {"drift": drift, "steps": len(us)}, {"drift": "<= 1e-10"}
    return _timed("C1 u-form conservation", 5.0, run)


def v_form_mass_drift(dt: float) -> float:
    g, c = _cos_grid(128)
    p = Problem(g, 3.0, SourceTerm.time_homogeneous(c), g.constant(1.0))
    tr = evolve(p, "v_form", T=1.0, dt0=dt, record_every=0.1)
    return float(np.max(np.abs(tr.step_array("mass") - p.M)) / p.M)


def check_v_mass_order() -> Check:
    def run():
        d1, d2 = v_form_mass_drift(1e-3), v_form_mass_drift(5e-4)
        ratio = d2 / d1
        return 0.35 <= ratio <= 0.65, {"drift_dt": d1, "drift_dt_half": d2, "ratio": ratio}, \
            {"ratio": "in [0.35, 0.65]"}
    return _timed("C2 v-form mass drift first order", 10.0, run)


# ----------------------------------------------------------------- dissipation

def check_energy_dissipation() -> Check:
    def run():
        g, c = _cos_grid(128)
        src = SourceTerm.time_homogeneous(c)
        v0 = g.sample(lambda x: 1 + 0.2 * np.cos(2 * np.pi * x))
        tr = evolve(Problem(g, 2.0, src, v0), "v_form", T=1.0, dt0=1e-3, record_every=0.1)
        E = np.concatenate([[energy(v0, c)], tr.step_array("energy")])
        excess = E[1:] - E[:-1] - 1e-10 * (1 + np.abs(E[:-1]))
        worst = float(excess.max())
        return worst <= 0, {"worst_excess": worst, "steps": len(E) - 1, "E0": E[0], "E_end": E[-1]}, \
            {"E_next": "<= E + 1e-10 (1 + |E|)"}
    return _timed("C3 energy dissipation", 5.0, run)


# ------------------------------------------------------------------ identities

def identity_ladder(levels=(64, 128, 256), dt_coarse=1e-3, T=0.3, k=2.0):
    """Max energy/entropy identity residuals while halving h, dt and the recording interval."""
    p_exp = 2 * k
    out = []
    for i, n in enumerate(levels):
        dt = dt_coarse / 2**i
        g, c = _cos_grid(n)
        src = SourceTerm.time_homogeneous(c)
        v0 = g.sample(lambda x: 1 + 0.2 * np.cos(np.pi * x))
        tr = evolve(Problem(g, k, src, v0), "v_form", T=T, dt0=dt, record_every=dt)
        out.append((float(np.max(np.abs(energy_identity_residual(tr, src)))),
                    float(np.max(np.abs(entropy_identity_residual(tr, src, p_exp))))))
    return out


def check_identities() -> Check:
    def run():
        res = identity_ladder()
        e = [r[0] for r in res]
        s = [r[1] for r in res]
        re = [e[i] / e[i + 1] for i in range(len(e) - 1)]
        rs = [s[i] / s[i + 1] for i in range(len(s) - 1)]
        ok = min(re) >= 1.8 and min(rs) >= 1.8
        return ok, {"energy_max": e, "entropy_max": s, "energy_ratios": re, "entropy_ratios": rs}, \
            {"ratio": ">= 1.8 per level"}
    return _timed("C4 energy/entropy identity residuals", 60.0, run)


# ---------------------------------------------------------------------- steady

CALIBRATION_MASS = 1.0051732


def check_steady() -> Check:
    def run():
        g = make_grid(1, [1.0], [128])
        exact = g.sample(lambda x: 1 - np.cos(np.pi * x) / np.pi**2)
        f = laplacian(exact)
        M = integrate(exact ** -1.0)
        ss = build_steady_state(f, 2.0, M)
        err_1d = float(np.max(np.abs(ss.v_infinity.values - exact.values)))

        g2 = make_grid(2, [1.0, 1.0], [32, 32])
        exact2 = g2.sample(lambda x, y: 2 + np.cos(np.pi * x) * np.cos(2 * np.pi * y))
        M2 = integrate(exact2 ** -2.0)
        err_2d = float(np.max(np.abs(build_steady_state(laplacian(exact2), 3.0, M2).v_infinity.values
                                     - exact2.values)))

        gc = make_grid(1, [1.0], [256])
        phi = gc.sample(lambda x: -np.cos(np.pi * x) / np.pi**2)
        c = calibrate_mass(phi, 2.0, CALIBRATION_MASS)
        oracle = brentq(lambda cc: mass_functional(phi, cc, 2.0) - CALIBRATION_MASS,
                        -phi.min() + 1e-9, 10.0, xtol=1e-15, rtol=1e-15)
        ok = err_1d <= 1e-8 and err_2d <= 1e-8 and abs(c - oracle) <= 1e-6 and abs(c - 1.0) <= 1e-6
        return ok, {"forward_err_1d": err_1d, "forward_err_2d": err_2d, "c": c,
                    "c_oracle": oracle, "abs_c_minus_1": abs(c - 1.0)}, \
            {"forward_err": "<= 1e-8", "abs_c_minus_oracle": "<= 1e-6", "abs_c_minus_1": "<= 1e-6"}
    return _timed("C5 steady state", 2.0, run)


# ----------------------------------------------------------------------- decay

def check_linear_decay() -> Check:
    def run():
        g = make_grid(1, [1.0], [256])
        v0 = g.sample(lambda x: 1 + 1e-3 * np.cos(np.pi * x))
        tr = evolve(Problem(g, 2.0, SourceTerm.zero(g), v0), "v_form", T=1.0, dt0=1e-4,
                    record_every=0.01)
        t, gw = tr.series("grad_w_sq")
        fit = fit_decay_rate(t, np.sqrt(gw))
        rel = abs(fit.decay_rate - np.pi**2) / np.pi**2
        return rel <= 0.02 and fit.r_squared >= 0.999, \
            {"lambda": fit.decay_rate, "rel_err": rel, "r_squared": fit.r_squared}, \
            {"rel_err": "<= 0.02 vs pi^2", "r_squared": ">= 0.999"}
    return _timed("C6 linearized decay rate", 30.0, run)


THM11_CONFIG = """
[grid]
dimension = 2
extents = 1.0
resolutions = 64
[problem]
k = 2
scheme = u_form
[source]
profile = cos_mode
modes = 1, 1
amplitude = 0.1
[initial]
perturbation = 0.01
modes = 1, 1
mass = 1.0
[run]
T = 0.6
dt0 = 1e-3
record_every = 0.01
"""


def check_thm11_decay(out_dir=None) -> Check:
    def run():
        with tempfile.TemporaryDirectory() as tmp:
            summary = run_experiment(parse_config_text(THM11_CONFIG), Path(out_dir or tmp))
            table = np.genfromtxt(Path(out_dir or tmp) / "diagnostics.csv", delimiter=",", names=True)
        t, d = table["t"], table["h1_dist"]
        fit = summary.rate_fit
        if fit is None:
            return False, {"error": summary.error or summary.rate_fit_note}, {}
        lam, A = fit["lambda"], fit["amplitude"]
        window = (t >= fit["t_a"]) & (t <= fit["t_b"])
        envelope = float(np.max(d[window] / (A * np.exp(-lam * t[window]))))
        drop = float(d[0] / d[-1])
        ok = drop >= 1e3 and fit["r_squared"] >= 0.99 and lam > 0 and envelope <= 1.05
        return ok, {"drop": drop, "lambda": lam, "r_squared": fit["r_squared"],
                    "max_ratio_to_fit": envelope, "verdict": summary.regime["verdict"]}, \
            {"drop": ">= 1e3", "r_squared": ">= 0.99", "lambda": "> 0", "max_ratio_to_fit": "<= 1.05"}
    return _timed("C7 exponential H1 decay (N=2, k=2)", 300.0, run)


# ---------------------------------------------------------------------- bounds

def check_positivity_bound() -> Check:
    def run():
        measured, ok = {}, True
        for k in (2.0, 3.0):
            g, c = _cos_grid(128)
            tr = evolve(Problem(g, k, SourceTerm.time_homogeneous(c), g.constant(1.0)), "v_form",
                        T=2.0, dt0=1e-3, record_every=0.01)
            rep = positivity_bound_check(tr, c.sup_norm(), k, slack=1e-9)
            measured[f"worst_margin_k{k:g}"] = rep.worst_margin
            ok &= rep.holds
        return ok, measured, {"margin": ">= -1e-9 at every snapshot"}
    return _timed("C8 positivity lower bound", 10.0, run)


# ----------------------------------------------------------------- criticality

def check_criticality() -> Check:
    def run():
        m = {"k_cr(2,inf)": crit.k_critical(2, math.inf), "k_cr(3,inf)": crit.k_critical(3, math.inf),
             "s_cr(3,2,3)": crit.s_critical(3, 2.0, 3.0)}
        ok = m["k_cr(2,inf)"] == 2.0 and m["k_cr(3,inf)"] == 2.5 and m["s_cr(3,2,3)"] == 2.0
        worst = 0.0
        for r in (1.25, 2.0, 3.0, 4.5, 6.0, 10.0, 50.0, 1e3, 1e6, 7.5):
            for N in (2, 3):
                if r <= N / 2:
                    continue
                expect = (2 * r - 1) / (r - 1) if N == 2 else (5 * r - 3) / (2 * r - 3)
                worst = max(worst, abs(crit.k_critical(N, r) - expect) / expect)
        m["max_rel_err"] = worst
        return ok and worst <= 1e-15, m, {"reference_values": "exact", "grid": "<= 1e-15 relative"}
    return _timed("C9 critical exponents", 1.0, run)


# ------------------------------------------------------------------- crossform

def cross_form_gap(dt: float, n: int = 128, T: float = 0.5) -> float:
    g = make_grid(1, [1.0], [n])
    v0 = g.sample(lambda x: 1 + 0.3 * np.cos(np.pi * x))
    p = Problem(g, 2.0, SourceTerm.zero(g), v0)
    a = evolve(p, "v_form", T=T, dt0=dt, record_every=T).final
    b = evolve(p, "u_form", T=T, dt0=dt, record_every=T).final
    return float(np.max(np.abs(a.values - b.values)))


def check_cross_form() -> Check:
    def run():
        g1, g2 = cross_form_gap(1e-4), cross_form_gap(5e-5)
        ratio = g1 / g2
        return g1 <= 1e-3 and 1.5 <= ratio <= 3.0, {"gap": g1, "gap_half_dt": g2, "ratio": ratio}, \
            {"gap": "<= 1e-3", "ratio": "in [1.5, 3]"}
    return _timed("C10 v-form / u-form agreement", 60.0, run)


# ----------------------------------------------------------------- determinism

CONSERVATION_CONFIG = """
[grid]
dimension = 1
resolutions = 128
[problem]
k = 3
scheme = u_form
[source]
profile = cos_mode
[initial]
constant = 1.0
[run]
T = 1.0
dt0 = 1e-3
record_every = 0.05
"""

STEADY_CONFIG = """
[grid]
dimension = 1
resolutions = 128
[problem]
k = 2
[source]
profile = cos_mode
amplitude = 1.0
[initial]
constant = 1.0
"""


def _artifacts_identical(a: Path, b: Path) -> tuple:
    files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file() and p.name != "timing.json")
    files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file() and p.name != "timing.json")
    if files_a != files_b:
        return False, len(files_a)
    same = all(filecmp.cmp(a / f, b / f, shallow=False) for f in files_a)
    return same, len(files_a)


def check_determinism() -> Check:
    def run():
        measured, ok = {}, True
        with tempfile.TemporaryDirectory() as tmp:
            tmp = Path(tmp)
            jobs = {
                "conservation": lambda out: run_experiment(parse_config_text(CONSERVATION_CONFIG), out),
                "steady": lambda out: run_steady(parse_config_text(STEADY_CONFIG), out),
                "thm11": lambda out: run_experiment(parse_config_text(THM11_CONFIG), out),
            }
            for name, job in jobs.items():
                job(tmp / name / "a")
                job(tmp / name / "b")
                same, count = _artifacts_identical(tmp / name / "a", tmp / name / "b")
                measured[name] = f"{'identical' if same else 'DIFFERENT'} ({count} files)"
                ok &= same and count > 0
        return ok, measured, {"artifacts": "byte-identical"}
    return _timed("C11 determinism", 300.0, run)


SUITES = {
    "conservation": [check_u_conservation, check_v_mass_order],
    "dissipation": [check_energy_dissipation],
    "identities": [check_identities],
    "steady": [check_steady],
    "decay": [check_linear_decay, check_thm11_decay],
    "bounds": [check_positivity_bound],
    "criticality": [check_criticality],
    "crossform": [check_cross_form],
    "determinism": [check_determinism],
}


def run_suite(name: str) -> list:
    """Run one suite (or ``"all"``); raises ``KeyError`` listing the available names."""
    if name == "all":
        return [chk() for suite in SUITES.values() for chk in suite]
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; available: {', '.join(SUITES)}, all")
    return [chk() for chk in SUITES[name]]

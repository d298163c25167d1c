"""Critical exponents, the k <-> m dictionary and the regime classifier."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

from .grid import Field

INF = math.inf

THM11 = "thm11_exponential"
THM12 = "thm12_convergent"
OPEN = "open_region"
INVALID = "invalid"

S_CR_DISCREPANCY_NOTE = (
    "For N=2, r=inf, k in (1,2) a value s_cr = (k+2)/(5-2k) also circulates; that is the "
    "three-dimensional formula at r=inf. The two-dimensional formula r/(r-(k-1)(r-1)) "
    "gives 1/(2-k) at r=inf, and this classifier uses it."
)


def k_critical(N: int, r: float) -> float:
    """Critical mobility exponent: ``(2r-1)/(r-1)`` for N=2, ``(5r-3)/(2r-3)`` for N=3."""
    if N not in (2, 3):
        raise ValueError(f"critical exponent is defined for N = 2 or 3, got {N}")
    if not r > N / 2:
        raise ValueError(f"space exponent r must exceed N/2 = {N / 2}, got {r}")
    if math.isinf(r):
        return 2.0 if N == 2 else 2.5
    if N == 2:
        return (2 * r - 1) / (r - 1)
    return (5 * r - 3) / (2 * r - 3)


def k_lower(N: int, r: float) -> float:
    """Lower end of the k-window where a finite s_cr exists: ``r/(r-1)`` or ``r/(r-3/2)``."""
    if math.isinf(r):
        return 1.0
    return r / (r - 1) if N == 2 else r / (r - 1.5)


def s_critical(N: int, k: float, r: float) -> Optional[float]:
    """Critical time integrability, or ``None`` outside its k-window.

    N=2: ``r/(r-(k-1)(r-1))`` for ``k`` in ``(r/(r-1), k_cr)``.
    N=3: ``r(k+2)/(r(5-2k)+3(k-1))`` for ``k`` in ``[r/(r-3/2), k_cr]``.
    """
    try:
        kcr = k_critical(N, r)
    except ValueError:
        return None
    lo = k_lower(N, r)
    if N == 2:
        if not lo < k < kcr:
            return None
        if math.isinf(r):
            return 1.0 / (2.0 - k)
        return r / (r - (k - 1) * (r - 1))
    if not lo <= k <= kcr:
        return None
    # the denominator vanishes at k = k_cr, where every s is admissible
    if math.isinf(r):
        num, den = k + 2, 5 - 2 * k
    else:
        num, den = r * (k + 2), r * (5 - 2 * k) + 3 * (k - 1)
    if k == kcr or den <= 0:
        return INF
    return num / den


def pme_exponent(k: float) -> float:
    """``m = k/(k-1)``."""
    if not k > 1:
        raise ValueError(f"k must exceed 1, got {k}")
    return k / (k - 1)


def k_from_m(m: float) -> float:
    """Inverse of :func:`pme_exponent`; the same map, since it is an involution."""
    if not m > 1:
        raise ValueError(f"m must exceed 1, got {m}")
    return m / (m - 1)


@dataclass
class RegimeReport:
    N: int
    k: float
    r: float
    s: float
    k_cr: Optional[float]
    s_cr: Optional[float]
    verdict: str
    notes: list = field(default_factory=list)
    energy_v0: Optional[float] = None
    energy_v0_negative: Optional[bool] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("r", "s", "k_cr", "s_cr"):
            if isinstance(d[key], float) and math.isinf(d[key]):
                d[key] = "inf"
        return d


def classify_regime(N: int, k: float, r: float, s: float, time_homogeneous: bool = True,
                    v0: Optional[Field] = None, f0: Optional[Field] = None) -> RegimeReport:
    """Say which convergence theorem, if any, covers ``(N, k, r, s)``.

    ``time_homogeneous`` marks a source ``f(x, t) = f(x)``; it is only
    consistent with ``s = inf``.  Given ``v0`` and ``f0``, ``E(v0)`` is
    evaluated for the negativity hypothesis of the time-dependent result.
    """
    report = RegimeReport(N, k, r, s, None, None, INVALID)
    if N not in (2, 3):
        report.notes.append(f"theorems cover N = 2 and N = 3 only (got N = {N})")
        return report
    if not k > 1:
        report.notes.append(f"k must exceed 1 (got {k})")
        return report
    if not r > N / 2:
        report.notes.append(f"r must exceed N/2 = {N / 2} (got {r})")
        return report
    if not s >= 1:
        report.notes.append(f"s must lie in [1, inf] (got {s})")
        return report

    kcr = k_critical(N, r)
    scr = s_critical(N, k, r)
    report.k_cr, report.s_cr = kcr, scr
    s_inf = math.isinf(s)
    if N == 2:
        above = k >= kcr
        below_window = scr is not None and s < scr
    else:
        above = k > kcr
        below_window = scr is not None and s <= scr

    if above and s_inf and time_homogeneous:
        report.verdict = THM11
    elif (above and s_inf) or below_window:
        report.verdict = THM12
    else:
        report.verdict = OPEN

    hyp = "ic_as2" if N == 2 else "ic_as3"
    weight = f"k+eps = {k:g}+eps" if N == 2 else f"3k/2 = {1.5 * k:g}"
    if v0 is not None:
        if float(v0.min()) > 0:
            report.notes.append(f"{hyp} (integral of v0^-({weight}) finite): satisfied (discrete, positive data)")
        else:
            report.notes.append(f"{hyp}: v0 has non-positive cells; not supported by the solver")
    else:
        report.notes.append(f"{hyp}: not checked (no v0 supplied)")
    if v0 is not None and f0 is not None:
        from .diagnostics import energy

        e = energy(v0, f0)
        report.energy_v0 = e
        report.energy_v0_negative = bool(e < 0)
        report.notes.append(f"E(v0) = {e:.17g} ({'<' if e < 0 else '>='} 0)")
    if not time_homogeneous:
        report.notes.append("f_tau (integral of ||f_t||_2 finite): checked only via the diagnostics proxy")
    if N == 2 and math.isinf(r) and 1 < k < 2:
        report.notes.append(S_CR_DISCREPANCY_NOTE)
    return report

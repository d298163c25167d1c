import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vfdiff.criticality import (INVALID, OPEN, S_CR_DISCREPANCY_NOTE, THM11, THM12, classify_regime,
                                k_critical, k_from_m, k_lower, pme_exponent, s_critical)
from vfdiff.grid import make_grid

inf = math.inf


@pytest.mark.parametrize("N,r,expected", [(2, inf, 2.0), (3, inf, 2.5), (2, 2.0, 3.0), (3, 3.0, 4.0)])
def test_k_critical_values(N, r, expected):
    assert k_critical(N, r) == expected


@pytest.mark.parametrize("N,r", [(1, 2.0), (2, 1.0), (3, 1.5)])
def test_k_critical_domain(N, r):
    with pytest.raises(ValueError):
        k_critical(N, r)


def test_s_critical_values():
    assert s_critical(3, 2.0, 3.0) == 2.0
    assert s_critical(2, 1.5, inf) == pytest.approx(2.0)
    assert s_critical(3, 1.0, inf) == pytest.approx(1.0)
    assert s_critical(2, 2.5, 3.0) is None
    assert s_critical(3, 2.5, inf) == inf
    assert s_critical(3, k_critical(3, 4.0), 4.0) == inf
    assert s_critical(2, 3.0, 2.0) is None


def test_s_critical_window_ends():
    # N=2 window is open, N=3 window is closed
    assert s_critical(2, k_critical(2, 4.0), 4.0) is None
    assert s_critical(2, k_lower(2, 4.0), 4.0) is None
    assert s_critical(3, k_critical(3, 6.0), 6.0) is not None
    assert s_critical(3, k_lower(3, 6.0), 6.0) == pytest.approx(20 / 15)


def test_pme_exponent_examples():
    assert pme_exponent(2.0) == 2.0
    assert pme_exponent(3.0) == 1.5
    with pytest.raises(ValueError):
        pme_exponent(1.0)


@given(st.floats(1.001, 1e6))
def test_exponent_map_is_involution(k):
    assert k_from_m(pme_exponent(k)) == pytest.approx(k, rel=1e-9)


@given(st.floats(1.01, 1e6))
def test_k_critical_above_infinite_limit(r):
    assert k_critical(2, r) >= 2.0
    if r > 1.5:
        assert k_critical(3, r) >= 2.5


@given(st.sampled_from([2, 3]), st.floats(2.0, 1e4), st.floats(0.0, 1.0))
def test_s_critical_exceeds_one_inside_window(N, r, frac):
    lo, hi = k_lower(N, r), k_critical(N, r)
    k = lo + frac * (hi - lo)
    s = s_critical(N, k, r)
    if s is not None:
        assert s >= 1.0 - 1e-12


def test_s_critical_infinite_r_limit():
    for k in (1.2, 1.5, 1.9):
        assert s_critical(2, k, 1e12) == pytest.approx(s_critical(2, k, inf), rel=1e-9)
    for k in (1.2, 2.0, 2.4):
        assert s_critical(3, k, 1e12) == pytest.approx(s_critical(3, k, inf), rel=1e-9)


@pytest.mark.parametrize("args,verdict", [
    ((2, 2.0, inf, inf), THM11),
    ((3, 2.0, 3.0, 2.0), THM12),
    ((3, 1.2, 2.0, 1.0), OPEN),
    ((3, 3.0, inf, inf), THM11),
    ((3, 2.5, inf, inf), THM12),
    ((3, 2.5, inf, 1.0), THM12),
    ((2, 1.5, inf, 1.5), THM12),
    ((2, 1.5, inf, 2.0), OPEN),
    ((1, 2.0, inf, inf), INVALID),
    ((2, 0.5, inf, inf), INVALID),
    ((2, 2.0, 0.5, inf), INVALID),
    ((2, 2.0, inf, 0.5), INVALID),
])
def test_classify_table(args, verdict):
    assert classify_regime(*args).verdict == verdict


def test_time_dependent_intent_downgrades_to_convergent():
    rep = classify_regime(2, 3.0, inf, inf, time_homogeneous=False)
    assert rep.verdict == THM12
    assert any("f_tau" in n for n in rep.notes)


@pytest.mark.parametrize("N,k,r", [(2, 1.5, inf), (2, 2.0, 4.0), (3, 2.0, 3.0), (3, 3.0, 2.0)])
def test_classify_monotone_in_s(N, k, r):
    order = {OPEN: 0, THM12: 1, THM11: 2}
    ranks = [order[classify_regime(N, k, r, s).verdict] for s in (1.0, 1.5, 2.0, 3.0, 10.0)]
    if k >= k_critical(N, r):
        assert ranks == sorted(ranks)


def test_hypothesis_notes_and_energy():
    g = make_grid(2, [1.0, 1.0], [8, 8])
    v0 = g.sample(lambda x, y: 1 + 0.1 * np.cos(np.pi * x))
    f0 = g.sample(lambda x, y: -np.cos(np.pi * x))
    rep = classify_regime(2, 2.0, inf, inf, v0=v0, f0=f0)
    assert any("satisfied" in n for n in rep.notes)
    assert rep.energy_v0_negative is True
    d = rep.to_dict()
    assert d["r"] == "inf" and d["s"] == "inf"


def test_discrepancy_note_attached():
    assert S_CR_DISCREPANCY_NOTE in classify_regime(2, 1.5, inf, 1.0).notes
    assert S_CR_DISCREPANCY_NOTE not in classify_regime(2, 1.5, 4.0, 1.0).notes

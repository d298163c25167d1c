import math

import numpy as np
import pytest

from vfdiff import evolution
from vfdiff.diagnostics import energy, mass
from vfdiff.evolution import (PositivityError, Problem, evolve, step_u_form, step_v_form, to_u,
                              to_v)
from vfdiff.grid import Field, integrate, make_grid
from vfdiff.sources import SourceTerm


def grid1(n=64):
    return make_grid(1, [1.0], [n])


def cos_field(g, amp=1.0, base=0.0, mode=1):
    return g.sample(lambda x: base + amp * np.cos(mode * np.pi * x))


@pytest.mark.parametrize("k", [1.5, 2.0, 3.0, 7.0])
def test_u_v_round_trip(k):
    v = cos_field(grid1(), 0.4, 1.0)
    np.testing.assert_allclose(to_v(to_u(v, k), k).values, v.values, rtol=1e-14)


def test_k_two_maps_to_reciprocal():
    v = cos_field(grid1(), 0.4, 1.0)
    np.testing.assert_allclose(to_u(v, 2.0).values, 1 / v.values, rtol=1e-15)


def test_to_u_rejects_nonpositive():
    g = grid1(4)
    with pytest.raises(ValueError, match="cell 1"):
        to_u(Field(g, [1.0, -1.0, 1.0, 1.0]), 2.0)


@pytest.mark.parametrize("scheme", ["v_form", "u_form"])
def test_constant_state_is_fixed(scheme):
    g = make_grid(2, [1.0, 1.0], [8, 8])
    src = SourceTerm.zero(g)
    v = g.constant(1.7)
    if scheme == "v_form":
        v1 = step_v_form(v, 0.1, 2.0, src, 0.1)
    else:
        v1 = to_v(step_u_form(to_u(v, 2.0), 0.1, 2.0, src, 2.0, 0.1), 2.0)
    np.testing.assert_allclose(v1.values, 1.7, rtol=1e-14)


def test_linearized_amplitude_factor():
    n, dt, eps = 64, 1e-3, 1e-6
    g = grid1(n)
    v = cos_field(g, eps, 1.0)
    v1 = step_v_form(v, dt, 2.0, SourceTerm.zero(g), dt)
    h = 1.0 / n
    lam = (2 - 2 * math.cos(math.pi * h)) / h**2
    amp = (v1.values - 1.0) / (v.values - 1.0)
    np.testing.assert_allclose(amp, 1 / (1 + dt * lam), rtol=1e-4)


def test_u_form_conserves_sum_each_step():
    g = grid1(128)
    src = SourceTerm.time_homogeneous(cos_field(g))
    u = to_u(cos_field(g, 0.3, 1.0), 3.0)
    m = 1.5
    total = integrate(u)
    for j in range(20):
        u = step_u_form(u, 1e-3, m, src, 3.0, (j + 1) * 1e-3)
        assert abs(integrate(u) - total) <= 1e-12 * total


def test_v_and_u_steps_agree_to_first_order():
    g = grid1(128)
    src = SourceTerm.time_homogeneous(cos_field(g))
    v = cos_field(g, 0.3, 1.0)
    gaps = []
    for dt in (2e-3, 1e-3, 5e-4):
        a = step_v_form(v, dt, 2.0, src, dt)
        b = to_v(step_u_form(to_u(v, 2.0), dt, 2.0, src, 2.0, dt), 2.0)
        gaps.append(np.max(np.abs(a.values - b.values)))
    for big, small in zip(gaps, gaps[1:]):
        assert 3.0 <= big / small <= 4.5


@pytest.mark.parametrize("scheme", ["v_form", "u_form"])
def test_maximum_principle_without_source(scheme):
    g = grid1(64)
    v0 = cos_field(g, 0.5, 1.0, mode=2)
    traj = evolve(Problem(g, 2.0, SourceTerm.zero(g), v0), scheme, T=0.05, dt0=1e-3)
    lo, hi = v0.min(), v0.max()
    for v in traj.snapshots:
        assert v.min() >= lo - 1e-12 and v.max() <= hi + 1e-12


def test_energy_nonincreasing_with_steady_source():
    g = grid1(64)
    f = cos_field(g)
    traj = evolve(Problem(g, 2.0, SourceTerm.time_homogeneous(f), cos_field(g, 0.2, 1.0, 2)),
                  "v_form", T=0.2, dt0=1e-3)
    E = traj.step_array("energy")
    assert np.all(np.diff(E) <= 1e-10 * (1 + np.abs(E[:-1])))


def test_records_land_on_requested_times():
    g = grid1(32)
    traj = evolve(Problem(g, 2.0, SourceTerm.zero(g), cos_field(g, 0.1, 1.0)),
                  "u_form", T=0.1, dt0=3e-3, record_every=0.025)
    assert traj.times == pytest.approx([0.0, 0.025, 0.05, 0.075, 0.1], abs=1e-15)
    assert traj.termination == "reached T"
    assert sum(traj.dt_history) == pytest.approx(0.1, rel=1e-12)


def test_huge_step_is_halved_until_accepted():
    g = grid1(32)
    src = SourceTerm.time_homogeneous(cos_field(g, 20.0))
    traj = evolve(Problem(g, 2.0, src, g.constant(1.0)), "v_form", T=0.5, dt0=10.0)
    assert traj.termination == "reached T"
    assert min(traj.dt_history) < 0.5
    assert np.all(traj.step_array("v_min") > 0)


def test_step_underflow_terminates(monkeypatch):
    def always_fail(*args, **kwargs):
        raise PositivityError("forced")

    monkeypatch.setattr(evolution, "step_v_form", always_fail)
    g = grid1(8)
    traj = evolve(Problem(g, 2.0, SourceTerm.zero(g), g.constant(1.0)), "v_form", T=1.0, dt0=0.1)
    assert traj.termination == "step underflow"
    assert len(traj.snapshots) == 1


def test_mass_recorded_per_step():
    g = grid1(32)
    v0 = cos_field(g, 0.2, 1.0)
    traj = evolve(Problem(g, 3.0, SourceTerm.zero(g), v0), "u_form", T=0.02, dt0=1e-3)
    M = mass(v0, 3.0)
    assert np.max(np.abs(traj.step_array("mass") - M)) <= 1e-12 * M
    assert traj.step_array("energy")[-1] <= energy(v0, g.constant(0.0))


@pytest.mark.parametrize("kwargs,match", [
    ({"scheme": "x_form"}, "scheme"),
    ({"T": 0.0}, "T must"),
    ({"dt0": -1.0}, "dt0"),
    ({"record_every": 0.0}, "record_every"),
])
def test_evolve_rejects_bad_arguments(kwargs, match):
    g = grid1(8)
    with pytest.raises(ValueError, match=match):
        evolve(Problem(g, 2.0, SourceTerm.zero(g), g.constant(1.0)), **kwargs)


def test_problem_validation():
    g = grid1(8)
    with pytest.raises(ValueError, match="k must exceed 1"):
        Problem(g, 1.0, SourceTerm.zero(g), g.constant(1.0))
    with pytest.raises(ValueError):
        Problem(g, 2.0, SourceTerm.zero(g), Field(g, np.r_[np.ones(7), 0.0]))
    with pytest.raises(ValueError):
        Problem(g, 2.0, SourceTerm.zero(grid1(9)), g.constant(1.0))
    with pytest.raises(ValueError):
        step_v_form(g.constant(1.0), 0.0, 2.0, SourceTerm.zero(g), 0.0)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vfdiff.diagnostics import (csv_header, energy, energy_identity_residual, entropy,
                                entropy_identity_residual, fit_decay_rate, gradient_bound_check,
                                mass, positivity_bound_check, positivity_lower_bound)
from vfdiff.evolution import Problem, Trajectory, evolve
from vfdiff.grid import integrate, make_grid
from vfdiff.sources import SourceTerm, project_zero_mean


def g1(n=256):
    return make_grid(1, [1.0], [n])


def test_mass_of_constants():
    g = make_grid(2, [1.0, 1.0], [4, 4])
    assert mass(g.constant(1.0), 3.0) == pytest.approx(1.0)
    assert mass(g.constant(2.0), 2.0) == pytest.approx(0.5)


def test_mass_rejects_nonpositive():
    g = g1(4)
    with pytest.raises(ValueError):
        mass(g.constant(0.0), 2.0)


def test_energy_example():
    g = g1(256)
    v = g.sample(lambda x: 1 + 0.1 * np.cos(np.pi * x))
    f = g.sample(lambda x: np.cos(np.pi * x))
    # pi^2/400 + 1/20
    assert energy(v, f) == pytest.approx(math.pi**2 / 400 + 0.05, abs=1e-3)
    assert energy(g.constant(3.0), f) == pytest.approx(0.0, abs=1e-14)


def test_entropy_examples():
    g = g1(8)
    assert entropy(g.constant(2.0), 1.0) == pytest.approx(0.5)
    assert entropy(g.constant(0.5), 3.0) == pytest.approx(8.0)
    with pytest.raises(ValueError):
        entropy(g.constant(1.0), 0.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(1.1, 4.0), st.floats(0.1, 4.0))
def test_functional_scaling(lam, k, p):
    g = g1(32)
    v = g.sample(lambda x: 1 + 0.3 * np.sin(3 * x))
    assert mass(v * lam, k) == pytest.approx(lam ** (1 - k) * mass(v, k), rel=1e-12)
    assert entropy(v * lam, p) == pytest.approx(lam ** (-p) * entropy(v, p), rel=1e-12)


def test_energy_sees_only_zero_mean_part_up_to_mass_term():
    g = g1(64)
    v = g.sample(lambda x: 1 + x**2)
    f = g.sample(lambda x: np.cos(np.pi * x) + 0.25)
    diff = energy(v, f) - energy(v, project_zero_mean(f))
    assert diff == pytest.approx(0.25 * integrate(v), rel=1e-12)


def flat_trajectory(n_snap=5):
    g = g1(16)
    traj = Trajectory("v_form", 2.0, 1.0)
    for j in range(n_snap):
        traj.times.append(0.1 * j)
        traj.snapshots.append(g.constant(1.0))
    return traj, SourceTerm.zero(g)


def test_identity_residuals_vanish_on_constant_trajectory():
    traj, src = flat_trajectory()
    assert np.all(energy_identity_residual(traj, src) == 0.0)
    assert np.allclose(entropy_identity_residual(traj, src, 4.0), 0.0, atol=1e-14)


@pytest.mark.parametrize("p", [0.5, 1.0, 2.0])
def test_entropy_identity_rejects_excluded_exponents(p):
    traj, src = flat_trajectory()
    with pytest.raises(ValueError, match="p > k - 1"):
        entropy_identity_residual(traj, src, p)


def test_identity_residuals_need_uniform_records():
    traj, src = flat_trajectory(2)
    with pytest.raises(ValueError, match="at least 3"):
        energy_identity_residual(traj, src)
    traj, src = flat_trajectory(4)
    traj.times[2] = 0.25
    with pytest.raises(ValueError, match="uniform"):
        energy_identity_residual(traj, src)


def test_entropy_nonincreasing_without_source():
    g = g1(64)
    v0 = g.sample(lambda x: 1 + 0.3 * np.cos(np.pi * x))
    traj = evolve(Problem(g, 2.0, SourceTerm.zero(g), v0), "v_form", T=0.1, dt0=1e-3,
                  record_every=0.01, entropy_ps=(4.0,))
    Y = [r.entropy[4.0] for r in traj.records]
    assert all(b <= a + 1e-13 for a, b in zip(Y, Y[1:]))


def test_csv_header_columns():
    assert csv_header([4.0, 2.5]) == ["t", "mass", "mass_drift_rel", "energy", "entropy_p4",
                                      "entropy_p2.5", "grad_w_sq", "h1_dist", "v_min", "v_max",
                                      "grad_v_sq"]


def test_positivity_lower_bound_formula():
    assert positivity_lower_bound(1.0, 1.0, 2.0, 1.0) == pytest.approx(0.5)
    assert positivity_lower_bound(1.0, 0.0, 3.0, 5.0) == pytest.approx(1.0)
    assert positivity_lower_bound(1.0, 1.0, 3.0, 1.5) == pytest.approx(0.5)


def test_positivity_bound_check_reports_violations():
    traj, _ = flat_trajectory()
    rep = positivity_bound_check(traj, 1.0, 2.0)
    assert rep.holds and rep.worst_margin == pytest.approx(0.0)
    g = traj.snapshots[0].grid
    traj.snapshots[-1] = g.constant(0.1)
    rep = positivity_bound_check(traj, 1.0, 2.0)
    assert not rep.holds
    assert rep.detail["t_worst"] == pytest.approx(0.4)


def test_gradient_bound_check():
    traj, _ = flat_trajectory()
    assert gradient_bound_check(traj).holds
    g = traj.snapshots[0].grid
    traj.snapshots[1] = g.sample(lambda x: 1 + 0.01 * x)
    traj.snapshots[-1] = g.sample(lambda x: 1 + x)
    rep = gradient_bound_check(traj)
    assert not rep.holds
    assert rep.detail["t_sup"] == pytest.approx(0.4)


def test_fit_exact_exponential():
    t = np.linspace(0, 2, 41)
    fit = fit_decay_rate(t, 3.0 * np.exp(-2.5 * t))
    assert fit.decay_rate == pytest.approx(2.5, rel=1e-12)
    assert fit.amplitude == pytest.approx(3.0, rel=1e-12)
    assert fit.r_squared == pytest.approx(1.0)
    np.testing.assert_allclose(fit.predict(t), 3.0 * np.exp(-2.5 * t), rtol=1e-12)
    assert set(fit.to_dict()) == {"lambda", "amplitude", "r_squared", "t_a", "t_b"}


def test_fit_constant_data():
    fit = fit_decay_rate(np.arange(10.0), np.full(10, 0.3))
    assert fit.decay_rate == 0.0
    assert fit.r_squared == 1.0


def test_fit_uses_trailing_run_above_floor():
    t = np.linspace(0, 10, 101)
    d = np.exp(-3 * t)
    fit = fit_decay_rate(t, d, floor_rel=1e-6)
    assert fit.t_b <= -math.log(1e-6) / 3 + 1e-9
    fit = fit_decay_rate(t, d, floor_rel=1e-6, t_min=1.0)
    assert fit.t_a == pytest.approx(1.0)


def test_fit_perturbed_exponential():
    rng = np.random.default_rng(3)
    t = np.linspace(0, 1, 50)
    d = np.exp(-4 * t) * (1 + 0.01 * rng.standard_normal(t.size))
    fit = fit_decay_rate(t, d)
    assert fit.decay_rate == pytest.approx(4.0, rel=0.02)
    assert fit.r_squared >= 0.99


def test_fit_insufficient_data():
    with pytest.raises(ValueError, match="insufficient decay data"):
        fit_decay_rate([0, 1, 2], [1.0, 0.5, 0.25])


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(-5, 5), st.floats(0.1, 5))
def test_fit_scale_and_shift_invariance(scale, shift, lam):
    t = np.linspace(0, 2, 30)
    d = np.exp(-lam * t)
    base = fit_decay_rate(t, d)
    scaled = fit_decay_rate(t, scale * d)
    shifted = fit_decay_rate(t + shift, d)
    assert scaled.decay_rate == pytest.approx(base.decay_rate, rel=1e-9)
    assert shifted.decay_rate == pytest.approx(base.decay_rate, rel=1e-9)

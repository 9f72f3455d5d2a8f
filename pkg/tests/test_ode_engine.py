import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_force_dstar, ci_series, rk4_mode
from reslab.damping import model_case, square_wave
from reslab.ode_engine import (IntegrationError, ModeState, abel_determinant, dstar,
                               dstar_from_matrices, integrate_mode, log_checkpoints,
                               mode_energy, propagator, propagator_series)


def test_undamped_full_period():
    spec = model_case(0, 0)
    tr = integrate_mode(spec, 1.0, ModeState(1.0, 1.0, 0.0, 1.0), 1 + 2 * math.pi)
    assert tr.u[-1] == pytest.approx(1.0, abs=1e-8)
    assert tr.u_prime[-1] == pytest.approx(0.0, abs=1e-8)
    np.testing.assert_allclose(tr.energy, 1.0, atol=1e-8)


def test_zero_frequency_closed_form():
    spec = model_case(3, 0)
    tr = integrate_mode(spec, 0.0, ModeState(1.0, 0.0, 1.0, 0.0), 1e3, tol=1e-12)
    # step control is relative to the state norm, and u tends to 1/2 here
    np.testing.assert_allclose(tr.u_prime, tr.t ** -3.0, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(tr.u, 0.5 * (1 - tr.t ** -2.0), rtol=1e-8)


def test_against_rk4_oracle():
    spec = model_case(3, 2)
    tr = integrate_mode(spec, 1.0, ModeState(1.0, 1.0, 0.0, 1.0), 100.0)
    u, v = rk4_mode(1.0, 0.0, 1.0, 100.0, 1e-4, 3.0, 2.0, 1.0)
    assert tr.energy[-1] == pytest.approx(u * u + v * v, rel=1e-6)


def test_against_rk4_oracle_other_frequency():
    spec = model_case(3, 2, alpha0=0.7)
    tr = integrate_mode(spec, 2.5, ModeState(1.0, 0.3, -1.0, 2.5), 50.0)
    u, v = rk4_mode(0.3, -1.0, 1.0, 50.0, 1e-4, 3.0, 2.0, 2.5, alpha0=0.7)
    assert tr.u[-1] == pytest.approx(u, rel=1e-6, abs=1e-12)
    assert tr.u_prime[-1] == pytest.approx(v, rel=1e-6, abs=1e-12)


@pytest.mark.parametrize("u, up, lam, expected", [(1, 0, 1, 1), (1, 0, 0, 0), (3, 4, 1, 25)])
def test_mode_energy(u, up, lam, expected):
    assert mode_energy(ModeState(1.0, u, up, lam)) == expected


def test_log_checkpoints_density():
    ts = log_checkpoints(1.0, 1e5)
    assert ts[0] == 1.0 and ts[-1] == 1e5
    assert ts.size == 5 * 64 + 1
    assert np.all(np.diff(ts) > 0)


def test_trajectory_columns():
    tr = integrate_mode(model_case(3, 2), 1.0, ModeState(1.0, 1.0, 0.0, 1.0), 10.0)
    assert list(tr.columns()) == ["t", "u", "u_prime", "energy"]
    assert tr.t[0] == 1.0


def test_polar_form_keeps_tiny_energies():
    spec = model_case(12, 0)
    tr = integrate_mode(spec, 1.0, ModeState(1.0, 1.0, 0.0, 1.0), 1e5, form="polar")
    assert np.all(np.isfinite(tr.energy_log()))
    assert tr.energy_log()[-1] < -100


def test_invalid_tolerance():
    with pytest.raises(ValueError):
        integrate_mode(model_case(3, 2), 1.0, ModeState(1.0, 1.0, 0.0, 1.0), 10.0, tol=1e-3)
    with pytest.raises(ValueError):
        integrate_mode(model_case(3, 2), 1.0, ModeState(1.0, 1.0, 0.0, 1.0), 10.0, tol=1e-15)


def test_initial_time_must_match():
    with pytest.raises(ValueError):
        integrate_mode(model_case(3, 2), 1.0, ModeState(2.0, 1.0, 0.0, 1.0), 10.0)


def test_overflow_reports_last_good_time():
    spec = model_case(-3000, 0)
    with pytest.raises(IntegrationError) as info:
        integrate_mode(spec, 1.0, ModeState(1.0, 0.0, 1.0, 1.0), 100.0)
    assert 1.0 <= info.value.last_good_time < 100.0


def test_propagator_identity_at_t0():
    P = propagator(model_case(3, 2), 1.0, 1.0)
    np.testing.assert_array_equal(P.matrix, np.eye(2))


@pytest.mark.parametrize("lam", [0.0, 0.5, 1.0, 3.0])
def test_propagator_det_constant_damping(lam):
    P = propagator(model_case(3, 0), lam, 10.0, tol=1e-12)
    assert P.det == pytest.approx(1e-3, rel=1e-8)


def test_propagator_det_ci_oracle():
    P = propagator(model_case(3, 2), 1.0, 10.0, tol=1e-12)
    expected = 1e-3 * math.exp(-2 * (ci_series(20) - ci_series(2)))
    assert P.det == pytest.approx(expected, rel=1e-8)
    assert abel_determinant(model_case(3, 2), 10.0) == pytest.approx(expected, rel=1e-13)


def test_propagator_columns_are_solutions():
    spec = model_case(3, 2)
    P = propagator(spec, 1.3, 20.0, tol=1e-12)
    tr = integrate_mode(spec, 1.3, ModeState(1.0, 0.4, -0.2, 1.3), 20.0, tol=1e-12)
    u, up = P.apply(0.4, -0.2)
    assert u == pytest.approx(tr.u[-1], rel=1e-9)
    assert up == pytest.approx(tr.u_prime[-1], rel=1e-9)


def test_propagator_record():
    rec = propagator(model_case(3, 2), 1.0, 5.0).to_record()
    assert {"lambda", "t_start", "t", "det", "a11", "a12", "a21", "a22"} <= set(rec)


def test_abel_identity_square_wave():
    spec = square_wave(3.0, 1.0)
    ts = log_checkpoints(1.0, 1e3, 16)
    mats, _ = propagator_series(spec, 1.0, ts, tol=1e-12)
    det = np.linalg.det(mats)
    ref = np.array([abel_determinant(spec, t) for t in ts])
    np.testing.assert_allclose(det, ref, rtol=1e-8)


@pytest.mark.parametrize("spec", [model_case(3, 2), model_case(0, 0), square_wave(3, 1),
                                  model_case(1, 5, alpha0=2.0)])
@pytest.mark.parametrize("lam", [0.0, 0.3, 1.0, 4.0])
def test_dstar_at_t0_is_one(spec, lam):
    assert dstar(spec, lam, spec.t0) == 1.0


def test_dstar_rotation_case():
    assert dstar(model_case(0, 0), 1.0, 1 + 2 * math.pi) == pytest.approx(1.0, abs=1e-8)


def test_dstar_brute_force():
    spec = model_case(3, 2)
    val = dstar(spec, 1.0, 1e3, tol=1e-12)
    ref = brute_force_dstar(3.0, 2.0, 1.0, 1.0, 1e3, 1e-3)
    assert val == pytest.approx(ref, rel=1e-4)


def test_dstar_pure_energy_flag():
    spec = model_case(3, 2)
    assert dstar(spec, 2.0, 1.0, include_displacement=False) == 1.0
    a = dstar(spec, 2.0, 50.0, include_displacement=False)
    b = dstar(spec, 2.0, 50.0)
    # the mixed constraint admits fewer data, so its worst case is smaller
    assert b <= a * (1 + 1e-12)
    with pytest.raises(ValueError):
        dstar_from_matrices(np.eye(2)[None], 0.0, include_displacement=False)


def test_dstar_array_times():
    spec = model_case(3, 2)
    ts = np.array([1.0, 10.0, 100.0])
    vals = dstar(spec, 1.0, ts)
    assert vals[0] == 1.0
    assert vals[2] == pytest.approx(dstar(spec, 1.0, 100.0), rel=1e-12)


spec_params = st.tuples(st.floats(0.0, 4.0), st.floats(0.0, 3.0), st.floats(0.0, 2 * math.pi))


@given(spec_params, st.floats(0.2, 3.0))
def test_abel_identity_along_checkpoints(params, lam):
    m, r, alpha0 = params
    spec = model_case(m, r, alpha0=alpha0)
    ts = log_checkpoints(1.0, 100.0, 16)
    mats, _ = propagator_series(spec, lam, ts, tol=1e-12)
    det = np.linalg.det(mats)
    ref = np.array([abel_determinant(spec, t) for t in ts])
    np.testing.assert_allclose(det, ref, rtol=1e-8)


@given(st.floats(0.5, 4.0), st.floats(0.0, 1.0), st.floats(0.2, 3.0), st.floats(0, 2 * math.pi))
def test_energy_nonincreasing_for_nonnegative_damping(m, frac, lam, psi):
    spec = model_case(m, frac * m)
    ts = np.linspace(1.0, 60.0, 2000)
    tr = integrate_mode(spec, lam, ModeState(1.0, math.cos(psi), math.sin(psi), lam),
                        times=ts, tol=1e-11)
    e = tr.energy
    assert np.all(np.diff(e) <= 1e-9 * e[:-1])


def test_energy_plus_displacement_is_not_monotone():
    # d/dt (E* + u^2) = -2 b u'^2 + 2 u u' can be positive, so only E* is monotone
    tr = integrate_mode(model_case(3, 0), 1.0, ModeState(1.0, 1.0, 0.0, 1.0),
                        times=np.linspace(1, 30, 3000))
    mixed = tr.energy + tr.u ** 2
    assert np.any(np.diff(mixed) > 0)


@given(spec_params, st.floats(0.2, 3.0), st.floats(-2, 2), st.floats(-2, 2))
def test_linearity(params, lam, a, b):
    m, r, alpha0 = params
    spec = model_case(m, r, alpha0=alpha0)
    ts = log_checkpoints(1.0, 50.0, 8)
    run = lambda u, v: integrate_mode(spec, lam, ModeState(1.0, u, v, lam), times=ts, tol=1e-12)
    x, y, z = run(1.0, 0.0), run(0.0, 1.0), run(a, b)
    scale = np.maximum(np.abs(x.u) + np.abs(y.u), np.abs(x.u_prime) + np.abs(y.u_prime))
    scale = scale * (abs(a) + abs(b) + 1e-300)
    np.testing.assert_array_less(np.abs(z.u - (a * x.u + b * y.u)), 1e-8 * scale + 1e-300)
    np.testing.assert_array_less(np.abs(z.u_prime - (a * x.u_prime + b * y.u_prime)),
                                 1e-8 * scale + 1e-300)


@given(spec_params, st.floats(0.0, 3.0), st.floats(0, 2 * math.pi), st.floats(0.0, 1.0))
def test_dstar_dominates_admissible_solutions(params, lam, psi, radius):
    m, r, alpha0 = params
    spec = model_case(m, r, alpha0=alpha0)
    # point inside the constraint ellipse (lam^2 + 1) u0^2 + u0'^2 <= 1
    u0 = radius * math.cos(psi) / math.sqrt(lam * lam + 1)
    v0 = radius * math.sin(psi)
    ts = log_checkpoints(1.0, 100.0, 8)
    tr = integrate_mode(spec, lam, ModeState(1.0, u0, v0, lam), times=ts, tol=1e-11)
    bound = dstar(spec, lam, ts, tol=1e-11)
    assert np.all(tr.energy <= bound * (1 + 1e-6) + 1e-300)

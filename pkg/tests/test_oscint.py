import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from oracles import ci_series, si_series
from reslab.oscint import (OscAccuracyError, OscIntegrand, finite_cos_integral,
                           oscillatory_integral, tail_bound, tail_start)


def test_cosine_integral_oracle():
    res = oscillatory_integral(OscIntegrand(2, 1.0, "cos"), tol=1e-10)
    assert res.value == pytest.approx(-ci_series(2), abs=1e-8)
    assert res.value == pytest.approx(-0.4229808, abs=1e-7)


def test_sine_integral_oracle():
    res = oscillatory_integral(OscIntegrand(1, 1.0, "sin"), tol=1e-10)
    assert res.value == pytest.approx(math.pi / 2 - si_series(1), abs=1e-8)
    assert res.value == pytest.approx(0.6247132, abs=1e-7)


def test_constant_phase_angle_addition():
    c = math.pi / 3
    f = OscIntegrand(2, 1.0, "cos", h=lambda t: np.full_like(t, c), dh=np.zeros_like)
    expected = math.cos(c) * (-ci_series(2)) - math.sin(c) * (math.pi / 2 - si_series(2))
    assert oscillatory_integral(f, tol=1e-10).value == pytest.approx(expected, abs=1e-8)


@pytest.mark.parametrize("n, K0, expected", [(2, 0.0, 1e6), (4, 0.0, 5e5), (2, 5.0, 3.5e6)])
def test_tail_start(n, K0, expected):
    f = OscIntegrand(n, 1.0, K0=K0)
    T = tail_start(f, 1e-6)
    assert T == pytest.approx(expected, rel=1e-12)
    assert tail_bound(f, T) == pytest.approx(1e-6, rel=1e-12)


def test_result_record():
    res = oscillatory_integral(OscIntegrand(2, 1.0, "cos"))
    d = res.to_dict()
    assert list(d) == ["n", "alpha", "kind", "value", "error_bound", "T_truncation",
                       "periods_summed"]
    assert d["periods_summed"] > 0 and d["error_bound"] <= 1e-9


@pytest.mark.parametrize("alpha, kind", [(0.5, "cos"), (0.5, "sin"), (1.5, "cos"), (2.0, "sin")])
def test_against_qawf(alpha, kind):
    got = oscillatory_integral(OscIntegrand(1.0, alpha, kind, t0=1.0), tol=1e-10).value
    ref, _ = integrate.quad(lambda t: t ** -alpha, 1.0, np.inf, weight=kind, wvar=1.0,
                            epsabs=1e-12, limlst=200)
    assert got == pytest.approx(ref, abs=1e-8)


def test_slowly_varying_phase():
    # h = log t gives cos(t + log t)/t; compare against quadrature on [1, T] plus a QAWF tail
    f = OscIntegrand(1.0, 1.0, "cos", h=np.log, dh=lambda t: 1 / t, K0=1.0)
    assert f.verify_bound()
    got = oscillatory_integral(f, tol=1e-10).value
    T = 200 * math.pi
    head, _ = integrate.quad(f, 1.0, T, limit=2000, epsabs=1e-13)
    # beyond T, cos(t + log t) = cos t cos(log t) - sin t sin(log t)
    tail_c, _ = integrate.quad(lambda t: math.cos(math.log(t)) / t, T, np.inf, weight="cos",
                               wvar=1.0, epsabs=1e-13, limlst=400)
    tail_s, _ = integrate.quad(lambda t: math.sin(math.log(t)) / t, T, np.inf, weight="sin",
                               wvar=1.0, epsabs=1e-13, limlst=400)
    assert got == pytest.approx(head + tail_c - tail_s, abs=1e-8)


def test_accuracy_error():
    with pytest.raises(OscAccuracyError) as info:
        oscillatory_integral(OscIntegrand(1.0, 1.001, "cos"), tol=1e-14, max_chunks=1000)
    assert info.value.achieved > 0


@pytest.mark.parametrize("kw", [dict(n=0, alpha=1), dict(n=1, alpha=0), dict(n=1, alpha=1, kind="tan"),
                                dict(n=1, alpha=1, t0=0), dict(n=1, alpha=1, K0=-1),
                                dict(n=1, alpha=1, h=np.sin)])
def test_invalid_integrands(kw):
    with pytest.raises(ValueError):
        OscIntegrand(**kw)


def test_finite_cos_integral():
    assert finite_cos_integral(2.0, 0.0, 1.0, 10.0) == pytest.approx(
        ci_series(20) - ci_series(2), abs=1e-12)
    assert finite_cos_integral(2.0, 0.3, 5.0, 5.0) == 0.0
    a = finite_cos_integral(1.0, 0.2, 3.0, 1.0)
    assert a == pytest.approx(-finite_cos_integral(1.0, 0.2, 1.0, 3.0), abs=1e-15)


@given(st.integers(1, 6), st.floats(0.2, 5.0))
def test_frequency_shift(n, t0):
    a = oscillatory_integral(OscIntegrand(n, 1.0, "cos", t0=t0), tol=1e-11).value
    b = oscillatory_integral(OscIntegrand(1, 1.0, "cos", t0=n * t0), tol=1e-11).value
    assert a == pytest.approx(b, abs=2e-10)


@given(st.integers(1, 5), st.floats(0.0, 2 * math.pi), st.floats(0.3, 1.0))
def test_linearity_in_kind(n, c, alpha):
    tol = 1e-10
    const = dict(h=lambda t: np.full_like(t, c), dh=np.zeros_like)
    hc = oscillatory_integral(OscIntegrand(n, alpha, "cos", **const), tol=tol).value
    hs = oscillatory_integral(OscIntegrand(n, alpha, "sin", **const), tol=tol).value
    zc = oscillatory_integral(OscIntegrand(n, alpha, "cos"), tol=tol).value
    zs = oscillatory_integral(OscIntegrand(n, alpha, "sin"), tol=tol).value
    # rotate the shifted pair back by -c
    assert math.cos(c) * hc + math.sin(c) * hs == pytest.approx(zc, abs=2 * tol + 1e-12)
    assert math.cos(c) * hs - math.sin(c) * hc == pytest.approx(zs, abs=2 * tol + 1e-12)


@given(st.integers(1, 4), st.floats(0.5, 1.0))
def test_accelerated_value_inside_final_bracket(n, alpha):
    f = OscIntegrand(n, alpha, "cos")
    res = oscillatory_integral(f, tol=1e-10)
    half = math.pi / n
    k = res.periods_summed
    s1, _ = integrate.quad(f, f.t0, f.t0 + half * (k - 1), limit=k + 50)
    last, _ = integrate.quad(f, f.t0 + half * (k - 1), f.t0 + half * k)
    lo, hi = sorted((s1, s1 + last))
    assert lo - 1e-9 <= res.value <= hi + 1e-9

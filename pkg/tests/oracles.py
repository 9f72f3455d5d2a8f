"""Reference computations that share no code with the package.

* a fixed-step classical RK4 integrator with its own model-case damping,
* the cosine and sine integrals from their power series in exact rational
  arithmetic,
* a brute-force maximization of the mode energy over initial directions.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
from numba import njit

EULER_GAMMA = 0.57721566490153286061


@njit(cache=True)
def _rhs(t, u, v, m, r, lam0, alpha0, lam):
    b = (m + r * math.cos(2.0 * lam0 * t + alpha0)) / t
    return v, -b * v - lam * lam * u


@njit(cache=True)
def _rk4(u, v, t0, t1, h, m, r, lam0, alpha0, lam):
    n = int(math.ceil((t1 - t0) / h - 1e-9))
    hh = (t1 - t0) / n
    t = t0
    for i in range(n):
        k1u, k1v = _rhs(t, u, v, m, r, lam0, alpha0, lam)
        k2u, k2v = _rhs(t + hh / 2, u + hh / 2 * k1u, v + hh / 2 * k1v, m, r, lam0, alpha0, lam)
        k3u, k3v = _rhs(t + hh / 2, u + hh / 2 * k2u, v + hh / 2 * k2v, m, r, lam0, alpha0, lam)
        k4u, k4v = _rhs(t + hh, u + hh * k3u, v + hh * k3v, m, r, lam0, alpha0, lam)
        u += hh / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
        v += hh / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        t = t0 + (i + 1) * hh
    return u, v


def rk4_mode(u0, v0, t0, t1, h, m, r, lam, lam0=1.0, alpha0=0.0):
    """(u, u') at t1 for u'' + (m + r cos(2 lam0 t + alpha0))/t u' + lam^2 u = 0."""
    return _rk4(float(u0), float(v0), float(t0), float(t1), float(h), float(m), float(r),
                float(lam0), float(alpha0), float(lam))


def _series_sum(x: Fraction, first_power: int, denom) -> Fraction:
    """sum_k (-1)^k x^(2k+first_power) / denom(k), summed until terms are below 1e-40."""
    total = Fraction(0)
    k = 0
    x2 = x * x
    power = x ** first_power
    tiny = Fraction(1, 10 ** 40)
    while True:
        term = power / denom(k)
        total += term if k % 2 == 0 else -term
        if term < tiny and k > 2:
            return total
        power *= x2
        k += 1


def ci_series(x) -> float:
    """Cosine integral Ci(x) = gamma + ln x + sum_{k>=1} (-x^2)^k / (2k (2k)!)."""
    xf = Fraction(x)
    s = _series_sum(xf, 2, lambda k: (2 * k + 2) * math.factorial(2 * k + 2))
    return EULER_GAMMA + math.log(float(x)) - float(s)


def si_series(x) -> float:
    """Sine integral Si(x) = sum_{k>=0} (-1)^k x^(2k+1) / ((2k+1) (2k+1)!)."""
    xf = Fraction(x)
    return float(_series_sum(xf, 1, lambda k: (2 * k + 1) * math.factorial(2 * k + 1)))


def brute_force_dstar(m, r, lam, t0, t, h, n_dir=10_000, lam0=1.0, alpha0=0.0):
    """max of u'(t)^2 + lam^2 u(t)^2 over n_dir data on (lam^2+1) u0^2 + u0'^2 = 1.

    Two basis solutions are propagated by :func:`rk4_mode` and combined
    linearly for every direction.
    """
    a11, a21 = rk4_mode(1.0, 0.0, t0, t, h, m, r, lam, lam0, alpha0)
    a12, a22 = rk4_mode(0.0, 1.0, t0, t, h, m, r, lam, lam0, alpha0)
    psi = np.linspace(0.0, 2 * np.pi, n_dir, endpoint=False)
    u0 = np.cos(psi) / math.sqrt(lam * lam + 1.0)
    v0 = np.sin(psi)
    u = a11 * u0 + a12 * v0
    v = a21 * u0 + a22 * v0
    return float(np.max(v * v + lam * lam * u * u))

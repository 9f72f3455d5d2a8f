"""Phase defect phi = 2 (t - theta) of the unit-frequency mode.

phi solves phi' = b(t) sin(2t - phi), which can be written as
phi' = a_phi(t) - (r/2) sin(phi)/t with an integrable forcing a_phi. Every
solution tends to a multiple of pi. Even limits attract and give slow decay;
the single odd-limit solution per 2 pi strip gives the fast-decaying mode.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson

from . import _kernels
from .damping import (DampingSpec, OutsideProvedRegimeWarning, eval_beta, fourier_rates,
                      pack_damping)
from .ode_engine import DEFAULT_TOL, _check_tol, log_checkpoints, run_kernel

__all__ = [
    "PhasePath",
    "EnvelopeBound",
    "SeparatrixResult",
    "ClassificationError",
    "InvalidBracketError",
    "ProbeTooShortError",
    "integrate_phase",
    "integrate_phases",
    "classify_phase_limit",
    "convergence_envelope",
    "forcing_partial_integrals",
    "find_separatrix",
    "default_probe_time",
    "resonance",
    "separatrix_initial_data",
]

FROZEN_BAND = 0.1


class ClassificationError(ValueError):
    """Envelope requested for a path that is not converging to an even multiple."""


class InvalidBracketError(ValueError):
    pass


class ProbeTooShortError(RuntimeError):
    """Bracket endpoints are still undecided at the probe time."""


@dataclass
class PhasePath:
    """Samples of one phase-defect solution.

    Times are in units of the resonant period (s = lambda0 t). ``r`` and
    ``offset`` describe the restoring term -(r/2) sin(phi - offset)/t, whose
    equilibria k pi + offset are the possible limits; ``averaged`` marks paths
    of that forcing-free equation.
    """

    t: np.ndarray
    phi: np.ndarray
    a_profile: np.ndarray
    r: float
    phi0: float
    offset: float = 0.0
    averaged: bool = False
    limit_k: int | None = None

    def nearest_k(self) -> int:
        return int(round((float(self.phi[-1]) - self.offset) / math.pi))

    def limit_value(self, k: int) -> float:
        return k * math.pi + self.offset

    def columns(self) -> dict:
        k = self.limit_k if self.limit_k is not None else self.nearest_k()
        return {"t": self.t, "phi": self.phi, "phi_minus_limit": self.phi - self.limit_value(k)}


@dataclass(frozen=True)
class EnvelopeBound:
    epsilon0: float
    bound_M: float
    window: tuple
    stabilized: bool
    last_decade_growth: float
    k: int


@dataclass(frozen=True)
class SeparatrixResult:
    phi0_star: float
    bracket_width: float
    probe_time: float
    limit_lo: int
    limit_hi: int
    theta1: float
    probes: int
    assumption: str = ("single odd-limit solution inside the bracket "
                       "(not certified between probes)")

    def to_dict(self) -> dict:
        return {"phi0_star": self.phi0_star, "bracket_width": self.bracket_width,
                "probe_time": self.probe_time, "limit_lo": self.limit_lo,
                "limit_hi": self.limit_hi, "theta1": self.theta1,
                "probes": self.probes, "assumption": self.assumption}


def resonance(spec: DampingSpec) -> tuple[float, float]:
    """(r, offset) of the resonant part r cos(2 lambda0 t - offset) of beta.

    The averaged phase equation is phi' = -(r/2) sin(phi - offset)/t, so the
    limits of phi sit at k pi + offset; parities refer to k.
    """
    if spec.kind == "model" and not spec.harmonics and not spec.segments:
        r, alpha = spec.r, spec.alpha0
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OutsideProvedRegimeWarning)
            pr = fourier_rates(spec)
        r, alpha = pr.r, math.atan2(-pr.r2, pr.r1)
    offset = math.remainder(-alpha, 2 * math.pi)
    return float(r), (0.0 if offset == 0 else offset)


def _restoring(spec: DampingSpec, r: float | None) -> tuple[float, float]:
    if r is not None:
        return float(r), (-spec.alpha0 if spec.kind != "periodic" else 0.0)
    return resonance(spec)


def _times(t0, t_end, times, per_decade):
    if times is not None:
        times = np.asarray(times, dtype=float)
        return times if times[0] == t0 else np.concatenate([[t0], times])
    if not t_end > t0:
        raise ValueError("t_end must exceed t0")
    return log_checkpoints(t0, t_end, per_decade)


def integrate_phases(spec: DampingSpec, phi0s, t_end: float | None = None,
                     tol: float = DEFAULT_TOL, *, times=None, per_decade: int = 64,
                     averaged: bool = False, r: float | None = None) -> list[PhasePath]:
    """Integrate several phase paths in one run (shared step-size control).

    For lambda0 != 1 time is rescaled to s = lambda0 t, so ``t_end`` and
    ``times`` are given in s and the paths start at lambda0 * t0. ``r``
    overrides the resonant amplitude of the restoring term (needed for custom
    phases, which have no Fourier coefficients).
    """
    _check_tol(tol)
    phi0s = np.atleast_1d(np.asarray(phi0s, dtype=float))
    c = 1.0 / spec.lambda0
    t0 = spec.t0 * spec.lambda0
    ts = _times(t0, t_end, times, per_decade)
    r, offset = _restoring(spec, r)
    params, offsets = pack_damping(spec, c)
    system = _kernels.PHASE_AVERAGED if averaged else _kernels.PHASE
    out, _, _ = run_kernel(system, phi0s, t0, ts, tol, params, offsets, 1.0, 1.0,
                           aux=np.array([r, offset]))
    if averaged:
        a = np.zeros_like(out)
    else:
        b = (eval_beta(spec, c * ts) / ts)[:, None]
        # a_phi = phi' + (r/2) sin(phi - offset)/t
        a = b * np.sin(2 * ts[:, None] - out) + 0.5 * r * np.sin(out - offset) / ts[:, None]
    return [PhasePath(t=ts, phi=out[:, j], a_profile=a[:, j], r=r, phi0=float(phi0s[j]),
                      offset=offset, averaged=averaged) for j in range(phi0s.size)]


def integrate_phase(spec: DampingSpec, phi0: float, t_end: float | None = None,
                    tol: float = DEFAULT_TOL, **kw) -> PhasePath:
    """Integrate phi' = b(t) sin(2t - phi) from phi(t0) = phi0."""
    return integrate_phases(spec, [phi0], t_end, tol, **kw)[0]


def classify_phase_limit(path: PhasePath, min_span: float = 1e3) -> tuple[int, str]:
    """(k, parity) with phi -> k pi, or parity 'undecided'.

    The limit counts as frozen when |phi - k pi| < 0.1 at every sample of the
    last decade of the path. Paths shorter than ``min_span`` * t0 are rejected.
    """
    t = path.t
    if t[-1] < min_span * t[0] * (1 - 1e-12):
        raise ValueError("path too short to classify")
    k = path.nearest_k()
    tail = t >= t[-1] / 10
    if np.all(np.abs(path.phi[tail] - path.limit_value(k)) < FROZEN_BAND):
        path.limit_k = k
        return k, "even" if k % 2 == 0 else "odd"
    return k, "undecided"


def convergence_envelope(path: PhasePath, epsilon0: float, window=None) -> EnvelopeBound:
    """Running sup of t^eps0 |phi - k pi| over the window and its stabilization.

    ``stabilized`` means the sup grew by less than 1 % over the last decade of
    the window.
    """
    k, parity = classify_phase_limit(path)
    if parity != "even":
        raise ClassificationError(f"path limit is {parity} (k = {k}); need an even limit")
    top = min(path.r / 2, 1.0)
    if not 0 < epsilon0 < top:
        raise ValueError(f"epsilon0 must lie in (0, {top})")
    lo, hi = window if window is not None else (path.t[0], path.t[-1])
    sel = (path.t >= lo * (1 - 1e-12)) & (path.t <= hi * (1 + 1e-12))
    t = path.t[sel]
    z = t ** epsilon0 * np.abs(path.phi[sel] - path.limit_value(k))
    running = np.maximum.accumulate(z)
    before = running[t <= hi / 10]
    m_end = float(running[-1])
    m_prev = float(before[-1]) if before.size else 0.0
    if m_end == 0.0:
        growth = 0.0
    else:
        growth = (m_end - m_prev) / m_end if m_prev > 0 else math.inf
    return EnvelopeBound(epsilon0=epsilon0, bound_M=m_end, window=(float(lo), float(hi)),
                         stabilized=growth < 0.01, last_decade_growth=growth, k=k)


def forcing_partial_integrals(path: PhasePath, epsilon0: float, starts) -> np.ndarray:
    """int_T^{10 T} t^eps0 a_phi(t) dt for each T.

    The path must be sampled densely (``polar.dense_times``); the quadrature is
    cumulative Simpson on the stored forcing samples.
    """
    t, a = path.t, path.a_profile
    cum = cumulative_simpson(t ** epsilon0 * a, x=t, initial=0.0)
    out = []
    for T in starts:
        out.append(np.interp(10 * T, t, cum) - np.interp(T, t, cum))
    return np.asarray(out)


def default_probe_time(spec: DampingSpec, r: float | None = None) -> float:
    """max(1e3 t0, 1e3 / min(r, 1)) in rescaled time; small r attracts slowly."""
    r = _restoring(spec, r)[0]
    return max(1e3 * spec.t0 * spec.lambda0, 1e3 / min(r, 1.0))


def _end_values(spec, phi0s, T, tol, averaged, aux):
    params, offsets = pack_damping(spec, 1.0 / spec.lambda0)
    system = _kernels.PHASE_AVERAGED if averaged else _kernels.PHASE
    out, _, _ = run_kernel(system, np.asarray(phi0s, dtype=float), spec.t0 * spec.lambda0,
                           np.array([T]), tol, params, offsets, 1.0, 1.0, aux=aux)
    return out[-1]


def find_separatrix(spec: DampingSpec, bracket=None, t_probe: float | None = None,
                    tol_phi: float = 1e-12, *, t_max: float | None = None,
                    tol: float = 1e-12, averaged: bool = False,
                    r: float | None = None) -> SeparatrixResult:
    """Bisect on phi(t0) for the solution tending to the odd limit between the
    even limits of the bracket endpoints.

    Both endpoints are first classified at ``t_probe`` (retried at tenfold
    horizons up to ``t_max`` while undecided). Bisection then uses the
    side of the odd midline on which phi(T) ends: by non-crossing this is
    monotone in phi(t0), and it stays decisive for starts so close to the
    separatrix that they have not left its neighbourhood by T. T starts at
    ``t_probe`` and grows tenfold (up to ``t_max``) once the bracket is
    narrower than the shift a finite horizon induces (about 10 (t0/T)^2); the
    bracket is re-validated, and widened if needed, at every new horizon.
    Times are in rescaled units s = lambda0 t. The default bracket is
    [offset, offset + 2 pi], i.e. [0, 2 pi] for an unshifted resonant term.

    Returns
    -------
    SeparatrixResult
        ``theta1 = s0 - phi0*/2`` reduced mod 2 pi, with s0 = lambda0 t0,
        gives the fast-mode data (see :func:`separatrix_initial_data`).

    Raises
    ------
    ProbeTooShortError
        An endpoint has not frozen by ``t_max``.
    InvalidBracketError
        The endpoint limits are not two consecutive even multiples.
    """
    r, offset = _restoring(spec, r)
    aux = np.array([r, offset])
    s0 = spec.t0 * spec.lambda0
    if bracket is None:
        bracket = (offset, offset + 2 * math.pi)
    t_probe = default_probe_time(spec, r) if t_probe is None else float(t_probe)
    t_max = 100 * t_probe if t_max is None else max(float(t_max), t_probe)
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise InvalidBracketError("bracket must be increasing")

    while True:
        paths = integrate_phases(spec, [lo, hi], t_probe, tol=max(tol, 1e-10),
                                 averaged=averaged, r=r)
        for p in paths:
            p.offset = offset
        (k_lo, p_lo), (k_hi, p_hi) = (classify_phase_limit(p, min_span=0.999 * t_probe / s0)
                                      for p in paths)
        if "undecided" not in (p_lo, p_hi):
            break
        if t_probe >= t_max * (1 - 1e-12):
            raise ProbeTooShortError(f"bracket endpoints undecided at t = {t_probe:g}; "
                                     "increase t_probe")
        t_probe = min(10 * t_probe, t_max)
    if p_lo != "even" or p_hi != "even" or k_hi - k_lo != 2:
        raise InvalidBracketError(
            f"endpoint limits {k_lo} pi and {k_hi} pi do not straddle one odd multiple")
    midline = 0.5 * (k_lo + k_hi) * math.pi + offset
    side = lambda phis, T: _end_values(spec, phis, T, tol, averaged, aux) - midline
    probes = 2

    T = t_probe
    while True:
        # re-validate (and widen) the bracket at this horizon
        f_lo, f_hi = side([lo, hi], T)
        probes += 1
        width = hi - lo
        while f_lo >= 0 or f_hi <= 0:
            if (f_lo >= 0 and lo <= bracket[0]) or (f_hi <= 0 and hi >= bracket[1]):
                raise ProbeTooShortError(f"bracket lost its sign change at t = {T:g}")
            if f_lo >= 0:
                lo = max(float(bracket[0]), lo - width)
            if f_hi <= 0:
                hi = min(float(bracket[1]), hi + width)
            width *= 2
            f_lo, f_hi = side([lo, hi], T)
            probes += 1
        last = T >= t_max * (1 - 1e-12)
        target = tol_phi if last else max(tol_phi, 10 * (s0 / T) ** 2)
        while hi - lo > target:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            f = side([mid], T)[0]
            probes += 1
            if f < 0:
                lo = mid
            else:
                hi = mid
        if last:
            break
        T = min(10 * T, t_max)

    phi0 = 0.5 * (lo + hi)
    theta1 = (s0 - 0.5 * phi0) % (2 * math.pi)
    return SeparatrixResult(phi0_star=phi0, bracket_width=hi - lo, probe_time=T,
                            limit_lo=k_lo, limit_hi=k_hi, theta1=theta1, probes=probes)


def separatrix_initial_data(result: SeparatrixResult, energy0: float = 1.0,
                            shift: float = 0.0, lam: float = 1.0) -> tuple[float, float]:
    """Mode data (u, u') at t0 for the separatrix, optionally with phi0 shifted.

    For the unit-frequency mode this is E0 (cos theta1, -sin theta1); a mode of
    frequency ``lam`` gets u' scaled by ``lam``.
    """
    theta1 = result.theta1 - 0.5 * shift
    return energy0 * math.cos(theta1), -lam * energy0 * math.sin(theta1)

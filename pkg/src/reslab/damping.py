"""Damping coefficients b(t) = beta(t)/t and the decay rates they predict.

Three families are supported:

* ``model``    : beta(t) = m + r cos(2 lambda0 t + alpha0) [+ additions]
* ``periodic`` : beta(t) = m + sum of cosine harmonics + periodic piecewise-linear table
* ``custom``   : beta(t) = m + r cos(eta(t)) with a named phase function eta

Any family accepts extra cosine ``harmonics`` and a periodic ``segments`` table,
which is how non-resonant perturbations delta(t) are attached to a model case.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "DampingSpec",
    "PredictedRates",
    "Regime",
    "DampingDomainError",
    "UnsupportedSpecError",
    "OutsideProvedRegimeWarning",
    "model_case",
    "square_wave",
    "eval_beta",
    "eval_damping",
    "damping_integral",
    "fourier_rates",
    "predict_classical",
    "check_nonresonance",
    "pack_damping",
]

KINDS = ("model", "periodic", "custom")
ETA_CODES = {"tlogt": 1, "t_over_logt": 2, "power": 3, "linear": 4}

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


class DampingDomainError(ValueError):
    """Raised when the coefficient is requested before the initial time."""


class UnsupportedSpecError(ValueError):
    """Raised when an operation needs a periodic profile and the damping has none."""


class OutsideProvedRegimeWarning(UserWarning):
    """lambda0 * p0 is not an integer multiple of pi."""


class Regime(str, Enum):
    NON_EFFECTIVE = "NonEffective"
    EFFECTIVE = "Effective"
    THRESHOLD = "Threshold"


@dataclass(frozen=True)
class DampingSpec:
    """Description of beta(t) in b(t) = beta(t)/t.

    Parameters
    ----------
    kind : {'model', 'periodic', 'custom'}
    m : float
        Constant part of beta.
    r : float
        Oscillation amplitude (model and custom kinds). Stored nonnegative.
    lambda0 : float
        Resonant frequency; the model oscillation is cos(2 lambda0 t + alpha0).
    alpha0 : float
        Phase shift in radians.
    period : float or None
        Period p0 of beta. Defaults to pi/lambda0 for the model kind.
    harmonics : tuple of (amplitude, omega, phase)
        Extra terms amplitude * cos(omega t + phase).
    segments : tuple of (x_start, x_end, v_start, v_end)
        Piecewise-linear table on [0, period), repeated periodically. Jumps are
        allowed between segments.
    eta : str or None
        Phase function for the custom kind: 'tlogt', 't_over_logt',
        'power' (t**eta_param) or 'linear' (eta_param * t).
    t0 : float
        Initial time, > 0.
    """

    kind: str = "model"
    m: float = 3.0
    r: float = 0.0
    lambda0: float = 1.0
    alpha0: float = 0.0
    period: float | None = None
    harmonics: tuple = ()
    segments: tuple = ()
    eta: str | None = None
    eta_param: float = 1.0
    t0: float = 1.0

    def __post_init__(self):
        for name in ("m", "r", "lambda0", "alpha0", "eta_param", "t0"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.period is not None:
            object.__setattr__(self, "period", float(self.period))
        if self.kind not in KINDS:
            raise ValueError(f"unknown damping kind {self.kind!r}; expected one of {KINDS}")
        if not self.t0 > 0:
            raise ValueError("t0 must be positive")
        if not self.lambda0 > 0:
            raise ValueError("lambda0 must be positive")
        if self.period is not None and not self.period > 0:
            raise ValueError("period must be positive")
        harmonics = tuple(tuple(float(x) for x in h) for h in self.harmonics)
        if any(len(h) != 3 for h in harmonics):
            raise ValueError("harmonics are (amplitude, omega, phase) triples")
        object.__setattr__(self, "harmonics", harmonics)
        segments = tuple(tuple(float(x) for x in s) for s in self.segments)
        if segments:
            if any(len(s) != 4 for s in segments):
                raise ValueError("segments are (x_start, x_end, v_start, v_end) rows")
            if self.period is None:
                raise ValueError("a segment table needs an explicit period")
            _check_table(segments, self.period)
        object.__setattr__(self, "segments", segments)
        if self.kind == "custom" and self.eta not in ETA_CODES:
            raise ValueError(f"custom damping needs eta in {sorted(ETA_CODES)}")
        if self.kind == "periodic" and self.period is None:
            raise ValueError("periodic damping needs a period")
        if self.r < 0 and self.kind in ("model", "custom"):
            # r -> -r is the same coefficient shifted by half a turn
            object.__setattr__(self, "r", -float(self.r))
            object.__setattr__(self, "alpha0", float(self.alpha0) + math.pi)

    @property
    def p0(self) -> float | None:
        """Period used for Fourier extraction (None for custom phases)."""
        if self.period is not None:
            return float(self.period)
        if self.kind == "model":
            return math.pi / self.lambda0
        return None

    @property
    def oscillates(self) -> bool:
        if self.kind == "periodic":
            return True
        return self.r != 0 or bool(self.harmonics) or bool(self.segments)

    def max_frequency(self) -> float:
        """Largest angular frequency present in beta (0 if constant)."""
        freqs = [abs(h[1]) for h in self.harmonics if h[0] != 0]
        if self.kind == "model" and self.r != 0:
            freqs.append(2 * self.lambda0)
        if self.segments:
            freqs.append(2 * math.pi / self.period)
        if self.kind == "custom" and self.r != 0:
            freqs.append(2 * self.lambda0)
        return max(freqs, default=0.0)

    def breakpoints(self) -> np.ndarray:
        """Segment boundaries inside one period, including 0 and the period."""
        if not self.segments:
            return np.zeros(0)
        pts = sorted({s[0] for s in self.segments} | {s[1] for s in self.segments})
        return np.asarray(pts, dtype=float)

    def with_(self, **changes) -> "DampingSpec":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["harmonics"] = [list(h) for h in self.harmonics]
        d["segments"] = [list(s) for s in self.segments]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DampingSpec":
        d = dict(d)
        d["harmonics"] = tuple(tuple(h) for h in d.get("harmonics", ()))
        d["segments"] = tuple(tuple(s) for s in d.get("segments", ()))
        return cls(**d)


def _check_table(segments, period):
    x = [s[0] for s in segments]
    if abs(segments[0][0]) > 1e-12 or abs(segments[-1][1] - period) > 1e-9 * period:
        raise ValueError("segment table must cover [0, period)")
    for a, b in zip(segments[:-1], segments[1:]):
        if abs(a[1] - b[0]) > 1e-12 * max(1.0, period):
            raise ValueError("segments must be contiguous")
    if any(s[1] <= s[0] for s in segments) or x != sorted(x):
        raise ValueError("segments must be increasing")


def model_case(m: float, r: float, lambda0: float = 1.0, alpha0: float = 0.0,
               t0: float = 1.0, **kw) -> DampingSpec:
    """beta(t) = m + r cos(2 lambda0 t + alpha0)."""
    return DampingSpec(kind="model", m=m, r=r, lambda0=lambda0, alpha0=alpha0, t0=t0, **kw)


def square_wave(mean: float, amplitude: float, lambda0: float = 1.0,
                t0: float = 1.0) -> DampingSpec:
    """beta(t) = mean + amplitude * sgn(cos(2 lambda0 t)), period pi/lambda0."""
    p = math.pi / lambda0
    q = p / 4
    segs = (
        (0.0, q, amplitude, amplitude),
        (q, 3 * q, -amplitude, -amplitude),
        (3 * q, p, amplitude, amplitude),
    )
    return DampingSpec(kind="periodic", m=mean, lambda0=lambda0, period=p,
                       segments=segs, t0=t0)


def _eta(spec: DampingSpec, t):
    a = spec.eta_param
    if spec.eta == "tlogt":
        return t * np.log(t)
    if spec.eta == "t_over_logt":
        return t / np.log(t)
    if spec.eta == "power":
        return t ** a
    return a * t


def _table(spec: DampingSpec, t):
    p = spec.period
    x = np.mod(t, p)
    out = np.zeros_like(x)
    for x0, x1, v0, v1 in spec.segments:
        sel = (x >= x0) & (x < x1)
        out[sel] = v0 + (v1 - v0) * (x[sel] - x0) / (x1 - x0)
    return out


def eval_beta(spec: DampingSpec, t):
    """beta(t) for scalar or array t (no domain check)."""
    t = np.asarray(t, dtype=float)
    out = np.full_like(t, spec.m)
    if spec.kind == "model" and spec.r != 0:
        out = out + spec.r * np.cos(2 * spec.lambda0 * t + spec.alpha0)
    elif spec.kind == "custom" and spec.r != 0:
        out = out + spec.r * np.cos(_eta(spec, t) + spec.alpha0)
    for amp, omega, phase in spec.harmonics:
        out = out + amp * np.cos(omega * t + phase)
    if spec.segments:
        out = out + _table(spec, t)
    return out if out.ndim else float(out)


def eval_damping(spec: DampingSpec, t):
    """b(t) = beta(t)/t for t >= t0.

    Raises
    ------
    DampingDomainError
        If any requested time precedes ``spec.t0``.
    """
    ta = np.asarray(t, dtype=float)
    if np.any(ta < spec.t0):
        raise DampingDomainError(f"damping requested at t < t0 = {spec.t0}")
    return eval_beta(spec, ta) / ta if ta.ndim else eval_beta(spec, float(ta)) / float(ta)


# ---------------------------------------------------------------- quadrature


def _panels(a: float, b: float, breaks: Sequence[float], max_len: float) -> np.ndarray:
    """Panel edges on [a, b] that respect breakpoints and a maximal length."""
    pts = [a] + [x for x in breaks if a < x < b] + [b]
    edges = [a]
    for lo, hi in zip(pts[:-1], pts[1:]):
        n = max(1, int(math.ceil((hi - lo) / max_len)))
        edges.extend(np.linspace(lo, hi, n + 1)[1:])
    return np.asarray(edges)


def _gauss(f: Callable, edges: np.ndarray) -> float:
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    x = 0.5 * (hi + lo) + half * _GL_NODES[None, :]
    return float(np.sum(half * _GL_WEIGHTS[None, :] * f(x)))


def _period_breaks(spec: DampingSpec, a: float, b: float) -> list[float]:
    if not spec.segments:
        return []
    p = spec.period
    offsets = spec.breakpoints()
    k0, k1 = math.floor(a / p), math.ceil(b / p)
    return sorted(k * p + o for k in range(k0, k1 + 1) for o in offsets)


def _panel_length(omega_max: float, extra: float = 0.0) -> float:
    # 16 Gauss nodes per quarter period -> 64 nodes per period of the top harmonic
    w = max(omega_max, extra, 1e-300)
    return (2 * math.pi / w) / 4


def damping_integral(spec: DampingSpec, t_start: float, t_end: float) -> float:
    """Integral of b(s) ds over [t_start, t_end].

    The log part is exact; cosine parts use the cosine/sine integrals from
    :mod:`reslab.oscint`; tables and custom phases use breakpoint-aware
    Gauss-Legendre panels.
    """
    from . import oscint

    if t_end == t_start:
        return 0.0
    total = spec.m * math.log(t_end / t_start)
    terms = list(spec.harmonics)
    if spec.kind == "model" and spec.r != 0:
        terms.append((spec.r, 2 * spec.lambda0, spec.alpha0))
    for amp, omega, phase in terms:
        if amp == 0:
            continue
        if omega == 0:
            total += amp * math.cos(phase) * math.log(t_end / t_start)
            continue
        total += amp * oscint.finite_cos_integral(omega, phase, t_start, t_end)
    rest = None
    if spec.segments:
        rest = lambda s: _table(spec, s) / s
    if spec.kind == "custom" and spec.r != 0:
        prev = rest
        rest = lambda s, prev=prev: (spec.r * np.cos(_eta(spec, s) + spec.alpha0) / s
                                     + (prev(s) if prev else 0.0))
    if rest is not None:
        # local oscillation rate of the custom phase grows slowly (log t)
        top = spec.max_frequency() * (1 + math.log(max(t_end, math.e)))
        edges = _panels(t_start, t_end, _period_breaks(spec, t_start, t_end),
                        min(_panel_length(top), max(t_start, 1.0)))
        total += _gauss(rest, edges)
    return total


# ---------------------------------------------------------------- rates


@dataclass(frozen=True)
class PredictedRates:
    m_avg: float
    r1: float
    r2: float
    r: float
    exponent_resonant: float
    exponent_fast: float
    exponent_classical: float
    regime: str
    lambda0: float = 1.0
    period: float = math.pi
    outside_proved_regime: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def _regime(m_avg: float) -> tuple[Regime, float]:
    if abs(m_avg - 2.0) <= 1e-12:
        return Regime.THRESHOLD, 2.0
    if m_avg < 2.0:
        return Regime.NON_EFFECTIVE, m_avg
    return Regime.EFFECTIVE, 2.0


def _is_pi_multiple(x: float) -> bool:
    k = x / math.pi
    return abs(k - round(k)) <= 1e-9 * max(1.0, abs(k)) and round(k) >= 1


def fourier_rates(spec: DampingSpec, lambda0: float | None = None) -> PredictedRates:
    """Mean and resonant Fourier coefficients of beta, and the exponents they imply.

    m_avg = (1/p0) int beta, r1 = (2/p0) int beta cos(2 lambda0 t),
    r2 = (2/p0) int beta sin(2 lambda0 t), r = hypot(r1, r2).

    A warning (not an error) is issued when lambda0 * p0 is not a multiple of pi;
    the result is then flagged ``outside_proved_regime``.
    """
    if spec.kind == "custom":
        raise UnsupportedSpecError("custom phase damping has no period")
    lam = spec.lambda0 if lambda0 is None else float(lambda0)
    p0 = spec.p0
    outside = not _is_pi_multiple(lam * p0)
    if outside:
        warnings.warn(
            f"lambda0*p0 = {lam * p0:.6g} is not an integer multiple of pi; "
            "rates are outside the proved regime",
            OutsideProvedRegimeWarning, stacklevel=2,
        )
    w = 2 * lam
    # the constant and the model cosine have exact coefficients; quadrature
    # handles whatever else the profile contains
    m_avg, r1, r2 = spec.m, 0.0, 0.0
    rest = spec.with_(m=0.0)
    if spec.kind == "model" and spec.r != 0 and lam == spec.lambda0 \
            and _is_pi_multiple(spec.lambda0 * p0):
        r1, r2 = spec.r * math.cos(spec.alpha0), 0.0 - spec.r * math.sin(spec.alpha0)
        rest = rest.with_(r=0.0)
    if rest.oscillates:
        edges = _panels(0.0, p0, list(rest.breakpoints()),
                        _panel_length(rest.max_frequency(), w))
        beta = lambda t: eval_beta(rest, t)
        m_avg += _gauss(beta, edges) / p0
        r1 += 2 * _gauss(lambda t: beta(t) * np.cos(w * t), edges) / p0
        r2 += 2 * _gauss(lambda t: beta(t) * np.sin(w * t), edges) / p0
    r = math.hypot(r1, r2)
    regime, classical = _regime(m_avg)
    return PredictedRates(
        m_avg=m_avg, r1=r1, r2=r2, r=r,
        exponent_resonant=m_avg - r / 2,
        exponent_fast=m_avg + r / 2,
        exponent_classical=classical,
        regime=regime.value,
        lambda0=lam, period=p0,
        outside_proved_regime=outside,
    )


def predict_classical(spec: DampingSpec) -> tuple[Regime, float]:
    """Regime and exponent min(m_avg, 2) of the unperturbed scale-invariant decay."""
    if spec.kind == "custom":
        m_avg = spec.m
        if spec.harmonics or spec.segments:
            raise UnsupportedSpecError("mean of a custom spec with additions is undefined")
    elif spec.kind == "model" and not spec.harmonics and not spec.segments:
        m_avg = spec.m
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OutsideProvedRegimeWarning)
            m_avg = fourier_rates(spec).m_avg
    return _regime(m_avg)


def check_nonresonance(delta: Callable, lambda0: float, p0: float,
                       breakpoints: Sequence[float] = (), atol: float = 1e-10,
                       n_panels: int = 256) -> bool:
    """True iff delta has zero mean and no cos/sin(2 lambda0 t) component over [0, p0].

    ``delta`` is a vectorized callable; discontinuities should be listed in
    ``breakpoints`` so the panels can split there.
    """
    edges = _panels(0.0, p0, list(breakpoints), p0 / n_panels)
    w = 2 * lambda0
    moments = (
        _gauss(delta, edges),
        _gauss(lambda t: delta(t) * np.cos(w * t), edges),
        _gauss(lambda t: delta(t) * np.sin(w * t), edges),
    )
    return all(abs(x) <= atol for x in moments)


# ---------------------------------------------------------------- kernel packing

# header layout of the packed parameter vector read by reslab._kernels
HDR = 12


def pack_damping(spec: DampingSpec, time_scale: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Flatten a spec for the compiled integrators.

    With ``time_scale = c`` the packed coefficient is beta(c s), which is how a
    mode of frequency lambda is mapped to unit frequency (c = 1/lambda).

    Returns
    -------
    params : ndarray
        [code, m, n_harm, n_seg, period, eta_code, r_custom, eta_param,
         scale, alpha_custom, 0, 0, harmonics..., segments...]
    offsets : ndarray
        Segment start offsets in scaled time within one scaled period,
        followed by the scaled period (empty when there is no table).
    """
    c = float(time_scale)
    harm = [list(h) for h in spec.harmonics]
    if spec.kind == "model" and spec.r != 0:
        harm.append([spec.r, 2 * spec.lambda0, spec.alpha0])
    harm = [[a, w * c, ph] for a, w, ph in harm]
    segs = []
    period = 0.0
    if spec.segments:
        period = spec.period / c
        segs = [[x0 / c, x1 / c, v0, v1] for x0, x1, v0, v1 in spec.segments]
    custom = spec.kind == "custom" and spec.r != 0
    hdr = [
        0.0, spec.m, len(harm), len(segs), period,
        ETA_CODES[spec.eta] if custom else 0, spec.r if custom else 0.0,
        spec.eta_param, c, spec.alpha0 if custom else 0.0, 0.0, 0.0,
    ]
    params = np.asarray(hdr + [x for h in harm for x in h] + [x for s in segs for x in s],
                        dtype=np.float64)
    offsets = np.asarray([s[0] for s in segs] + ([period] if segs else []), dtype=np.float64)
    return params, offsets

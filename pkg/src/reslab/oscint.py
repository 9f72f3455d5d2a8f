"""Conditionally convergent integrals int_{t0}^inf cos(n t + h(t)) / t^alpha dt.

The range is cut at half periods t0 + k pi/n. The chunk integrals then alternate
in sign with a slowly varying envelope, so their partial sums are accelerated
by repeated averaging (the Euler transform). For alpha > 1 the chunks are summed
plainly up to a truncation time whose tail is bounded by one integration by
parts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

__all__ = [
    "OscIntegrand",
    "OscResult",
    "OscAccuracyError",
    "oscillatory_integral",
    "tail_start",
    "tail_bound",
    "finite_cos_integral",
]

EULER_LEVELS = 8
START_CHUNKS = 64
MAX_CHUNKS = 1 << 22

_NODES = {q: np.polynomial.legendre.leggauss(q) for q in (12, 24, 48)}


class OscAccuracyError(RuntimeError):
    def __init__(self, message, achieved):
        super().__init__(f"{message}; achieved error bound {achieved:.3e}")
        self.achieved = achieved


@dataclass(frozen=True)
class OscIntegrand:
    """cos or sin of (n t + h(t)), divided by t^alpha, on [t0, inf).

    ``h`` and ``dh`` are vectorized callables (None means h = 0); ``K0`` bounds
    |h'(t)| t from above.
    """

    n: float
    alpha: float
    kind: str = "cos"
    t0: float = 1.0
    h: Callable | None = None
    dh: Callable | None = None
    K0: float = 0.0

    def __post_init__(self):
        if not self.n > 0:
            raise ValueError("frequency n must be positive")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.kind not in ("cos", "sin"):
            raise ValueError("kind must be 'cos' or 'sin'")
        if not self.t0 > 0:
            raise ValueError("t0 must be positive")
        if self.K0 < 0:
            raise ValueError("K0 must be nonnegative")
        if (self.h is None) != (self.dh is None):
            raise ValueError("h and dh go together")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        arg = self.n * t
        if self.h is not None:
            arg = arg + self.h(t)
        trig = np.cos(arg) if self.kind == "cos" else np.sin(arg)
        return trig / t ** self.alpha

    def verify_bound(self, t_max: float | None = None, samples: int = 1000) -> bool:
        """Spot check |h'(t)| <= K0/t on log-spaced samples."""
        if self.dh is None:
            return True
        t_max = self.t0 * 1e6 if t_max is None else t_max
        t = np.geomspace(self.t0, t_max, samples)
        return bool(np.all(np.abs(self.dh(t)) * t <= self.K0 * (1 + 1e-12) + 1e-300))


@dataclass(frozen=True)
class OscResult:
    n: float
    alpha: float
    kind: str
    value: float
    error_bound: float
    T_truncation: float
    periods_summed: int

    def to_dict(self) -> dict:
        return {"n": self.n, "alpha": self.alpha, "kind": self.kind, "value": self.value,
                "error_bound": self.error_bound, "T_truncation": self.T_truncation,
                "periods_summed": self.periods_summed}


def tail_bound(f: OscIntegrand, T: float) -> float:
    """Bound on |int_T^inf f| from one integration by parts.

    (1/n) T^-alpha + (1/n) int_T^inf (alpha + K0) t^-(alpha+1) dt
    """
    return (1.0 / f.n) * T ** -f.alpha * (1.0 + (f.alpha + f.K0) / f.alpha)


def tail_start(f: OscIntegrand, tol: float) -> float:
    """Smallest T with tail_bound(f, T) <= tol."""
    c = (1.0 / f.n) * (1.0 + (f.alpha + f.K0) / f.alpha)
    return (c / tol) ** (1.0 / f.alpha)


def _chunks(f: OscIntegrand, k0: int, k1: int, q: int) -> np.ndarray:
    """Integrals over half periods [t0 + k pi/n, t0 + (k+1) pi/n], k0 <= k < k1."""
    x, w = _NODES[q]
    half = math.pi / f.n
    lo = f.t0 + half * np.arange(k0, k1)[:, None]
    pts = lo + 0.5 * half * (x[None, :] + 1.0)
    return 0.5 * half * (f(pts) @ w)


def _chunk_sums(f, k0, k1):
    """Chunk integrals with an error estimate from two Gauss orders.

    Chunks where the two orders disagree (steep 1/t^alpha close to a small
    t0) are redone by adaptive quadrature.
    """
    fine = _chunks(f, k0, k1, 48)
    diff = np.abs(fine - _chunks(f, k0, k1, 24))
    half = math.pi / f.n
    for i in np.flatnonzero(diff > 1e-14):
        lo = f.t0 + half * (k0 + i)
        fine[i], diff[i] = integrate.quad(f, lo, lo + half, epsabs=1e-14, epsrel=1e-13,
                                          limit=200)
    return fine, float(np.sum(diff))


def _euler(partial: np.ndarray, levels: int) -> tuple[float, float]:
    """Repeated averaging of the last partial sums; returns (value, change of last level)."""
    s = partial[-(levels + 2):].copy()
    for _ in range(levels):
        s = 0.5 * (s[1:] + s[:-1])
    # s now has two entries: consecutive accelerated estimates
    return float(s[-1]), float(abs(s[-1] - s[-2]))


def oscillatory_integral(f: OscIntegrand, tol: float = 1e-10,
                         max_chunks: int = MAX_CHUNKS) -> OscResult:
    """Value of int_{t0}^inf f(t) dt with absolute error about ``tol``.

    Raises
    ------
    OscAccuracyError
        When the requested accuracy is not reached within ``max_chunks``
        half periods.
    """
    half = math.pi / f.n
    if f.alpha > 1:
        T = tail_start(f, 0.5 * tol)
        nchunks = int(math.ceil((T - f.t0) / half))
        if nchunks > max_chunks:
            raise OscAccuracyError("truncation time too large for plain summation",
                                   tail_bound(f, f.t0 + half * max_chunks))
        total, qerr = 0.0, 0.0
        for k0 in range(0, nchunks, 1 << 16):
            c, e = _chunk_sums(f, k0, min(nchunks, k0 + (1 << 16)))
            total += float(np.sum(c))
            qerr += e
        T_end = f.t0 + half * nchunks
        err = tail_bound(f, T_end) + qerr
        return OscResult(f.n, f.alpha, f.kind, total, err, T_end, nchunks)

    chunks, qerr = _chunk_sums(f, 0, START_CHUNKS)
    previous = None
    while True:
        partial = np.cumsum(chunks)
        value, level_change = _euler(partial, EULER_LEVELS)
        err = level_change + qerr
        if previous is not None:
            err = max(err, abs(value - previous))
        # partial sums carry rounding of order eps * max|partial|
        floor = 64 * np.finfo(float).eps * float(np.max(np.abs(partial)))
        if previous is not None and err <= max(tol, floor):
            break
        if chunks.size >= max_chunks:
            raise OscAccuracyError("Euler-accelerated period sums did not settle", err)
        previous = value
        more, e = _chunk_sums(f, chunks.size, 2 * chunks.size)
        chunks = np.concatenate([chunks, more])
        qerr += e
    T_end = f.t0 + half * chunks.size
    return OscResult(f.n, f.alpha, f.kind, value, err, T_end, int(chunks.size))


def finite_cos_integral(omega: float, phase: float, a: float, b: float,
                        tol: float = 1e-13) -> float:
    """int_a^b cos(omega s + phase)/s ds for omega > 0 and 0 < a <= b.

    Substituting u = omega s turns each end into a unit-frequency tail integral
    with constant phase; the result is the difference of the two tails.
    """
    if b < a:
        return -finite_cos_integral(omega, phase, b, a, tol)
    if a == b:
        return 0.0
    h = lambda t: np.full_like(t, phase)
    dh = lambda t: np.zeros_like(t)
    tails = []
    for end in (a, b):
        g = OscIntegrand(n=1.0, alpha=1.0, kind="cos", t0=omega * end, h=h, dh=dh)
        tails.append(oscillatory_integral(g, tol).value)
    return tails[0] - tails[1]

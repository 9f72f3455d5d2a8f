"""Long-time integration of the mode equation u'' + b(t) u' + lambda^2 u = 0.

Provides trajectories at log-spaced checkpoints, 2x2 fundamental matrices
(propagators) and the per-frequency worst-case amplification D*_lambda(t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .damping import DampingSpec, damping_integral, pack_damping

__all__ = [
    "ModeState",
    "Trajectory",
    "Propagator",
    "IntegrationError",
    "log_checkpoints",
    "mode_energy",
    "integrate_mode",
    "propagator",
    "propagator_series",
    "dstar",
    "dstar_from_matrices",
    "abel_determinant",
]

DEFAULT_TOL = 1e-10
PER_DECADE = 64
STEP_FRACTION = 1 / 20
MAX_STEPS = 2_000_000_000


class IntegrationError(RuntimeError):
    """Integration failed; ``last_good_time`` is the last accepted time."""

    def __init__(self, message, last_good_time):
        super().__init__(f"{message} (last good time {last_good_time:.17g})")
        self.last_good_time = last_good_time


@dataclass(frozen=True)
class ModeState:
    t: float
    u: float
    u_prime: float
    lam: float = 1.0

    def __post_init__(self):
        if not all(math.isfinite(x) for x in (self.t, self.u, self.u_prime, self.lam)):
            raise ValueError("mode state must be finite")
        if self.lam < 0:
            raise ValueError("frequency must be nonnegative")


def mode_energy(state: ModeState) -> float:
    """u'^2 + lambda^2 u^2."""
    return state.u_prime ** 2 + state.lam ** 2 * state.u ** 2


@dataclass
class Trajectory:
    """Samples of one mode solution.

    ``log_energy`` is filled when the run went through the polar form; it keeps
    full relative accuracy even when the energy itself would underflow.
    """

    t: np.ndarray
    u: np.ndarray
    u_prime: np.ndarray
    lam: float
    sampling: str = "log"
    log_energy: np.ndarray | None = None
    steps: int = 0
    est_error: float = 0.0

    def __post_init__(self):
        if self.t.size and np.any(np.diff(self.t) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self):
        return self.t.size

    @property
    def energy(self) -> np.ndarray:
        if self.log_energy is not None:
            return np.exp(self.log_energy)
        return self.u_prime ** 2 + self.lam ** 2 * self.u ** 2

    def energy_log(self) -> np.ndarray:
        if self.log_energy is not None:
            return self.log_energy
        with np.errstate(divide="ignore"):
            return np.log(self.energy)

    def state(self, i: int) -> ModeState:
        return ModeState(float(self.t[i]), float(self.u[i]), float(self.u_prime[i]), self.lam)

    def columns(self) -> dict:
        return {"t": self.t, "u": self.u, "u_prime": self.u_prime, "energy": self.energy}


@dataclass(frozen=True)
class Propagator:
    """Fundamental matrix mapping (u, u') at t_start to (u, u') at t_end."""

    t_start: float
    t_end: float
    a11: float
    a12: float
    a21: float
    a22: float
    lam: float = 1.0
    est_error: float = 0.0

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a21, self.a22]])

    @property
    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a21

    def apply(self, u: float, u_prime: float) -> tuple[float, float]:
        return (self.a11 * u + self.a12 * u_prime, self.a21 * u + self.a22 * u_prime)

    def to_record(self) -> dict:
        return {
            "lambda": self.lam, "t": self.t_end, "t_start": self.t_start,
            "a11": self.a11, "a12": self.a12, "a21": self.a21, "a22": self.a22,
            "det": self.det, "est_error": self.est_error,
        }


def log_checkpoints(t0: float, t_end: float, per_decade: int = PER_DECADE) -> np.ndarray:
    """t0 * 10**(k/per_decade) up to t_end, with t_end appended."""
    n = int(math.floor(per_decade * math.log10(t_end / t0) + 1e-9))
    ts = t0 * 10.0 ** (np.arange(n + 1) / per_decade)
    ts = ts[ts < t_end * (1 - 1e-14)]
    return np.append(ts, t_end)


def step_cap(params: np.ndarray, mode_freq: float) -> float:
    """Largest step allowed: STEP_FRACTION of the shortest oscillation period.

    The mode contributes a period of pi/mode_freq and each cosine term of beta
    a period of 2 pi/omega; custom phases are capped inside the kernel.
    """
    periods = []
    if mode_freq > 0:
        periods.append(math.pi / mode_freq)
    nh = int(params[2])
    for j in range(nh):
        amp, omega = params[_kernels.HDR + 3 * j], params[_kernels.HDR + 3 * j + 1]
        if amp != 0 and omega != 0:
            periods.append(2 * math.pi / abs(omega))
    if int(params[3]) > 0:
        periods.append(params[4])
    return STEP_FRACTION * min(periods) if periods else np.inf


def _check_tol(tol):
    if not 1e-13 <= tol <= 1e-4:
        raise ValueError(f"tolerance {tol} outside [1e-13, 1e-4]")


def run_kernel(system, y0, t0, times, tol, params, offsets, mode_freq, lam, aux=None):
    """Integrate one of the compiled systems and return the states at ``times``."""
    times = np.ascontiguousarray(times, dtype=np.float64)
    if times.size == 0 or np.any(np.diff(times) <= 0) or times[0] < t0:
        raise ValueError("sample times must be increasing and not precede t0")
    out = np.empty((times.size, len(y0)))
    aux = np.zeros(1) if aux is None else np.asarray(aux, dtype=np.float64)
    hmax = step_cap(params, mode_freq)
    status, steps, _, t_last, acc = _kernels.integrate(
        system, np.asarray(y0, dtype=np.float64), float(t0), times, float(tol),
        float(hmax), params, offsets, float(lam), aux, out, MAX_STEPS,
    )
    if status != _kernels.OK:
        reason = {
            _kernels.NONFINITE: "non-finite state",
            _kernels.TOO_MANY_STEPS: "step budget exhausted",
            _kernels.STEP_UNDERFLOW: "step size underflow",
        }[status]
        raise IntegrationError(reason, t_last)
    return out, steps, acc


def _default_times(spec, t_end, per_decade, times):
    if times is not None:
        times = np.asarray(times, dtype=float)
        if times[0] != spec.t0:
            times = np.concatenate([[spec.t0], times])
        return times
    if not t_end > spec.t0:
        raise ValueError("t_end must exceed t0")
    return log_checkpoints(spec.t0, t_end, per_decade)


def integrate_mode(spec: DampingSpec, lam: float, init: ModeState, t_end: float | None = None,
                   tol: float = DEFAULT_TOL, *, times=None, per_decade: int = PER_DECADE,
                   form: str = "cartesian") -> Trajectory:
    """Integrate one mode from ``init`` (which must sit at spec.t0).

    Parameters
    ----------
    form : {'cartesian', 'polar'}
        'polar' rescales time to unit frequency (s = lam t) and integrates the
        phase/log-amplitude system, reconstructing (u, u') afterwards. It keeps
        relative accuracy for energies far below double precision range and
        needs lam > 0.
    """
    _check_tol(tol)
    if abs(init.t - spec.t0) > 1e-14 * spec.t0:
        raise ValueError("initial state must be given at t0")
    if lam < 0:
        raise ValueError("frequency must be nonnegative")
    ts = _default_times(spec, t_end, per_decade, times)
    sampling = "log" if times is None else "custom"
    if form == "polar":
        from .polar import integrate_polar, to_polar

        if lam <= 0:
            raise ValueError("polar form needs lam > 0")
        # unit-frequency variable: v(s) = u(s/lam), dv/ds = u'/lam
        scaled = ModeState(init.t * lam, init.u, init.u_prime / lam, 1.0)
        ptraj = integrate_polar(spec, to_polar(scaled), tol=tol, times=ts * lam,
                                time_scale=1.0 / lam)
        rho = np.exp(ptraj.log_rho)
        return Trajectory(
            t=ts, u=rho * np.cos(ptraj.theta), u_prime=-lam * rho * np.sin(ptraj.theta),
            lam=lam, sampling=sampling,
            log_energy=2 * ptraj.log_rho + 2 * math.log(lam),
            steps=ptraj.steps, est_error=ptraj.est_error,
        )
    if form != "cartesian":
        raise ValueError(f"unknown form {form!r}")
    params, offsets = pack_damping(spec)
    out, steps, acc = run_kernel(_kernels.CARTESIAN, [init.u, init.u_prime], spec.t0, ts, tol,
                                 params, offsets, lam, lam)
    return Trajectory(t=ts, u=out[:, 0], u_prime=out[:, 1], lam=lam, sampling=sampling,
                      steps=steps, est_error=acc)


def propagator_series(spec: DampingSpec, lam: float, times, tol: float = DEFAULT_TOL):
    """Fundamental matrices at each time; returns (array (n, 2, 2), est_error)."""
    _check_tol(tol)
    times = np.asarray(times, dtype=float)
    if np.any(times < spec.t0):
        raise ValueError("times must not precede t0")
    params, offsets = pack_damping(spec)
    grid = np.unique(np.concatenate([[spec.t0], times]))
    out, _, acc = run_kernel(_kernels.CARTESIAN, [1.0, 0.0, 0.0, 1.0], spec.t0, grid, tol,
                             params, offsets, lam, lam)
    mats = np.empty((grid.size, 2, 2))
    mats[:, 0, 0], mats[:, 1, 0] = out[:, 0], out[:, 1]
    mats[:, 0, 1], mats[:, 1, 1] = out[:, 2], out[:, 3]
    idx = np.searchsorted(grid, times)
    return mats[idx], acc


def propagator(spec: DampingSpec, lam: float, t_end: float, tol: float = DEFAULT_TOL) -> Propagator:
    """Columns are the solutions started from (1, 0) and (0, 1) at t0."""
    if t_end < spec.t0:
        raise ValueError("t_end precedes t0")
    if t_end == spec.t0:
        return Propagator(spec.t0, t_end, 1.0, 0.0, 0.0, 1.0, lam=lam)
    mats, acc = propagator_series(spec, lam, [t_end], tol)
    (a11, a12), (a21, a22) = mats[0]
    return Propagator(spec.t0, t_end, a11, a12, a21, a22, lam=lam, est_error=acc)


def abel_determinant(spec: DampingSpec, t_end: float, t_start: float | None = None) -> float:
    """exp(-int b) over [t_start, t_end], the determinant every propagator must have."""
    t_start = spec.t0 if t_start is None else t_start
    return math.exp(-damping_integral(spec, t_start, t_end))


def dstar_from_matrices(mats, lam: float, include_displacement: bool = True):
    """Largest eigenvalue of W^-1/2 P^T Q P W^-1/2 for each propagator P.

    Q = diag(lam^2, 1) is the energy form at time t and W = Q + diag(1, 0) the
    constraint form at t0 (W = Q when ``include_displacement`` is False, which
    requires lam > 0).
    """
    mats = np.asarray(mats, dtype=float)
    a11, a12 = mats[..., 0, 0], mats[..., 0, 1]
    a21, a22 = mats[..., 1, 0], mats[..., 1, 1]
    l2 = lam * lam
    m11 = l2 * a11 * a11 + a21 * a21
    m22 = l2 * a12 * a12 + a22 * a22
    m12 = l2 * a11 * a12 + a21 * a22
    w1 = l2 + 1.0 if include_displacement else l2
    if w1 <= 0:
        raise ValueError("pure-energy constraint is degenerate at lam = 0")
    s11, s22, s12 = m11 / w1, m22, m12 / math.sqrt(w1)
    half_tr = 0.5 * (s11 + s22)
    disc = np.hypot(0.5 * (s11 - s22), s12)
    # diagonal case exactly (dstar(t0) = 1 without rounding)
    return np.where(s12 == 0, np.maximum(s11, s22), half_tr + disc)


def dstar(spec: DampingSpec, lam: float, t, tol: float = DEFAULT_TOL,
          include_displacement: bool = True):
    """Worst-case mode energy at time(s) t over data with E*(t0) + u(t0)^2 <= 1."""
    ta = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ta < spec.t0):
        raise ValueError("t precedes t0")
    if np.all(ta == spec.t0):
        mats = np.broadcast_to(np.eye(2), ta.shape + (2, 2))
    else:
        mats, _ = propagator_series(spec, lam, ta, tol)
    vals = dstar_from_matrices(mats, lam, include_displacement)
    return vals if np.ndim(t) else float(vals[0])

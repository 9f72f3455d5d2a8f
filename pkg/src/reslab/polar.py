"""Polar (Pruefer) form of the unit-frequency mode equation.

With v = rho cos(theta) and v' = -rho sin(theta), the equation
v'' + b(t) v' + v = 0 becomes

    theta'      = 1 - b(t) sin(2 theta) / 2
    (log rho)'  = -b(t) sin(theta)^2

theta is kept unwrapped and log(rho) is integrated instead of rho.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson

from . import _kernels
from .damping import DampingSpec, eval_beta, pack_damping

__all__ = [
    "PolarState",
    "PolarTrajectory",
    "DegenerateStateError",
    "to_polar",
    "from_polar",
    "integrate_polar",
    "dense_times",
    "log_energy_via_theta",
]


class DegenerateStateError(ValueError):
    """The zero state has no polar angle."""


@dataclass(frozen=True)
class PolarState:
    t: float
    rho: float
    theta: float
    log_rho: float

    @classmethod
    def from_log(cls, t: float, log_rho: float, theta: float) -> "PolarState":
        return cls(t, math.exp(log_rho), theta, log_rho)


def to_polar(state, theta_ref: float | None = None) -> PolarState:
    """(u, u') -> (rho, theta) with theta = atan2(-u', u).

    ``theta_ref`` selects the branch: the returned angle is the representative
    closest to it (continuous lifting along a trajectory).
    """
    u, up = state.u, state.u_prime
    if u == 0 and up == 0:
        raise DegenerateStateError("zero state has no polar representation")
    rho = math.hypot(u, up)
    theta = math.atan2(-up, u)
    if theta_ref is not None:
        theta += 2 * math.pi * round((theta_ref - theta) / (2 * math.pi))
    return PolarState(state.t, rho, theta, math.log(rho))


def from_polar(p: PolarState, lam: float = 1.0):
    """Inverse of :func:`to_polar` (unit frequency)."""
    from .ode_engine import ModeState

    rho = math.exp(p.log_rho)
    return ModeState(p.t, rho * math.cos(p.theta), -rho * math.sin(p.theta), lam)


@dataclass
class PolarTrajectory:
    t: np.ndarray
    theta: np.ndarray
    log_rho: np.ndarray
    steps: int = 0
    est_error: float = 0.0

    @property
    def rho(self) -> np.ndarray:
        return np.exp(self.log_rho)

    def columns(self) -> dict:
        return {"t": self.t, "log_rho": self.log_rho, "theta": self.theta,
                "theta_minus_t": self.theta - self.t}


def dense_times(t0: float, t_end: float, spacing: float = math.pi / 512) -> np.ndarray:
    """Uniform sample grid, fine enough for quadrature on theta."""
    n = int(math.ceil((t_end - t0) / spacing))
    return np.linspace(t0, t_end, n + 1)


def integrate_polar(spec: DampingSpec, init: PolarState, t_end: float | None = None,
                    tol: float = 1e-10, *, times=None, per_decade: int = 64,
                    time_scale: float = 1.0) -> PolarTrajectory:
    """Integrate (theta, log rho) from ``init``.

    Local errors are controlled in absolute terms on both theta and log rho.
    With ``time_scale = c`` the damping is beta(c t)/t, which is the unit
    frequency form of a mode with frequency 1/c.
    """
    from .ode_engine import _check_tol, log_checkpoints, run_kernel

    _check_tol(tol)
    t0 = init.t
    if times is None:
        if t_end is None or not t_end > t0:
            raise ValueError("t_end must exceed the initial time")
        times = log_checkpoints(t0, t_end, per_decade)
    times = np.asarray(times, dtype=float)
    params, offsets = pack_damping(spec, time_scale)
    out, steps, acc = run_kernel(_kernels.POLAR, [init.theta, init.log_rho], t0, times, tol,
                                 params, offsets, 1.0, 1.0)
    return PolarTrajectory(t=times, theta=out[:, 0], log_rho=out[:, 1], steps=steps,
                           est_error=acc)


def log_energy_via_theta(spec: DampingSpec, traj: PolarTrajectory,
                         time_scale: float = 1.0) -> np.ndarray:
    """2 log rho(t) - 2 log rho(t0) recomputed from theta alone.

    Evaluates -2 * int_{t0}^{t} b(s) sin(theta(s))^2 ds by cumulative Simpson
    on the trajectory's own samples, which should come from :func:`dense_times`.
    """
    t = traj.t
    b = eval_beta(spec, time_scale * t) / t
    integrand = -2.0 * b * np.sin(traj.theta) ** 2
    return cumulative_simpson(integrand, x=t, initial=0.0)

"""Compiled Dormand-Prince 5(4) integrator for the mode, polar and phase systems.

Everything here works on the flat parameter vector produced by
:func:`reslab.damping.pack_damping`. Steps never straddle a breakpoint of a
tabulated profile, and every stage of a step evaluates the table on the
segment that contains the step midpoint, so jumps in beta cost no accuracy.
"""

import math

import numpy as np
from numba import njit

CARTESIAN = 0
POLAR = 1
PHASE = 2
PHASE_AVERAGED = 3

OK = 0
NONFINITE = 1
TOO_MANY_STEPS = 2
STEP_UNDERFLOW = 3

HDR = 12

# Dormand-Prince tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200,
                          22 / 525, -1 / 40)


@njit(cache=True)
def eta_value(code, s, a):
    if code == 1:
        return s * math.log(s)
    if code == 2:
        return s / math.log(s)
    if code == 3:
        return s ** a
    return a * s


@njit(cache=True)
def eta_rate(code, s, a):
    if code == 1:
        return math.log(s) + 1.0
    if code == 2:
        lg = math.log(s)
        return (lg - 1.0) / (lg * lg)
    if code == 3:
        return a * s ** (a - 1.0)
    return a


@njit(cache=True)
def beta(t, p, kper, iseg):
    """beta at scaled time t; the table part uses period index kper, segment iseg."""
    val = p[1]
    nh = int(p[2])
    ns = int(p[3])
    for j in range(nh):
        q = HDR + 3 * j
        val += p[q] * math.cos(p[q + 1] * t + p[q + 2])
    if ns > 0 and iseg >= 0:
        q = HDR + 3 * nh + 4 * iseg
        x = t - kper * p[4]
        val += p[q + 2] + (p[q + 3] - p[q + 2]) * (x - p[q]) / (p[q + 1] - p[q])
    code = int(p[5])
    if code > 0:
        c = p[8]
        val += p[6] * math.cos(eta_value(code, c * t, p[7]) + p[9])
    return val


@njit(cache=True)
def locate(t, p):
    """(period index, segment index) of the table segment containing t."""
    ns = int(p[3])
    if ns == 0:
        return 0, -1
    per = p[4]
    k = math.floor(t / per)
    x = t - k * per
    q0 = HDR + 3 * int(p[2])
    for i in range(ns):
        if x < p[q0 + 4 * i + 1]:
            return k, i
    return k, ns - 1


@njit(cache=True)
def next_break(t, p, offsets):
    """First table breakpoint strictly after t (inf when there is no table)."""
    if offsets.shape[0] == 0:
        return np.inf
    per = offsets[-1]
    k = math.floor(t / per)
    eps = 1e-13 * max(1.0, abs(t))
    for kk in range(k, k + 2):
        for o in offsets:
            tb = kk * per + o
            if tb > t + eps:
                return tb
    return (k + 2) * per


@njit(cache=True)
def rhs(system, t, y, dy, p, kper, iseg, lam, aux):
    b = beta(t, p, kper, iseg) / t
    n = y.shape[0]
    if system == CARTESIAN:
        l2 = lam * lam
        for j in range(0, n, 2):
            dy[j] = y[j + 1]
            dy[j + 1] = -b * y[j + 1] - l2 * y[j]
    elif system == POLAR:
        s = math.sin(y[0])
        dy[0] = 1.0 - b * s * math.cos(y[0])
        dy[1] = -b * s * s
    elif system == PHASE:
        for j in range(n):
            dy[j] = b * math.sin(2.0 * t - y[j])
    else:
        # phi' = a(t) - (r/2) sin(phi - offset)/t with a = 0; aux = (r, offset)
        for j in range(n):
            dy[j] = -0.5 * aux[0] * math.sin(y[j] - aux[1]) / t


@njit(cache=True)
def error_norm(system, y, ynew, err, tol):
    n = y.shape[0]
    worst = 0.0
    if system == CARTESIAN:
        for j in range(0, n, 2):
            sc = max(abs(y[j]), abs(y[j + 1]), abs(ynew[j]), abs(ynew[j + 1]))
            sc = tol * sc + 1e-300
            e = max(abs(err[j]), abs(err[j + 1])) / sc
            if e > worst:
                worst = e
    else:
        for j in range(n):
            e = abs(err[j]) / tol
            if e > worst:
                worst = e
    return worst


@njit(cache=True, nogil=True)
def integrate(system, y0, t0, checkpoints, tol, hmax, p, offsets, lam, aux,
              out, max_steps):
    """Integrate from t0 through the sorted checkpoints, storing the state at each.

    Returns (status, steps, rejected, t_last, accumulated local error estimate).
    """
    n = y0.shape[0]
    y = y0.copy()
    ynew = np.empty(n)
    tmp = np.empty(n)
    err = np.empty(n)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    k7 = np.empty(n)
    t = t0
    code = int(p[5])
    h = min(hmax, 1e-2 * max(t0, 1.0))
    steps = 0
    rejected = 0
    acc = 0.0
    ncp = checkpoints.shape[0]
    ic = 0
    while ic < ncp and checkpoints[ic] <= t0:
        out[ic, :] = y
        ic += 1
    tb = next_break(t, p, offsets)
    while ic < ncp:
        target = checkpoints[ic]
        hcap = hmax
        if code > 0:
            c = p[8]
            w = abs(eta_rate(code, c * t, p[7])) * c
            if w > 0:
                hcap = min(hcap, (2 * math.pi / w) / 20.0)
        hh = min(h, hcap)
        stop = min(target, tb)
        hit = False
        if t + hh >= stop - 1e-14 * max(1.0, abs(stop)):
            hh = stop - t
            hit = True
        if hh <= 1e-14 * max(1.0, abs(t)):
            return STEP_UNDERFLOW, steps, rejected, t, acc
        kper, iseg = locate(t + 0.5 * hh, p)
        rhs(system, t, y, k1, p, kper, iseg, lam, aux)
        for j in range(n):
            tmp[j] = y[j] + hh * A21 * k1[j]
        rhs(system, t + C2 * hh, tmp, k2, p, kper, iseg, lam, aux)
        for j in range(n):
            tmp[j] = y[j] + hh * (A31 * k1[j] + A32 * k2[j])
        rhs(system, t + C3 * hh, tmp, k3, p, kper, iseg, lam, aux)
        for j in range(n):
            tmp[j] = y[j] + hh * (A41 * k1[j] + A42 * k2[j] + A43 * k3[j])
        rhs(system, t + C4 * hh, tmp, k4, p, kper, iseg, lam, aux)
        for j in range(n):
            tmp[j] = y[j] + hh * (A51 * k1[j] + A52 * k2[j] + A53 * k3[j] + A54 * k4[j])
        rhs(system, t + C5 * hh, tmp, k5, p, kper, iseg, lam, aux)
        for j in range(n):
            tmp[j] = y[j] + hh * (A61 * k1[j] + A62 * k2[j] + A63 * k3[j]
                                  + A64 * k4[j] + A65 * k5[j])
        rhs(system, t + hh, tmp, k6, p, kper, iseg, lam, aux)
        for j in range(n):
            ynew[j] = y[j] + hh * (B1 * k1[j] + B3 * k3[j] + B4 * k4[j]
                                   + B5 * k5[j] + B6 * k6[j])
        rhs(system, t + hh, ynew, k7, p, kper, iseg, lam, aux)
        for j in range(n):
            err[j] = hh * (E1 * k1[j] + E3 * k3[j] + E4 * k4[j] + E5 * k5[j]
                           + E6 * k6[j] + E7 * k7[j])
        en = error_norm(system, y, ynew, err, tol)
        steps += 1
        if steps > max_steps:
            return TOO_MANY_STEPS, steps, rejected, t, acc
        if not (en == en):
            return NONFINITE, steps, rejected, t, acc
        if en <= 1.0:
            for j in range(n):
                if not math.isfinite(ynew[j]):
                    return NONFINITE, steps, rejected, t, acc
            acc += en * tol
            t = stop if hit else t + hh
            for j in range(n):
                y[j] = ynew[j]
            if hit and t >= tb:
                tb = next_break(t, p, offsets)
            while ic < ncp and checkpoints[ic] <= t + 1e-14 * max(1.0, abs(t)):
                out[ic, :] = y
                ic += 1
            fac = 5.0 if en == 0.0 else min(5.0, 0.9 * en ** -0.2)
            if not hit or fac < 1.0:
                h = hh * fac
            else:
                h = max(h, hh * fac)
        else:
            rejected += 1
            h = hh * max(0.2, 0.9 * en ** -0.2)
    return OK, steps, rejected, t, acc

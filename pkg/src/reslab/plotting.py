"""Figures for trajectories, fits, sweeps and phase paths (written to files only)."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# no creation date or library version in the files
_META = {"Software": None}


def _save(fig, path: Path) -> str:
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)
    return path.name


def plot_energy_fits(curves, path, title: str = "mode energy") -> str:
    """Log-log energies with their fitted power laws.

    ``curves`` is a list of (label, t, log_energy, DecayFit or None).
    """
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for label, t, log_e, fit in curves:
        line, = ax.plot(np.log10(t), log_e / math.log(10), lw=0.8, label=label)
        if fit is not None:
            lo, hi = fit.window
            tt = np.geomspace(lo, hi, 50)
            ax.plot(np.log10(tt), fit.log_model(tt) / math.log(10), "--", color=line.get_color(),
                    lw=1.2, label=f"fit p = {fit.exponent:.3f}")
    ax.set_xlabel("log10 t")
    ax.set_ylabel("log10 E")
    ax.set_title(title)
    ax.legend(fontsize=8)
    return _save(fig, Path(path))


def plot_sweep(sweep, path, fit=None) -> str:
    """D(t) lower bound and the maximizing frequency."""
    fig, (a1, a2) = plt.subplots(2, 1, figsize=(6.4, 6), sharex=True)
    a1.plot(np.log10(sweep.times), np.log10(sweep.d_estimate), "o-", ms=3, label="max over grid")
    if fit is not None:
        a1.plot(np.log10(sweep.times), fit.log_model(sweep.times) / math.log(10), "--",
                label=f"fit p = {fit.exponent:.3f}")
    a1.set_ylabel("log10 D(t)")
    a1.legend(fontsize=8)
    a2.plot(np.log10(sweep.times), np.log10(sweep.argmax_lambda), "s-", ms=3)
    a2.set_xlabel("log10 t")
    a2.set_ylabel("log10 argmax lambda")
    return _save(fig, Path(path))


def plot_phase_paths(paths, path, title: str = "phase defect") -> str:
    """phi(t) on a log time axis with the multiples of pi marked."""
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    lo = hi = 0.0
    for p in paths:
        ax.semilogx(p.t, (p.phi - p.offset) / math.pi, lw=0.7)
        lo, hi = min(lo, np.min(p.phi - p.offset)), max(hi, np.max(p.phi - p.offset))
    for k in range(math.floor(lo / math.pi) - 1, math.ceil(hi / math.pi) + 2):
        ax.axhline(k, color="0.7" if k % 2 else "0.3", lw=0.5, ls=":" if k % 2 else "-")
    ax.set_xlabel("t")
    ax.set_ylabel("(phi - offset) / pi")
    ax.set_title(title)
    return _save(fig, Path(path))


def report_figures(report, out_dir) -> dict:
    """Figures for an experiment report; returns artifact name -> file name."""
    out = Path(out_dir)
    names = {}
    curves = []
    for key, fit in (("slow", report.slow), ("fast", report.fast),
                     ("perturbed", report.perturbed)):
        tr = report.data.get(key)
        if tr is not None:
            curves.append((key, tr.t, tr.energy_log(), fit))
    if curves:
        names["energy_figure"] = plot_energy_fits(curves, out / "energy.png")
    sw = report.data.get("control")
    if sw is not None:
        names["control_figure"] = plot_sweep(sw, out / "control.png", report.control)
    return names

"""Decay-exponent fits, spectrum sweeps and end-to-end experiment reports."""

from __future__ import annotations

import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .damping import (DampingSpec, OutsideProvedRegimeWarning, PredictedRates, UnsupportedSpecError,
                      fourier_rates)
from .ode_engine import DEFAULT_TOL, IntegrationError, ModeState, dstar, integrate_mode, log_checkpoints

__all__ = [
    "FitError",
    "DecayFit",
    "fit_decay_exponent",
    "envelope_ratio",
    "SpectrumGrid",
    "SweepResult",
    "sweep_spectrum",
    "thread_count",
    "ExperimentConfig",
    "ExperimentReport",
    "run_experiment",
]

BINS_PER_DECADE = 16
MIN_SAMPLES = 32
MIN_DECADES = 2.0
DEFAULT_TOLERANCES = {"slow": 0.05, "fast": 0.2, "perturbed": 0.1, "control": 0.05}


class FitError(ValueError):
    """Samples or window unusable for a power-law fit."""


@dataclass(frozen=True)
class DecayFit:
    """log E(t) ~ log_constant - exponent * log t over ``window``.

    ``residual`` is the largest |log E - fit| over every sample in the window,
    ``sample_count`` the number of those samples and ``used_count`` how many
    survived the per-log-bin decimation.
    """

    exponent: float
    log_constant: float
    residual: float
    window: tuple
    sample_count: int
    used_count: int

    def log_model(self, t):
        return self.log_constant - self.exponent * np.log(t)

    def to_dict(self) -> dict:
        return {"exponent": self.exponent, "log_constant": self.log_constant,
                "residual": self.residual, "window": list(self.window),
                "sample_count": self.sample_count, "used_count": self.used_count}


def _decimate(t: np.ndarray, lo: float, hi: float, per_decade: int) -> np.ndarray:
    """Index of the sample closest (in log t) to the centre of each log bin."""
    nbins = max(1, int(round(math.log10(hi / lo) * per_decade)))
    edges = np.log(lo) + (np.log(hi) - np.log(lo)) * np.arange(nbins + 1) / nbins
    lt = np.log(t)
    bin_of = np.minimum(np.searchsorted(edges, lt, side="right") - 1, nbins - 1)
    centres = 0.5 * (edges[1:] + edges[:-1])
    dist = np.abs(lt - centres[bin_of])
    order = np.lexsort((dist, bin_of))
    first = np.ones(order.size, dtype=bool)
    first[1:] = bin_of[order][1:] != bin_of[order][:-1]
    return np.sort(order[first])


def fit_decay_exponent(t, energy=None, window=None, *, log_energy=None,
                       bins_per_decade: int = BINS_PER_DECADE) -> DecayFit:
    """Least-squares power law through (log t, log E), one sample per log bin.

    Parameters
    ----------
    t : array_like
        Sample times, increasing.
    energy : array_like, optional
        Positive energies. Give ``log_energy`` instead when energies may underflow.
    window : (t_lo, t_hi), optional
        Defaults to [1e3 t[0], 1e5 t[0]]. Must span at least two decades and
        hold at least 32 samples.
    bins_per_decade : int
        Decimation density; each bin contributes its sample nearest to the bin
        centre so every decade carries the same weight.

    Raises
    ------
    FitError
        Nonpositive energies, too few samples or too narrow a window.
    """
    t = np.asarray(t, dtype=float)
    if log_energy is None:
        if energy is None:
            raise FitError("need energy or log_energy")
        energy = np.asarray(energy, dtype=float)
        if np.any(~(energy > 0)):
            raise FitError("energies must be positive and finite for a log fit")
        y = np.log(energy)
    else:
        y = np.asarray(log_energy, dtype=float)
    if y.shape != t.shape:
        raise FitError("times and energies differ in length")
    if not np.all(np.isfinite(y)):
        raise FitError("log energies must be finite")
    lo, hi = (1e3 * t[0], 1e5 * t[0]) if window is None else (float(window[0]), float(window[1]))
    if not (lo > 0 and hi > lo) or math.log10(hi / lo) < MIN_DECADES - 1e-9:
        raise FitError(f"window [{lo:g}, {hi:g}] must span at least {MIN_DECADES:g} decades")
    sel = (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12))
    n = int(sel.sum())
    if n < MIN_SAMPLES:
        raise FitError(f"only {n} samples in window [{lo:g}, {hi:g}]; need {MIN_SAMPLES}")
    tw, yw = t[sel], y[sel]
    keep = _decimate(tw, lo, hi, bins_per_decade)
    slope, intercept = np.polyfit(np.log(tw[keep]), yw[keep], 1)
    resid = float(np.max(np.abs(yw - (intercept + slope * np.log(tw)))))
    return DecayFit(exponent=float(-slope), log_constant=float(intercept), residual=resid,
                    window=(lo, hi), sample_count=n, used_count=int(keep.size))


def envelope_ratio(t, log_energy, exponent: float, window) -> tuple[float, float]:
    """(max/min, log-log trend slope) of E(t) t^exponent over the window."""
    t = np.asarray(t, dtype=float)
    lo, hi = window
    sel = (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12))
    z = np.asarray(log_energy, dtype=float)[sel] + exponent * np.log(t[sel])
    keep = _decimate(t[sel], lo, hi, BINS_PER_DECADE)
    slope = np.polyfit(np.log(t[sel][keep]), z[keep], 1)[0]
    return float(math.exp(z.max() - z.min())), float(slope)


@dataclass(frozen=True)
class SpectrumGrid:
    """Finite sample of frequencies standing in for the spectrum.

    ``values[i, j]`` holds D*_{lambdas[i]}(times[j]) once a sweep has run.
    """

    lambdas: np.ndarray
    times: np.ndarray | None = None
    values: np.ndarray | None = None

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float).ravel()
        if lam.size == 0:
            raise ValueError("spectrum grid is empty")
        if np.any(lam < 0) or np.any(np.diff(lam) <= 0):
            raise ValueError("grid frequencies must be nonnegative and strictly ascending")
        object.__setattr__(self, "lambdas", lam)

    @classmethod
    def logspaced(cls, lo: float, hi: float, per_decade: int = 16, include=()) -> "SpectrumGrid":
        n = max(2, int(round(math.log10(hi / lo) * per_decade)) + 1)
        lam = np.union1d(np.geomspace(lo, hi, n), np.asarray(include, dtype=float))
        return cls(lam)


@dataclass
class SweepResult:
    grid: SpectrumGrid
    times: np.ndarray
    d_estimate: np.ndarray
    argmax_lambda: np.ndarray
    failures: list = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.failures

    def columns(self) -> dict:
        return {"t": self.times, "D": self.d_estimate, "argmax_lambda": self.argmax_lambda}

    def to_dict(self) -> dict:
        return {"lower_bound": True, "lambdas": self.grid.lambdas, "times": self.times,
                "D": self.d_estimate, "argmax_lambda": self.argmax_lambda,
                "failures": self.failures}


def thread_count(threads: int | None = None) -> int:
    """Worker count: explicit value, else RESLAB_THREADS, else the CPU count."""
    if threads is None:
        env = os.environ.get("RESLAB_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def sweep_spectrum(spec: DampingSpec, grid: SpectrumGrid, t, tol: float = DEFAULT_TOL, *,
                   threads: int | None = None, include_displacement: bool = True) -> SweepResult:
    """max over the grid of dstar at each time in ``t``, with its argmax.

    The result is a lower bound for D(t), the supremum over the whole
    spectrum. Frequencies whose integration fails are listed in
    ``failures`` and left out of the maximum.
    """
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(times < spec.t0):
        raise ValueError("sweep times precede t0")

    def one(lam):
        try:
            return dstar(spec, lam, times, tol, include_displacement), None
        except (IntegrationError, FloatingPointError, ValueError) as exc:
            return None, {"lambda": lam, "error": str(exc),
                          "last_good_time": getattr(exc, "last_good_time", None)}

    lams = grid.lambdas.tolist()
    workers = min(thread_count(threads), len(lams))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, lams))
    else:
        results = [one(lam) for lam in lams]
    values = np.full((len(lams), times.size), np.nan)
    failures = []
    for i, (vals, fail) in enumerate(results):
        if fail is None:
            values[i] = vals
        else:
            failures.append(fail)
    if len(failures) == len(lams):
        raise IntegrationError("every frequency of the sweep failed", spec.t0)
    masked = np.where(np.isnan(values), -np.inf, values)
    idx = np.argmax(masked, axis=0)
    d = masked[idx, np.arange(times.size)]
    filled = SpectrumGrid(grid.lambdas, times, values)
    return SweepResult(filled, times, d, grid.lambdas[idx], failures)


@dataclass
class ExperimentConfig:
    """What :func:`run_experiment` should do.

    ``lam`` is the mode of the slow run (default: the resonant frequency).
    ``window`` defaults to [1e3 t0, 1e5 t0] and ``t_end`` to its upper end.
    The control sweep replaces beta by its mean and uses a log grid of
    frequencies from ``0.1 / window[1]`` to 1.
    """

    spec: DampingSpec
    lam: float | None = None
    init: tuple = (1.0, 0.0)
    window: tuple | None = None
    t_end: float | None = None
    tol: float = DEFAULT_TOL
    fast: bool = True
    fast_tol: float = 1e-12
    perturbation: float = 1e-6
    t_probe: float | None = None
    t_max: float | None = None
    control: bool = True
    control_per_decade: int = 16
    sweep_checkpoints: int = 16
    per_decade: int = 64
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    plot_data: bool = False
    figures: bool = False

    def resolved_window(self) -> tuple:
        if self.window is None:
            return (1e3 * self.spec.t0, 1e5 * self.spec.t0)
        return tuple(float(x) for x in self.window)

    def validate(self) -> None:
        from .ode_engine import _check_tol

        if self.window is not None and len(self.window) != 2:
            raise ValueError("window must be a (t_lo, t_hi) pair")
        lo, hi = self.resolved_window()
        if not (lo >= self.spec.t0 and hi > lo) or math.log10(hi / lo) < MIN_DECADES - 1e-9:
            raise ValueError(f"window [{lo:g}, {hi:g}] must lie after t0 and span two decades")
        if self.t_end is not None and self.t_end < hi:
            raise ValueError("t_end ends before the fit window")
        _check_tol(self.tol)
        _check_tol(self.fast_tol)
        if self.lam is not None and self.lam < 0:
            raise ValueError("mode frequency must be nonnegative")

    def to_dict(self) -> dict:
        return {"spec": self.spec.to_dict(), "lam": self.lam, "init": list(self.init),
                "window": list(self.resolved_window()), "t_end": self.t_end, "tol": self.tol,
                "fast": self.fast, "fast_tol": self.fast_tol,
                "perturbation": self.perturbation, "t_probe": self.t_probe,
                "t_max": self.t_max, "control": self.control,
                "control_per_decade": self.control_per_decade,
                "sweep_checkpoints": self.sweep_checkpoints, "per_decade": self.per_decade,
                "tolerances": dict(self.tolerances)}


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    predicted: PredictedRates | None = None
    slow: DecayFit | None = None
    fast: DecayFit | None = None
    perturbed: DecayFit | None = None
    control: DecayFit | None = None
    separatrix: dict | None = None
    envelope: dict | None = None
    checks: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)
    runtimes: dict = field(default_factory=dict)
    data: dict = field(default_factory=dict, repr=False)

    @property
    def complete(self) -> bool:
        return not self.errors

    @property
    def passed(self) -> bool:
        return self.complete and all(c["passed"] for c in self.checks)

    def to_dict(self) -> dict:
        """Report contents without wall-clock runtimes, so the output is reproducible."""
        fit = lambda f: None if f is None else f.to_dict()
        return {
            "spec": self.config.spec.to_dict(),
            "config": self.config.to_dict(),
            "predicted": None if self.predicted is None else self.predicted.to_dict(),
            "fits": {"slow": fit(self.slow), "fast": fit(self.fast),
                     "perturbed": fit(self.perturbed), "control": fit(self.control)},
            "separatrix": self.separatrix,
            "envelope": self.envelope,
            "checks": self.checks,
            "complete": self.complete,
            "passed": self.passed,
            "errors": self.errors,
            "artifacts": self.artifacts,
        }


def _check(name, measured, predicted, tol) -> dict:
    return {"name": name, "measured": measured, "predicted": predicted, "tolerance": tol,
            "passed": bool(abs(measured - predicted) <= tol)}


def _stage(report, name, fn):
    t = time.perf_counter()
    try:
        return fn()
    except (IntegrationError, ValueError, RuntimeError, ArithmeticError) as exc:
        report.errors.append({"stage": name, "error": f"{type(exc).__name__}: {exc}"})
        return None
    finally:
        report.runtimes[name] = time.perf_counter() - t


def run_experiment(config: ExperimentConfig, out_dir=None) -> ExperimentReport:
    """Slow run, optional separatrix fast run (plus a perturbed copy), optional
    r = 0 control sweep, exponent fits and predicted-vs-measured checks.

    Sub-run failures are recorded in ``report.errors`` and the report is
    marked incomplete; nothing is raised. With ``out_dir`` every trajectory,
    the sweep and the report are written there (see :func:`write_report`).
    """
    from .phase import find_separatrix, separatrix_initial_data

    report = ExperimentReport(config)
    try:
        config.validate()
    except ValueError as exc:
        report.errors.append({"stage": "config", "error": f"precondition: {exc}"})
        if out_dir is not None:
            write_report(report, out_dir)
        return report
    spec = config.spec
    tols = {**DEFAULT_TOLERANCES, **config.tolerances}
    window = config.resolved_window()
    t_end = config.t_end if config.t_end is not None else window[1]
    lam = spec.lambda0 if config.lam is None else float(config.lam)

    def predict():
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OutsideProvedRegimeWarning)
            return fourier_rates(spec)

    try:
        report.predicted = predict()
    except UnsupportedSpecError as exc:
        report.errors.append({"stage": "predict", "error": str(exc)})
    pred = report.predicted
    resonant = math.isclose(lam, spec.lambda0, rel_tol=1e-12)
    form = "polar" if lam > 0 else "cartesian"

    def slow():
        tr = integrate_mode(spec, lam, ModeState(spec.t0, *config.init, lam), t_end, config.tol,
                            per_decade=config.per_decade, form=form)
        report.data["slow"] = tr
        f = fit_decay_exponent(tr.t, log_energy=tr.energy_log(), window=window)
        if pred is not None:
            ratio, trend = envelope_ratio(tr.t, tr.energy_log(), pred.exponent_resonant, window)
            report.envelope = {"exponent": pred.exponent_resonant, "max_min_ratio": ratio,
                               "trend_slope": trend}
        return f

    report.slow = _stage(report, "slow", slow)
    if report.slow is not None and pred is not None:
        target = pred.exponent_resonant if resonant else pred.exponent_classical
        report.checks.append(_check("slow", report.slow.exponent, target, tols["slow"]))

    if config.fast and pred is not None:
        def separatrix():
            t_max = config.t_max if config.t_max is not None else window[1] * spec.lambda0
            res = find_separatrix(spec, t_probe=config.t_probe, t_max=t_max)
            report.separatrix = res.to_dict()
            return res

        res = _stage(report, "separatrix", separatrix)

        def fast_run(shift, key):
            def go():
                u, up = separatrix_initial_data(res, shift=shift, lam=spec.lambda0)
                tr = integrate_mode(spec, spec.lambda0, ModeState(spec.t0, u, up, spec.lambda0),
                                    t_end, config.fast_tol, per_decade=config.per_decade,
                                    form="polar")
                report.data[key] = tr
                return fit_decay_exponent(tr.t, log_energy=tr.energy_log(), window=window)
            return go

        if res is not None:
            report.fast = _stage(report, "fast", fast_run(0.0, "fast"))
            if report.fast is not None:
                report.checks.append(_check("fast", report.fast.exponent, pred.exponent_fast,
                                            tols["fast"]))
            if config.perturbation:
                report.perturbed = _stage(report, "perturbed",
                                          fast_run(config.perturbation, "perturbed"))
                if report.perturbed is not None:
                    report.checks.append(_check("perturbed", report.perturbed.exponent,
                                                pred.exponent_resonant, tols["perturbed"]))

    if config.control and pred is not None:
        def control():
            ctrl = DampingSpec(kind="model", m=pred.m_avg, r=0.0, lambda0=spec.lambda0,
                               t0=spec.t0)
            grid = SpectrumGrid.logspaced(0.1 / window[1], 1.0,
                                          config.control_per_decade)
            times = log_checkpoints(window[0], window[1], config.sweep_checkpoints)
            sw = sweep_spectrum(ctrl, grid, times, config.tol)
            report.data["control"] = sw
            if sw.failures:
                report.errors.append({"stage": "control", "error": "partial sweep",
                                      "failures": sw.failures})
            return fit_decay_exponent(sw.times, sw.d_estimate, window=window,
                                      bins_per_decade=config.sweep_checkpoints)

        report.control = _stage(report, "control", control)
        if report.control is not None:
            report.checks.append(_check("control", report.control.exponent,
                                        pred.exponent_classical, tols["control"]))

    if out_dir is not None:
        write_report(report, out_dir)
    return report


def plot_columns(t, log_e, fit: DecayFit) -> dict:
    lo, hi = fit.window
    sel = (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12))
    ln10 = math.log(10)
    return {"log10_t": np.log10(t[sel]), "log10_E": log_e[sel] / ln10,
            "fit_line": fit.log_model(t[sel]) / ln10}


def write_report(report: ExperimentReport, out_dir) -> dict:
    """Persist trajectories, sweep, plot data, figures and ``report.json``.

    Wall-clock runtimes go to ``timings.txt``, never into the data files.
    """
    from . import serialize

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fits = {"slow": report.slow, "fast": report.fast, "perturbed": report.perturbed}
    for key in ("slow", "fast", "perturbed"):
        tr = report.data.get(key)
        if tr is None:
            continue
        name = f"{key}_trajectory.csv"
        serialize.write_csv(out / name, tr.columns())
        report.artifacts[f"{key}_trajectory"] = name
        if report.config.plot_data and fits[key] is not None:
            name = f"{key}_plot.csv"
            serialize.write_csv(out / name, plot_columns(tr.t, tr.energy_log(), fits[key]))
            report.artifacts[f"{key}_plot"] = name
    sw = report.data.get("control")
    if sw is not None:
        serialize.write_csv(out / "control_sweep.csv", sw.columns())
        report.artifacts["control_sweep"] = "control_sweep.csv"
        if report.config.plot_data and report.control is not None:
            serialize.write_csv(out / "control_plot.csv",
                                plot_columns(sw.times, np.log(sw.d_estimate), report.control))
            report.artifacts["control_plot"] = "control_plot.csv"
    if report.separatrix is not None:
        serialize.write_json(out / "separatrix.json", report.separatrix)
        report.artifacts["separatrix"] = "separatrix.json"
    if report.config.figures:
        from . import plotting

        report.artifacts.update(plotting.report_figures(report, out))
    report.artifacts["report"] = "report.json"
    serialize.write_json(out / "report.json", report.to_dict())
    lines = [f"{k} {v:.3f}s" for k, v in report.runtimes.items()]
    (out / "timings.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return report.artifacts

"""Command-line interface: ``reslab <subcommand> ...``.

Exit status is 0 on success, 2 for invalid input (bad arguments, malformed
config, missing artifacts) and 1 when a computation fails; in the last case a
``failures.json`` manifest is written to the output directory next to whatever
partial outputs exist.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
import warnings
from pathlib import Path

import numpy as np

from . import __version__, serialize
from .config import ConfigError, load_experiment, load_spec, parse_window, safe_eval

TRAJECTORY = "trajectory.csv"


class ValidationError(ValueError):
    pass


class _Failure(Exception):
    def __init__(self, out, exc):
        super().__init__(str(exc))
        self.out, self.exc = out, exc


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ValidationError(f"cannot create output directory {out}: {exc.strerror}") from exc
    if not os.access(out, os.W_OK):
        raise ValidationError(f"output directory {out} is not writable")
    return out


def _num_list(text: str) -> list[float]:
    return [safe_eval(x) for x in text.split(",") if x.strip()]


def _range3(text: str) -> tuple[float, float, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValidationError(f"{text!r} must look like lo:hi:count")
    return safe_eval(parts[0]), safe_eval(parts[1]), int(safe_eval(parts[2]))


def _emit(obj, out: Path | None, name: str) -> None:
    text = serialize.dumps(obj)
    sys.stdout.write(text)
    if out is not None:
        (out / name).write_text(text, encoding="utf-8")


def _predicted(spec):
    from .damping import OutsideProvedRegimeWarning, fourier_rates

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", OutsideProvedRegimeWarning)
        rates = fourier_rates(spec)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return rates


# ---------------------------------------------------------------- subcommands

def cmd_predict(args):
    from .damping import UnsupportedSpecError, predict_classical

    spec = load_spec(args.spec)
    out = _out_dir(args.out) if args.out else None
    try:
        rates = _predicted(spec)
    except UnsupportedSpecError as exc:
        raise ValidationError(str(exc)) from exc
    regime, classical = predict_classical(spec)
    _emit({"spec": spec.to_dict(), "predicted": rates.to_dict(),
           "classical": {"regime": regime.value, "exponent": classical}},
          out, "prediction.json")
    return 0


def cmd_simulate(args):
    from .ode_engine import ModeState, integrate_mode

    spec = load_spec(args.spec)
    out = _out_dir(args.out)
    lam = spec.lambda0 if args.lam is None else args.lam
    t_end = args.t_end if args.t_end is not None else 1e5 * spec.t0
    form = args.form
    if form == "auto":
        form = "polar" if lam > 0 else "cartesian"
    try:
        tr = integrate_mode(spec, lam, ModeState(spec.t0, args.u0, args.u_prime0, lam), t_end,
                            args.tol, per_decade=args.per_decade, form=form)
    except RuntimeError as exc:
        raise _Failure(out, exc) from exc
    serialize.write_csv(out / TRAJECTORY, tr.columns())
    meta = {"spec": spec.to_dict(), "lambda": lam, "init": [args.u0, args.u_prime0],
            "t_end": t_end, "tol": args.tol, "form": form, "per_decade": args.per_decade,
            "steps": tr.steps, "est_error": tr.est_error, "trajectory": TRAJECTORY}
    serialize.write_json(out / "simulate.json", meta)
    if args.plot:
        from .plotting import plot_energy_fits

        plot_energy_fits([("trajectory", tr.t, tr.energy_log(), None)], out / "trajectory.png")
    print(f"wrote {out / TRAJECTORY} ({tr.t.size} samples)")
    return 0


def cmd_fit(args):
    from .analysis import FitError, fit_decay_exponent
    from .plotting import plot_energy_fits

    spec = load_spec(args.spec)
    out = _out_dir(args.out)
    path = Path(args.trajectory) if args.trajectory else out / TRAJECTORY
    if not path.is_file():
        raise ValidationError(f"no trajectory artifact found at {path}; run simulate first")
    cols = serialize.read_csv(path)
    if "t" not in cols or "energy" not in cols:
        raise ValidationError(f"{path} lacks t/energy columns")
    window = parse_window(args.window) if args.window else (1e3 * spec.t0, 1e5 * spec.t0)
    try:
        fit = fit_decay_exponent(cols["t"], cols["energy"], window)
    except FitError as exc:
        raise ValidationError(str(exc)) from exc
    record = {"spec": spec.to_dict(), "trajectory": path.name, "fit": fit.to_dict()}
    if spec.kind != "custom":
        pr = _predicted(spec)
        record["predicted_resonant"] = pr.exponent_resonant
        record["predicted_classical"] = pr.exponent_classical
    _emit(record, out, "fit.json")
    if args.plot_data:
        from .analysis import plot_columns

        serialize.write_csv(out / "plot_data.csv",
                            plot_columns(cols["t"], np.log(cols["energy"]), fit))
    if args.plot:
        plot_energy_fits([("trajectory", cols["t"], np.log(cols["energy"]), fit)],
                         out / "fit.png")
    return 0


def cmd_fast(args):
    from .analysis import fit_decay_exponent
    from .ode_engine import ModeState, integrate_mode
    from .phase import find_separatrix, integrate_phase, separatrix_initial_data

    spec = load_spec(args.spec)
    out = _out_dir(args.out)
    bracket = parse_window(args.bracket) if args.bracket else None
    window = parse_window(args.window) if args.window else (1e3 * spec.t0, 1e5 * spec.t0)
    t_end = args.t_end if args.t_end is not None else window[1]
    lam = spec.lambda0
    try:
        res = find_separatrix(spec, bracket, args.t_probe, args.tol_phi,
                              t_max=args.t_max if args.t_max is not None else window[1] * lam,
                              tol=args.tol)
        serialize.write_json(out / "separatrix.json", res.to_dict())
        path = integrate_phase(spec, res.phi0_star, res.probe_time, tol=args.tol)
        serialize.write_csv(out / "separatrix_phase.csv", path.columns())
        u, up = separatrix_initial_data(res, args.energy0, shift=args.shift, lam=lam)
        tr = integrate_mode(spec, lam, ModeState(spec.t0, u, up, lam), t_end, args.tol,
                            form="polar")
    except RuntimeError as exc:
        raise _Failure(out, exc) from exc
    serialize.write_csv(out / "fast_trajectory.csv", tr.columns())
    fit = fit_decay_exponent(tr.t, log_energy=tr.energy_log(), window=window)
    record = {"spec": spec.to_dict(), "separatrix": res.to_dict(), "init": [u, up],
              "shift": args.shift, "tol": args.tol, "fit": fit.to_dict()}
    if spec.kind != "custom":
        record["predicted_fast"] = _predicted(spec).exponent_fast
    _emit(record, out, "fast_solution.json")
    if args.plot_data:
        from .analysis import plot_columns

        serialize.write_csv(out / "fast_plot.csv", plot_columns(tr.t, tr.energy_log(), fit))
    if args.plot:
        from .plotting import plot_energy_fits, plot_phase_paths

        plot_energy_fits([("fast", tr.t, tr.energy_log(), fit)], out / "fast.png")
        plot_phase_paths([path], out / "separatrix_phase.png")
    return 0


def cmd_sweep(args):
    from .analysis import SpectrumGrid, sweep_spectrum
    from .ode_engine import log_checkpoints

    spec = load_spec(args.spec)
    out = _out_dir(args.out)
    try:
        if args.lambdas:
            grid = SpectrumGrid(sorted(_num_list(args.lambdas)))
        else:
            lo, hi, per = _range3(args.grid)
            grid = SpectrumGrid.logspaced(lo, hi, per)
        if args.times:
            times = np.asarray(sorted(_num_list(args.times)))
        else:
            lo, hi, per = _range3(args.t_range)
            times = log_checkpoints(lo, hi, per)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    try:
        res = sweep_spectrum(spec, grid, times, args.tol,
                             include_displacement=not args.pure_energy)
    except RuntimeError as exc:
        raise _Failure(out, exc) from exc
    serialize.write_csv(out / "sweep.csv", res.columns())
    record = {"spec": spec.to_dict(), "tol": args.tol, "pure_energy": args.pure_energy,
              **res.to_dict(), "values": res.grid.values}
    serialize.write_json(out / "sweep.json", record)
    if args.plot:
        from .plotting import plot_sweep

        plot_sweep(res, out / "sweep.png")
    print(f"D lower bound at t = {times[-1]:g}: {res.d_estimate[-1]:.6g} "
          f"(argmax lambda {res.argmax_lambda[-1]:.6g})")
    if res.failures:
        serialize.write_json(out / "failures.json", {"failures": res.failures})
        return 1
    return 0


def cmd_oscint(args):
    from .oscint import OscIntegrand, oscillatory_integral

    out = _out_dir(args.out) if args.out else None
    f = OscIntegrand(n=args.n, alpha=args.alpha, kind=args.kind, t0=args.t0)
    try:
        res = oscillatory_integral(f, args.tol)
    except RuntimeError as exc:
        raise _Failure(out, exc) from exc
    _emit(res.to_dict(), out, "oscint.json")
    return 0


def cmd_check(args):
    from .damping import DampingSpec

    path = Path(args.report)
    if not path.is_file():
        raise ValidationError(f"report {path} not found")
    try:
        data = serialize.read_json(path)
        spec = DampingSpec.from_dict(data["spec"])
        stored = data["predicted"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{path} is not a report with spec and predicted fields: {exc}")
    if stored is None:
        raise ValidationError(f"{path} holds no predicted rates")
    fresh = json.loads(serialize.dumps(_predicted(spec).to_dict()))
    bad = [k for k in fresh if stored.get(k) != fresh[k]] + [k for k in stored if k not in fresh]
    if bad:
        for k in bad:
            print(f"mismatch in {k}: stored {stored.get(k)!r}, recomputed {fresh.get(k)!r}",
                  file=sys.stderr)
        return 1
    print(f"{path}: predicted rates match ({len(fresh)} fields)")
    return 0


def cmd_run(args):
    from .analysis import run_experiment

    cfg = load_experiment(args.spec, window=parse_window(args.window) if args.window else None,
                          tol=args.tol)
    if args.no_fast:
        cfg.fast = False
    if args.no_control:
        cfg.control = False
    if args.plot_data:
        cfg.plot_data = True
    cfg.figures = not args.no_figures
    try:
        cfg.validate()
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    out = _out_dir(args.out)
    report = run_experiment(cfg, out)
    for c in report.checks:
        flag = "PASS" if c["passed"] else "FAIL"
        print(f"{flag} {c['name']}: measured {c['measured']:.4f}, predicted "
              f"{c['predicted']:.4f} +- {c['tolerance']}")
    if not report.complete:
        serialize.write_json(out / "failures.json", {"failures": report.errors})
        for e in report.errors:
            print(f"error in {e['stage']}: {e['error']}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="reslab",
                                description="Resonant decay of modes with oscillating damping.")
    p.add_argument("--version", action="version", version=f"reslab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="subcommand")

    def spec_arg(sp, out_required=True):
        sp.add_argument("--spec", required=True, help="configuration file")
        sp.add_argument("--out", required=out_required, default=None, help="output directory")

    sp = sub.add_parser("predict", help="predicted exponents from the Fourier data of beta")
    spec_arg(sp, out_required=False)
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("simulate", help="integrate one mode and store its trajectory")
    spec_arg(sp)
    sp.add_argument("--lambda", dest="lam", type=float, default=None)
    sp.add_argument("--u0", type=float, default=1.0)
    sp.add_argument("--u-prime0", type=float, default=0.0)
    sp.add_argument("--t-end", type=float, default=None)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--per-decade", type=int, default=64)
    sp.add_argument("--form", choices=("auto", "polar", "cartesian"), default="auto")
    sp.add_argument("--plot", action="store_true", help="also write trajectory.png")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("fit", help="fit a decay exponent to a stored trajectory")
    spec_arg(sp)
    sp.add_argument("--window", default=None, help="lo:hi (default 1e3 t0:1e5 t0)")
    sp.add_argument("--trajectory", default=None, help="CSV to fit (default OUT/trajectory.csv)")
    sp.add_argument("--plot-data", action="store_true")
    sp.add_argument("--plot", action="store_true")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("fast-solution", help="separatrix search and the fast-decaying mode")
    spec_arg(sp)
    sp.add_argument("--bracket", default=None, help="phi_lo:phi_hi")
    sp.add_argument("--t-probe", type=float, default=None)
    sp.add_argument("--t-max", type=float, default=None)
    sp.add_argument("--tol-phi", type=float, default=1e-12)
    sp.add_argument("--tol", type=float, default=1e-12)
    sp.add_argument("--t-end", type=float, default=None)
    sp.add_argument("--window", default=None)
    sp.add_argument("--energy0", type=float, default=1.0)
    sp.add_argument("--shift", type=float, default=0.0, help="offset added to phi0*")
    sp.add_argument("--plot-data", action="store_true")
    sp.add_argument("--plot", action="store_true")
    sp.set_defaults(func=cmd_fast)

    sp = sub.add_parser("sweep", help="lower bound of D(t) over a frequency grid")
    spec_arg(sp)
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--grid", help="lo:hi:per_decade log grid of frequencies")
    g.add_argument("--lambdas", help="comma-separated frequencies")
    h = sp.add_mutually_exclusive_group(required=True)
    h.add_argument("--times", help="comma-separated times")
    h.add_argument("--t-range", help="lo:hi:per_decade log-spaced times")
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--pure-energy", action="store_true",
                    help="constrain E*(t0) <= 1 instead of E*(t0) + u(t0)^2 <= 1")
    sp.add_argument("--plot", action="store_true")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("oscint", help="int_t0^inf cos|sin(n t) / t^alpha dt")
    sp.add_argument("--n", type=float, required=True)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--t0", type=float, default=1.0)
    sp.add_argument("--kind", choices=("cos", "sin"), default="cos")
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_oscint)

    sp = sub.add_parser("check", help="recompute predicted rates of a report and compare")
    sp.add_argument("--report", required=True)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("run", help="full experiment: slow, fast, perturbed and control runs")
    spec_arg(sp)
    sp.add_argument("--window", default=None)
    sp.add_argument("--tol", type=float, default=None)
    sp.add_argument("--no-fast", action="store_true")
    sp.add_argument("--no-control", action="store_true")
    sp.add_argument("--plot-data", action="store_true")
    sp.add_argument("--no-figures", action="store_true")
    sp.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return int(args.func(args))
    except _Failure as f:
        print(f"error: {type(f.exc).__name__}: {f.exc}", file=sys.stderr)
        if f.out is not None:
            serialize.write_json(f.out / "failures.json", {
                "command": args.command, "error": type(f.exc).__name__, "message": str(f.exc),
                "last_good_time": getattr(f.exc, "last_good_time", None)})
        return 1
    except (ValidationError, ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        traceback.print_exc(file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

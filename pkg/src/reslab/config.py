"""Key-value configuration files describing a damping and a run.

Example::

    [damping]
    kind = model          ; model | periodic | custom
    m = 3
    r = 2
    lambda0 = 1
    alpha0 = pi/2
    t0 = 1

    [profile]             ; optional additions to beta
    harmonics = 1 6 0     ; amplitude omega phase; several rows separated by ';'
    segments = 0 pi/4 1 1; pi/4 3*pi/4 -1 -1; 3*pi/4 pi 1 1
    shape = square        ; shorthand for the +-amplitude table of sgn(cos 2 lambda0 t)
    amplitude = 1
    eta = tlogt           ; custom kind only
    eta_param = 1

    [run]
    lambda = 1
    u0 = 1
    u_prime0 = 0
    window = 1e3:1e5
    tol = 1e-10
    fast = yes
    control = yes

Numbers may be arithmetic expressions in ``pi``, ``e`` and ``sqrt``.
"""

from __future__ import annotations

import ast
import configparser
import math
import operator
from pathlib import Path

from .analysis import DEFAULT_TOLERANCES, ExperimentConfig
from .damping import DampingSpec, square_wave

__all__ = ["ConfigError", "safe_eval", "parse_rows", "parse_window", "load_spec",
           "load_experiment", "spec_to_ini"]


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


_NAMES = {"pi": math.pi, "e": math.e, "inf": math.inf}
_FUNCS = {"sqrt": math.sqrt}
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def safe_eval(text: str) -> float:
    """Evaluate a numeric expression such as ``3*pi/4`` or ``1e-10`` without eval()."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords):
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ConfigError(f"unsupported expression element in {text!r}")

    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse number {text!r}") from exc
    try:
        return float(ev(tree))
    except (ArithmeticError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot evaluate {text!r}: {exc}") from exc


def parse_rows(text: str, width: int) -> tuple:
    """'a b c; d e f' -> ((a, b, c), (d, e, f)) with each row of ``width`` numbers."""
    rows = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        vals = [safe_eval(tok) for tok in chunk.replace(",", " ").split()]
        if len(vals) != width:
            raise ConfigError(f"row {chunk.strip()!r} needs {width} numbers")
        rows.append(tuple(vals))
    return tuple(rows)


def parse_window(text: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise ConfigError(f"window {text!r} must look like lo:hi")
    return safe_eval(parts[0]), safe_eval(parts[1])


def _bool(section, key, default):
    try:
        return section.getboolean(key, fallback=default)
    except ValueError as exc:
        raise ConfigError(f"[{section.name}] {key}: {exc}") from exc


def _num(section, key, default=None):
    if section is None or key not in section:
        return default
    return safe_eval(section[key])


def _read(path) -> configparser.ConfigParser:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(path.read_text(encoding="utf-8"), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    if "damping" not in cp:
        raise ConfigError("config needs a [damping] section")
    known = {"damping", "profile", "run"}
    extra = set(cp.sections()) - known
    if extra:
        raise ConfigError(f"unknown sections {sorted(extra)}")
    return cp


_DAMPING_KEYS = {"kind", "m", "r", "lambda0", "alpha0", "period", "t0"}
_PROFILE_KEYS = {"harmonics", "segments", "shape", "amplitude", "eta", "eta_param"}
_RUN_KEYS = {"lambda", "u0", "u_prime0", "window", "t_end", "tol", "fast", "fast_tol",
             "perturbation", "t_probe", "t_max", "control", "control_per_decade",
             "sweep_checkpoints", "per_decade", "plot_data", "figures"} | {
                 f"tol_{k}" for k in DEFAULT_TOLERANCES}


def _check_keys(section, allowed):
    extra = set(section) - allowed
    if extra:
        raise ConfigError(f"[{section.name}] has unknown keys {sorted(extra)}")


def _spec_from(cp) -> DampingSpec:
    d = cp["damping"]
    _check_keys(d, _DAMPING_KEYS)
    prof = cp["profile"] if "profile" in cp else None
    if prof is not None:
        _check_keys(prof, _PROFILE_KEYS)
    kind = d.get("kind", "model").strip()
    kw = {"kind": kind}
    for key in ("m", "r", "lambda0", "alpha0", "period", "t0"):
        if key in d:
            kw[key] = safe_eval(d[key])
    try:
        if prof is not None and prof.get("shape", "").strip():
            shape = prof["shape"].strip()
            if shape != "square":
                raise ConfigError(f"unknown profile shape {shape!r}")
            if prof.get("segments", "").strip():
                raise ConfigError("give either shape or segments, not both")
            base = square_wave(kw.get("m", 3.0), _num(prof, "amplitude", 1.0),
                               kw.get("lambda0", 1.0), kw.get("t0", 1.0))
            kw.update(kind="periodic", period=base.period, segments=base.segments)
        if prof is not None:
            if prof.get("harmonics", "").strip():
                kw["harmonics"] = parse_rows(prof["harmonics"], 3)
            if prof.get("segments", "").strip():
                kw["segments"] = parse_rows(prof["segments"], 4)
            if "eta" in prof:
                kw["eta"] = prof["eta"].strip()
            if "eta_param" in prof:
                kw["eta_param"] = safe_eval(prof["eta_param"])
        return DampingSpec(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid damping: {exc}") from exc


def load_spec(path) -> DampingSpec:
    """Read only the damping description of a config file."""
    return _spec_from(_read(path))


def load_experiment(path, **overrides) -> ExperimentConfig:
    """Damping plus [run] options; keyword overrides win over the file."""
    cp = _read(path)
    spec = _spec_from(cp)
    run = cp["run"] if "run" in cp else None
    kw = {}
    if run is not None:
        _check_keys(run, _RUN_KEYS)
        if "lambda" in run:
            kw["lam"] = safe_eval(run["lambda"])
        kw["init"] = (_num(run, "u0", 1.0), _num(run, "u_prime0", 0.0))
        if "window" in run:
            kw["window"] = parse_window(run["window"])
        for key in ("t_end", "tol", "fast_tol", "perturbation", "t_probe", "t_max"):
            if key in run:
                kw[key] = safe_eval(run[key])
        for key in ("control_per_decade", "sweep_checkpoints", "per_decade"):
            if key in run:
                kw[key] = int(safe_eval(run[key]))
        for key in ("fast", "control", "plot_data", "figures"):
            if key in run:
                kw[key] = _bool(run, key, None)
        tols = dict(DEFAULT_TOLERANCES)
        for k in DEFAULT_TOLERANCES:
            if f"tol_{k}" in run:
                tols[k] = safe_eval(run[f"tol_{k}"])
        kw["tolerances"] = tols
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(spec=spec, **kw)


def _fmt(x: float) -> str:
    return repr(float(x))


def spec_to_ini(spec: DampingSpec) -> str:
    """Config text that :func:`load_spec` turns back into ``spec``."""
    lines = ["[damping]", f"kind = {spec.kind}"]
    for key in ("m", "r", "lambda0", "alpha0"):
        lines.append(f"{key} = {_fmt(getattr(spec, key))}")
    if spec.period is not None:
        lines.append(f"period = {_fmt(spec.period)}")
    lines.append(f"t0 = {_fmt(spec.t0)}")
    prof = []
    if spec.harmonics:
        prof.append("harmonics = " + "; ".join(" ".join(_fmt(x) for x in h)
                                               for h in spec.harmonics))
    if spec.segments:
        prof.append("segments = " + "; ".join(" ".join(_fmt(x) for x in s)
                                              for s in spec.segments))
    if spec.eta is not None:
        prof += [f"eta = {spec.eta}", f"eta_param = {_fmt(spec.eta_param)}"]
    if prof:
        lines += ["", "[profile]"] + prof
    return "\n".join(lines) + "\n"

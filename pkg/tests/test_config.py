import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from reslab import serialize
from reslab.config import (ConfigError, load_experiment, load_spec, parse_rows, parse_window,
                           safe_eval, spec_to_ini)
from reslab.damping import DampingSpec, model_case, square_wave


@pytest.mark.parametrize("text, value", [("3", 3.0), ("3*pi/4", 3 * math.pi / 4),
                                         ("-1e-10", -1e-10), ("sqrt(2)/2", math.sqrt(2) / 2),
                                         ("2**-3", 0.125), ("inf", math.inf), ("e", math.e)])
def test_safe_eval(text, value):
    assert safe_eval(text) == value


@pytest.mark.parametrize("text", ["__import__('os')", "1/0", "x", "sqrt(-1)", "3 +", "[1]",
                                  "True", "sqrt(1, 2)"])
def test_safe_eval_rejects(text):
    with pytest.raises(ConfigError):
        safe_eval(text)


def test_parse_helpers():
    assert parse_rows("1 6 0; 0.5 2 pi", 3) == ((1.0, 6.0, 0.0), (0.5, 2.0, math.pi))
    assert parse_window("1e3:1e5") == (1e3, 1e5)
    with pytest.raises(ConfigError):
        parse_rows("1 2", 3)
    with pytest.raises(ConfigError):
        parse_window("1e3")


def write(tmp_path, text):
    path = tmp_path / "c.cfg"
    path.write_text(text)
    return path


def test_load_model_with_comments(tmp_path):
    spec = load_spec(write(tmp_path, "[damping]\nm = 3 ; mean\nr = 2\nalpha0 = pi/2\n"))
    assert spec == model_case(3, 2, alpha0=math.pi / 2)


def test_load_square_shape(tmp_path):
    spec = load_spec(write(tmp_path, "[damping]\nm = 3\n[profile]\nshape = square\n"))
    assert spec == square_wave(3.0, 1.0)


def test_load_experiment_run_section(tmp_path):
    cfg = load_experiment(write(tmp_path, "[damping]\nm = 3\nr = 2\n[run]\nlambda = 2\n"
                                          "window = 1e2:1e4\nfast = no\ntol_slow = 0.1\n"),
                          tol=1e-9)
    assert cfg.lam == 2.0 and cfg.window == (1e2, 1e4) and cfg.fast is False
    assert cfg.tol == 1e-9 and cfg.tolerances["slow"] == 0.1


@pytest.mark.parametrize("text", [
    "[damping]\nm = 3\n[extra]\nx = 1\n",
    "[damping]\nm = 3\n[profile]\nshape = triangle\n",
    "[damping]\nm = 3\n[profile]\nshape = square\nsegments = 0 1 1 1\n",
    "[damping]\nm = 3\n[run]\nfast = perhaps\n",
    "[damping]\nm = 3\n[run]\nspeed = 1\n",
    "[damping\nm = 3\n",
])
def test_config_errors(tmp_path, text):
    with pytest.raises(ConfigError):
        load_experiment(write(tmp_path, text))


@pytest.mark.parametrize("spec", [
    model_case(3, 2),
    model_case(1.5, 0.25, alpha0=0.3, lambda0=2.0, t0=3.0),
    square_wave(3.0, 1.0),
    model_case(3, 2, harmonics=((1.0, 6.0, 0.5),)),
    DampingSpec(kind="custom", m=1.0, r=0.5, eta="tlogt", eta_param=2.0),
])
def test_ini_round_trip(tmp_path, spec):
    assert load_spec(write(tmp_path, spec_to_ini(spec))) == spec


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_round_trip(x):
    text = serialize.dumps({"x": x})
    assert json.loads(text)["x"] == x
    assert isinstance(json.loads(text)["x"], float)


def test_json_layout():
    text = serialize.dumps({"a": [1.0, 2.5], "b": {"c": None, "d": True}, "e": np.float64(3)})
    assert text == ('{\n  "a": [1.0, 2.5],\n  "b": {\n    "c": null,\n    "d": true\n  },\n'
                    '  "e": 3.0\n}\n')
    assert serialize.format_float(float("nan")) == "null"
    with pytest.raises(TypeError):
        serialize.dumps({"x": object()})


def test_csv_round_trip(tmp_path):
    cols = {"t": np.array([1.0, 10.0]), "energy": np.array([1 / 3, 1e-300])}
    path = serialize.write_csv(tmp_path / "x.csv", cols)
    back = serialize.read_csv(path)
    assert list(back) == ["t", "energy"]
    for k in cols:
        np.testing.assert_array_equal(back[k], cols[k])

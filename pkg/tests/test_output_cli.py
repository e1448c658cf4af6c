import csv
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from flamehj.cli import EXIT_CONFIG, EXIT_NONCONVERGENCE, EXIT_OK, main
from flamehj.config import build_config, parse_p_list
from flamehj.errors import ConfigError
from flamehj.output import OutputSet, render_svg, to_csv, to_json

GOLDEN = Path(__file__).parent / "golden"


def run(tmp_path, doc, command, *extra, name="out"):
    cfg = tmp_path / f"{name}.json"
    cfg.write_text(json.dumps(doc))
    out = tmp_path / name
    code = main([*command.split(), "--config", str(cfg), "--out", str(out), *extra])
    return code, out


def tree(path):
    return {p.relative_to(path).as_posix(): p.read_bytes() for p in sorted(path.rglob("*")) if p.is_file()}


# -- emitters -----------------------------------------------------------------------


def test_empty_svg_scaffold():
    doc = render_svg([])
    assert 'viewBox="-1.200000 -1.200000 2.400000 2.400000"' in doc
    assert "<polyline" not in doc and doc.endswith("</svg>\n")


def test_svg_unit_circle():
    th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    doc = render_svg([np.column_stack([np.cos(th), np.sin(th)])])
    assert 'viewBox="-1.200000 -1.200000 2.400000 2.400000"' in doc
    (line,) = [ln for ln in doc.splitlines() if "<polyline" in ln]
    assert len(line.split('points="')[1].rstrip('"/>').split()) == 64


def test_svg_curves_in_order():
    doc = render_svg([np.zeros((2, 2)), (np.ones((3, 2)), {"stroke": "#000000"})])
    lines = [ln for ln in doc.splitlines() if "<polyline" in ln]
    assert len(lines) == 2
    assert 'stroke="#1f77b4"' in lines[0] and 'stroke="#000000"' in lines[1]


def test_json_and_csv_emitters():
    text = to_json({"a": np.float64("nan"), "b": np.arange(2), "c": np.bool_(True)})
    assert json.loads(text) == {"a": None, "b": [0, 1], "c": True}
    rows = [{"x": 1.5, "tag": "r"}, {"x": float("nan"), "err": 0.1}]
    parsed = list(csv.reader(to_csv(rows).splitlines()))
    assert parsed[0] == ["x", "tag", "err"]
    assert parsed[2] == ["nan", "", "0.1"]


def test_output_set_respects_formats(tmp_path):
    out = OutputSet(("csv",))
    out.csv("a.csv", [{"x": 1}])
    out.json("a.json", {})
    out.svg("a.svg", [])
    assert [p.name for p in out.write(tmp_path)] == ["a.csv"]


# -- configuration ------------------------------------------------------------------


@pytest.mark.parametrize("doc", [
    [], {"flows": {}}, {"solver": {"n": 33}}, {"solver": {"grid": 64}}, {"experiment": {"colour": 1}},
    {"experiment": {"eps_list": [0.1, -0.1]}}, {"experiment": {"n_angles": 5}},
    {"experiment": {"p_list": [[1.0]]}}, {"experiment": {"p_list": {"random": 0}}},
    {"output": {"formats": ["png"]}}, {"flow": {"builtin": "cats_eye", "delta": 2.0}},
])
def test_build_config_rejects(doc, tmp_path):
    with pytest.raises(ConfigError):
        build_config(doc, out_dir=str(tmp_path))


def test_seeded_p_list():
    a = parse_p_list({"random": 5, "r_min": 0.5, "r_max": 1.0}, seed=3)
    assert a == parse_p_list({"random": 5, "r_min": 0.5, "r_max": 1.0}, seed=3)
    assert a != parse_p_list({"random": 5, "r_min": 0.5, "r_max": 1.0}, seed=4)
    assert all(0.5 <= np.hypot(*p) <= 1.0 for p in a)


# -- command line --------------------------------------------------------------------


@pytest.mark.parametrize("kind", ["euclidean", "ell1"])
def test_front_golden_files(tmp_path, kind):
    doc = json.loads((GOLDEN / f"front_{kind}.json").read_text())
    code, out = run(tmp_path, doc, "front")
    assert code == EXIT_OK
    assert (out / "plots" / "front.svg").read_bytes() == (GOLDEN / f"front_{kind}.svg").read_bytes()
    got = list(csv.reader((out / "results.csv").read_text().splitlines()))
    want = list(csv.reader((GOLDEN / f"front_{kind}.csv").read_text().splitlines()))
    assert got[0] == want[0] and len(got) == len(want)
    for g, w in zip(got[1:], want[1:]):
        assert g[3] == w[3]
        assert np.allclose([float(v) for v in g[:3]], [float(v) for v in w[:3]], atol=1e-12)


def test_config_error_exit_code_and_no_files(tmp_path, capsys):
    code, out = run(tmp_path, {"solver": {"n": 31}}, "hbar")
    assert code == EXIT_CONFIG and not out.exists()
    assert "config error" in capsys.readouterr().err
    bad = tmp_path / "broken.json"
    bad.write_text("{not json")
    assert main(["alpha", "--config", str(bad), "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert main(["alpha", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG


def test_unwritable_output_dir(tmp_path):
    locked = tmp_path / "locked"
    locked.mkdir()
    locked.chmod(0o500)
    try:
        if os.access(locked, os.W_OK):
            pytest.skip("running with privileges that ignore directory permissions")
        code, _ = run(tmp_path, {"experiment": {"p_list": [[1, 0]]}}, "hbar", "--out", str(locked / "sub"))
        assert code == EXIT_CONFIG
    finally:
        locked.chmod(0o700)


def test_nonconvergence_exit_code_and_no_files(tmp_path, capsys):
    doc = {"flow": {"builtin": "cellular"},
           "solver": {"n": 32, "method": "time_marching", "t_max": 0.01, "richardson": False},
           "experiment": {"curve": "hbar", "c": 1.0, "n_angles": 16}}
    code, out = run(tmp_path, doc, "level-curve")
    assert code == EXIT_NONCONVERGENCE and not out.exists()
    assert "best estimate" in capsys.readouterr().err


def test_hbar_rows_record_failures_without_aborting(tmp_path):
    doc = {"flow": {"builtin": "cellular"},
           "solver": {"n": 32, "method": "time_marching", "t_max": 0.01, "richardson": False},
           "experiment": {"p_list": [[0.0, 0.0], [1.0, 0.5]]}}
    code, out = run(tmp_path, doc, "hbar")
    assert code == EXIT_OK
    rows = json.loads((out / "results.json").read_text())["rows"]
    assert rows[1]["status"].startswith("nonconvergence")


def test_hbar_shear_comparison_columns(tmp_path):
    doc = {"flow": {"builtin": "shear_sin"}, "solver": {"n": 32},
           "experiment": {"p_list": [[1.0, 0.0], [0.5, 1.0]]}}
    code, out = run(tmp_path, doc, "hbar")
    assert code == EXIT_OK
    header = (out / "results.csv").read_text().splitlines()[0].split(",")
    for col in ("value", "error_estimate", "oracle_value", "time_marching_value", "discounted_rel_diff", "status"):
        assert col in header


def test_threads_and_reruns_are_byte_identical(tmp_path):
    doc = {"flow": {"builtin": "cats_eye", "delta": 0.3}, "solver": {"n": 32},
           "experiment": {"p_list": {"random": 6, "r_min": 0.3, "r_max": 1.5}}}
    _, a = run(tmp_path, doc, "hbar", "--threads", "1", "--seed", "7", name="a")
    _, b = run(tmp_path, doc, "hbar", "--threads", "3", "--seed", "7", name="b")
    _, c = run(tmp_path, doc, "hbar", "--threads", "1", "--seed", "7", name="c")
    assert tree(a) == tree(b) == tree(c)
    _, d = run(tmp_path, doc, "hbar", "--seed", "8", name="d")
    assert tree(a) != tree(d)


def test_alpha_and_perturb_commands(tmp_path):
    code, out = run(tmp_path, {"flow": {"builtin": "shear_sin"}, "solver": {"method": "auto"},
                               "experiment": {"p_list": [[0.0, 1.0]]}}, "alpha", name="alpha")
    assert code == EXIT_OK
    row = json.loads((out / "results.json").read_text())["rows"][0]
    assert row["alpha"] == pytest.approx(2.0, rel=1e-6) and row["status"] == "ok"
    code, out = run(tmp_path, {"flow": {"builtin": "shear_sin"}, "experiment": {"p_list": [[1, 1], [1, 0]]}},
                    "perturb", name="perturb")
    assert code == EXIT_OK
    rows = json.loads((out / "results.json").read_text())["rows"]
    assert rows[0]["a2"] == pytest.approx(0.125, abs=1e-12)
    assert rows[1]["status"].startswith("ResonanceError")


def test_flat_pieces_command(tmp_path):
    code, out = run(tmp_path, {"flow": {"builtin": "shear_sin"}, "solver": {"method": "auto"}}, "flat-pieces")
    assert code == EXIT_OK
    doc = json.loads((out / "results.json").read_text())
    assert len(doc["flat_families"]) == 1
    assert (out / "plots" / "flat_pieces.svg").exists()


def test_experiment_shear_and_cellular(tmp_path):
    code, out = run(tmp_path, {"solver": {"n": 32}, "experiment": {"p_list": [[1.0, 0.2]]}},
                    "experiment shear", name="shear")
    assert code == EXIT_OK
    doc = json.loads((out / "results.json").read_text())
    assert doc["flat_arcs"] and all(a["inside_plateau"] for a in doc["flat_arcs"])
    code, out = run(tmp_path, {"solver": {"n": 32}, "experiment": {"p2_max": 0.04, "p2_step": 0.02}},
                    "experiment cellular", name="cellular")
    assert code == EXIT_OK
    assert "window_width" in json.loads((out / "results.json").read_text())["summary"]


def test_experiment_strong_flow_without_curves(tmp_path):
    doc = {"solver": {"n": 32, "alpha_rel_tol": 1e-3}, "experiment": {"A_list": [1.0, 2.0], "n_angles": 0}}
    code, out = run(tmp_path, doc, "experiment strong-flow")
    assert code == EXIT_OK
    res = json.loads((out / "results.json").read_text())
    assert "lambda_over_A_strictly_decreasing" in res["trends"]


def test_console_script_help():
    proc = subprocess.run([sys.executable, "-m", "flamehj.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for cmd in ("hbar", "alpha", "level-curve", "flat-pieces", "perturb", "front", "experiment"):
        assert cmd in proc.stdout

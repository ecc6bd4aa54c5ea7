import copy
import json

import numpy as np
import pytest

from isene import cli
from isene.config import SchemaViolation, example_config, example_config_text, parse_config
from isene.io import fmt, read_csv

BASE = json.loads(example_config_text())


def write_config(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def pointers(doc):
    with pytest.raises(SchemaViolation) as info:
        parse_config(doc)
    return {p for p, _ in info.value.errors}


def test_example_config_is_valid():
    cfg = example_config()
    assert cfg.n == 3
    assert cfg.task == "check"
    assert cfg.section("solver")["tol"] == 1e-12
    assert cfg.circuit().vertical_inductances == (5.0, 5.0, 5.0)
    assert cfg.target_f0 == 9.0
    assert cfg.length_bounds == pytest.approx((1e-5, 3.3e-3))
    assert len(cfg.digest()) == 64


def test_schema_pointers():
    doc = copy.deepcopy(BASE)
    doc["circuit"]["L_vertical_nH"] = -1
    doc["circuit"]["colour"] = "blue"
    doc["solver"] = {"tol": "small"}
    doc["spectrum"]["flux_loop"] = 4
    assert pointers(doc) == {"/circuit/L_vertical_nH", "/circuit/colour", "/solver/tol", "/spectrum/flux_loop"}


def test_length_mismatch_pointers():
    doc = copy.deepcopy(BASE)
    doc["circuit"]["E0_GHz"] = [0.4, 0.4]
    doc["circuit"]["flux_rad"] = [0.0]
    doc["line"]["length_bounds_mm"] = [3.0, 1.0]
    assert pointers(doc) == {"/circuit/E0_GHz", "/circuit/flux_rad", "/line/length_bounds_mm"}


def test_unparseable_documents():
    assert pointers("{not json") == {""}
    assert pointers(b"\xff\xfe") == {""}
    assert pointers({"task": "check"}) == {""}


def test_fmt_is_round_trip():
    x = 0.1 + 0.2
    assert float(fmt(x)) == x
    assert fmt(np.nan) == "nan"
    assert fmt(3) == "3"


def run_cli(tmp_path, task, doc, *extra):
    out = tmp_path / f"out_{task}"
    code = cli.main([task, "--config", str(write_config(tmp_path, doc)), "--out", str(out), *extra])
    return code, out


def test_exit_code_config_errors(tmp_path, capsys):
    assert cli.main(["check", "--config", str(tmp_path / "missing.json")]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "ConfigUnreadable"
    doc = copy.deepcopy(BASE)
    doc["circuit"]["bogus"] = 1
    code, out = run_cli(tmp_path, "check", doc)
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert err["violations"][0]["pointer"] == "/circuit/bogus"


def test_exit_code_numeric_error(tmp_path, capsys):
    doc = copy.deepcopy(BASE)
    doc["circuit"]["flux_rad"] = [0.1, 0.0, 0.0]
    code, out = run_cli(tmp_path, "extract", doc)
    assert code == 3
    assert json.loads((out / "error.json").read_text())["error"] == "ExtractionError"
    capsys.readouterr()


def test_solve_and_check(tmp_path, capsys):
    code, out = run_cli(tmp_path, "solve", BASE)
    assert code == 0
    header, rows = read_csv(out / "equilibrium.csv")
    assert header[0] == "config_index" and len(rows) == 8
    man = json.loads((out / "manifest.json").read_text())
    assert set(man["outputs"]) == {"equilibrium.csv"}
    assert man["config"]["solver"]["tol"] == 1e-12
    code, out = run_cli(tmp_path, "check", BASE)
    assert code == 0
    rep = json.loads((out / "check.json").read_text())
    assert rep["kramers_nulls_hold"]
    assert rep["max_kramers_splitting_GHz"] < 1e-9
    assert rep["x_commutator_max"] < 1e-12
    capsys.readouterr()


def test_scan_two_by_two(tmp_path, capsys):
    doc = copy.deepcopy(BASE)
    doc["scan"] = {"L_vertical_nH": [2.0, 3.0], "L_coupling_nH": [5.0, 10.0], "outputs": ["J", "chi"]}
    code, out = run_cli(tmp_path, "scan", doc, "--threads", "1")
    assert code == 0
    header, rows = read_csv(out / "scan_J12.csv")
    assert len(rows) == 4
    summary = json.loads((out / "scan_summary.json").read_text())
    assert summary["failures"] == []
    capsys.readouterr()


def test_gates_task(tmp_path, capsys):
    code, out = run_cli(tmp_path, "gates", BASE)
    assert code == 0
    g = json.loads((out / "gates.json").read_text())
    assert g["rz_theta_rad"] == pytest.approx(-g["rz_theta_negated_flux_rad"], rel=1e-9)
    assert g["rzz_theta_rad"] == pytest.approx(g["rzz_closed_form_rad"], rel=1e-12)
    assert g["rzz_theta_64_state_rad"] == pytest.approx(g["rzz_closed_form_rad"], abs=1e-9)
    capsys.readouterr()


def test_spectrum_task(tmp_path, capsys):
    doc = copy.deepcopy(BASE)
    doc["spectrum"]["points"] = 9
    code, out = run_cli(tmp_path, "spectrum", doc)
    assert code == 0
    header, rows = read_csv(out / "spectrum.csv")
    assert len(rows) == 9 and len(header) == 9
    capsys.readouterr()

import csv
import json
import subprocess
import sys

import pytest

from svfix.cli import CSV_HEADER, main, run_scenario
from svfix.scenario import builtin, dumps_scenario, emit_scenario, parse_scenario


def run(argv, tmp_path):
    out = tmp_path / "r.json"
    code = main(list(argv) + ["--report", str(out)])
    return code, json.loads(out.read_text())


def test_solve_example1(tmp_path):
    code, rep = run(["solve", "--builtin", "example1"], tmp_path)
    assert code == 0
    assert rep["result"]["uniform"] and rep["result"]["xi"] == 0.00005


def test_verify_example2(tmp_path):
    code, rep = run(["verify", "--builtin", "example2", "--xi", "1", "--eta", "1.00005"], tmp_path)
    assert code == 0
    for c in rep["cells"]:
        assert c["d_pair"] == pytest.approx(0.00005, abs=1e-12)
        assert c["d_ball"] == pytest.approx(0.00005, abs=1e-12)
        assert c["d_inward"] == pytest.approx(0.00005, abs=1e-12)


def test_verify_failure_exit_2(tmp_path):
    code, rep = run(["verify", "--builtin", "example2", "--xi", "0.5", "--eta", "1.2"], tmp_path)
    assert code == 2 and rep["result"]["failing_cell"] == "cell[0]"


NEGATIVE = {
    "dimension": 1,
    "domain": [[0, 1]],
    "operator": {"pieces": [{"when": {"interval": [0, 1]}, "value": {"point": [0.5]}}], "diagonal": {"default": {"points": [2]}}},
    "omega": {"interval": [0, 1], "cells": 4},
}


def test_solve_no_fixed_point_exit_3(tmp_path):
    p = tmp_path / "neg.json"
    p.write_text(json.dumps(NEGATIVE))
    code, rep = run(["solve", "--scenario", str(p)], tmp_path)
    assert code == 3 and "F(ω) empty" in rep["result"]["error"]


def test_invalid_scenario_exit_4_with_pointer(tmp_path, capsys):
    bad = json.loads(json.dumps(NEGATIVE))
    bad["operator"]["pieces"][0]["value"] = {"point": ["x"]}
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(bad))
    assert main(["solve", "--scenario", str(p)]) == 4
    assert "operator.pieces[0].value" in capsys.readouterr().err


def test_unknown_builtin_exit_4(capsys):
    assert main(["solve", "--builtin", "nope"]) == 4
    assert "--builtin" in capsys.readouterr().err


def test_broken_json_exit_4(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    assert main(["certify", "--scenario", str(p)]) == 4


def test_csv_export(tmp_path):
    out = tmp_path / "cells.csv"
    code = main(["verify", "--builtin", "example1", "--xi", "0.00005", "--csv", str(out), "--report", str(tmp_path / "r.json")])
    assert code == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == CSV_HEADER
    assert len(rows) == 68
    assert all(float(r[4]) == 0.0 for r in rows[1:])


def test_report_deterministic(tmp_path):
    a, _ = run_scenario("solve", builtin("example2"))
    b, _ = run_scenario("solve", builtin("example2"))
    assert a.to_json(timings=False) == b.to_json(timings=False)
    assert "timings" in json.loads(a.to_json())


def test_all_commands_dispatch(tmp_path):
    s = builtin("example1").with_cells(4)
    for cmd, code in (("certify", 0), ("oracle", 0), ("homotopy", 0), ("approx", 0), ("boundary", 0)):
        rep, got = run_scenario(cmd, s.with_params(grid=513), {"xi": None})
        assert got == code, (cmd, rep.result)


def test_round_trip_builtins():
    for name in ("example1", "example2"):
        s = builtin(name)
        again = parse_scenario(json.loads(dumps_scenario(s)), name)
        assert emit_scenario(again) == emit_scenario(s)


def test_module_entry_point(tmp_path):
    r = subprocess.run(
        [sys.executable, "-m", "svfix", "verify", "--builtin", "example1", "--xi", "0.00005", "--no-timings"],
        capture_output=True,
        text=True,
    )
    assert r.returncode == 0
    assert json.loads(r.stdout)["verdict"] == "verified"

import csv
import json
import subprocess
import sys

import pytest

from stc_dmt.cli import parse_grid, run
from stc_dmt.exceptions import ValidationError


def _run(argv, capsys):
    code = run(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def _rows(text):
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    return list(csv.reader(lines))


def test_parse_grid():
    assert parse_grid("4:24:4") == [4, 8, 12, 16, 20, 24]
    assert parse_grid("10:22:2")[-1] == 22
    assert parse_grid("1,2.5,7") == [1, 2.5, 7]
    with pytest.raises(ValidationError):
        parse_grid("4:2:1")
    with pytest.raises(ValidationError):
        parse_grid("a:b:c")


def test_count(capsys):
    code, out, _ = _run(["count", "--field", "Q(zeta8)", "--radii", "4:24:4"], capsys)
    assert code == 0
    rows = _rows(out)
    assert rows[0] == ["R", "count"] and len(rows) == 7
    summary = json.loads(out.splitlines()[-1].split("# summary: ", 1)[1])
    assert abs(summary["k_hat"] - 4) < 0.2 and summary["c_hat"] > 0


def test_curves(capsys):
    code, out, _ = _run(["curves", "--n", "2", "--nr", "2", "--K", "2"], capsys)
    assert code == 0
    rows = _rows(out)
    joint = [r[1:] for r in rows if r[0] == "mac_joint"]
    per_user = [r[1:] for r in rows if r[0] == "mac_per_user"]
    assert joint == [["0", "4"], ["2", "0"]]
    assert per_user == [["0", "4"], ["1", "0"]]


def test_curves_hypothesis_violation(capsys):
    code, _, err = _run(["curves", "--n", "2", "--nr", "1", "--K", "2"], capsys)
    assert code == 1 and "n_r >= K" in err


def test_simulate_zero_trials(capsys):
    code, _, err = _run(["simulate", "--trials", "0"], capsys)
    assert code == 1 and "trials" in err


def test_unknown_flag(capsys):
    code, _, _ = _run(["count", "--nope"], capsys)
    assert code == 1


def test_missing_field_spec(capsys, tmp_path):
    code, _, err = _run(["units", "--field", str(tmp_path / "missing.json")], capsys)
    assert code == 1 and "unknown field" in err


def test_budget_exit_code(capsys):
    code, _, err = _run(["--budget", "100", "count", "--lattice", "alamouti", "--radii", "4:24:4"], capsys)
    assert code == 2 and "budget" in err


def test_budget_env(capsys, monkeypatch):
    monkeypatch.setenv("STC_DMT_BUDGET", "100")
    code, _, _ = _run(["zeta", "--radii", "10,20"], capsys)
    assert code == 2


def test_outputs_reproducible(tmp_path, capsys):
    args = ["simulate", "--trials", "3000", "--snr", "4:8:2", "--seed", "7"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["--out", str(a)] + args) == 0
    assert run(["--out", str(b)] + args) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    text = (tmp_path / "a.csv").read_text()
    assert text.startswith("# tool: \"stc-dmt\"\n# version:")
    assert "# master_seed: 7" in text and "\r" not in text
    doc = json.loads((tmp_path / "a.json").read_text())
    assert doc["header"]["master_seed"] == 7 and "slope" in doc["summary"]


def test_float_format(capsys):
    _, out, _ = _run(["bound", "--snr", "10:10:1"], capsys)
    value = _rows(out)[1][1]
    assert value == "%.17g" % float(value)


def test_all_subcommands_smoke(capsys, tmp_path):
    field_file = tmp_path / "f.json"
    from stc_dmt.numfield import catalog_field
    field_file.write_text(catalog_field("Q(i,sqrt5)").to_json())
    cases = [
        ["units", "--field", str(field_file), "--radii", "4,8,16"],
        ["zeta", "--radii", "3,5", "--s", "2"],
        ["elemsum", "--radii", "2,4,8"],
        ["bound"],
        ["pep", "--trials", "2000", "--snr", "0:4:2"],
        ["simulate", "--scheme", "field", "--trials", "2000", "--snr", "0:4:2"],
        ["simulate", "--scheme", "alamouti-spherical", "--trials", "2000", "--snr", "0:4:2"],
        ["mac", "--trials", "2000", "--snr", "0:4:2", "--workers", "2"],
    ]
    for argv in cases:
        code, out, err = _run(argv, capsys)
        assert code == 0, (argv, err)
        assert out.startswith("# tool:")


def test_check(capsys, tmp_path):
    code, out, _ = _run(["check", "--fuzz", "300"], capsys)
    assert code == 0
    rows = _rows(out)[1:]
    assert rows and all(r[1] == "true" for r in rows)


def test_check_fails_on_bad_spec(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n": 1, "mul_tensor": [[[1, 0], [0, 1]], [[0, 1], [1, 0]]],
                               "embeddings": [[[1, 0], [2, 0]]], "unit_generators": [], "id": "bad"}))
    code, out, _ = _run(["check", "--fuzz", "10", "--field-spec", str(bad)], capsys)
    assert code == 1
    assert any(r[0].endswith("bad.json") and r[1] == "false" for r in _rows(out)[1:])


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "stc_dmt", "curves", "--n", "1", "--nr", "1"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "upper_bound,0,1" in out.stdout

import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from qmeter.cli import SWEEP_COLUMNS, canonical_json, fmt, main
from qmeter.config import encode_matrix

SMALL = ["--grid-size", "32", "--probe-width", "2"]


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def grid_config(tmp_path, kind):
    return write(tmp_path, f"{kind}.json", {"model": {"kind": kind}, "state": {"kind": "gaussian", "width": 2.0}})


def luders_config(tmp_path):
    return write(tmp_path, "luders.json", {
        "model": {"kind": "instrument", "instrument": {"kind": "luders", "observable": "pauli_z"}},
        "a": "pauli_z",
        "b": "pauli_x",
        "state": {"kind": "matrix", "matrix": [[0.5, [0, -0.5]], [[0, 0.5], 0.5]]},
    })


def test_fmt_and_canonical_json():
    assert fmt(1 / 3) == "0.333333333333"
    assert fmt(True) == "yes" and fmt(None) == "-"
    text = canonical_json({"b": np.float64(0.1), "a": [np.bool_(True), np.int64(3)]})
    assert text == '{\n  "a": [\n    true,\n    3\n  ],\n  "b": 0.1\n}\n'


def test_analyze_noiseless_position_desk_scale(capsys, tmp_path):
    code, out, _ = run(capsys, "analyze", "--config", grid_config(tmp_path, "noiseless_position"), "--format", "json")
    doc = json.loads(out)
    assert code == 0
    assert doc["epsilon"] < 1e-10
    assert doc["relations"]["heisenberg"]["satisfied"] is False
    assert doc["relations"]["uvur"]["satisfied"] is True
    assert doc["violations"] == []


def test_analyze_von_neumann(capsys, tmp_path):
    code, out, _ = run(capsys, "analyze", "--config", grid_config(tmp_path, "von_neumann"), *SMALL, "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["relations"]["heisenberg"]["satisfied"] is True
    assert abs(doc["epsilon"] - 2.0) < 0.02


def test_analyze_luders_table(capsys, tmp_path):
    code, out, _ = run(capsys, "analyze", "--config", luders_config(tmp_path))
    assert code == 0
    line = next(l for l in out.splitlines() if l.startswith("precise "))
    lhs, rhs, _, satisfied = line.split()[1:]
    assert abs(float(lhs) - np.sqrt(2)) < 1e-11 and abs(float(rhs) - 1) < 1e-11 and satisfied == "yes"
    assert "violated theorems: none" in out


def test_analyze_json_is_byte_identical(capsys, tmp_path):
    cfg = luders_config(tmp_path)
    first = run(capsys, "analyze", "--config", cfg, "--format", "json")[1]
    second = run(capsys, "analyze", "--config", cfg, "--format", "json")[1]
    assert first == second
    assert first == canonical_json(json.loads(first))


def test_analyze_csv_header(capsys, tmp_path):
    code, out, _ = run(capsys, "analyze", "--config", luders_config(tmp_path), "--format", "csv")
    assert code == 0 and "\r" not in out
    rows = list(csv.reader(io.StringIO(out)))
    assert tuple(rows[0]) == SWEEP_COLUMNS and len(rows) == 2


def test_sweep_probe_width(capsys, tmp_path):
    cfg = grid_config(tmp_path, "von_neumann")
    code, out, _ = run(capsys, "sweep", "--config", cfg, "--grid-size", "32", "--param", "probe_width", "--values", "0.5", "1", "2")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 3
    assert list(rows[0]) == list(SWEEP_COLUMNS)
    eps = [float(r["epsilon"]) for r in rows]
    eta = [float(r["eta"]) for r in rows]
    assert eps == sorted(eps) and eta == sorted(eta, reverse=True)
    # a width-1 Gaussian is coarsely sampled on a unit-spacing grid
    assert abs(eps[1] - 1) < 0.1 and abs(eps[2] - 2) < 0.02


def test_sweep_single_value_noiseless_position(capsys, tmp_path):
    cfg = grid_config(tmp_path, "noiseless_position")
    code, out, _ = run(capsys, "sweep", "--config", cfg, "--grid-size", "32", "--param", "probe_width", "--values", "1.5")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 1 and float(rows[0]["epsilon"]) < 1e-10


def test_sweep_unknown_parameter(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--param", "nope", "--values", "1"])
    assert exc.value.code == 2


def test_verify_default_passes(capsys):
    code, out, _ = run(capsys, "verify", "--format", "json")
    results = json.loads(out)
    assert code == 0 and all(r["passed"] for r in results) and len(results) >= 20


def test_verify_vacuous_and_tampered(capsys):
    code, out, _ = run(capsys, "verify", "--count", "0")
    assert code == 0 and "FAIL" not in out
    code, out, _ = run(capsys, "verify", "--suite", "robertson", "--count", "5", "--tolerance", "-1")
    assert code == 1 and "FAIL" in out


def test_verify_is_deterministic(capsys):
    argv = ["verify", "--suite", "universal_relations", "--count", "20", "--seed", "5", "--format", "json"]
    assert run(capsys, *argv)[1] == run(capsys, *argv)[1]


def test_dilate_luders(capsys, tmp_path):
    cfg = write(tmp_path, "d.json", {"kind": "luders", "observable": "pauli_z"})
    code, out, _ = run(capsys, "dilate", "--config", cfg, "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["dim_probe"] == 2 and doc["residual"] <= 1e-9
    # the serialized model loads back as a custom model
    model_cfg = write(tmp_path, "m.json", {"model": doc["model"], "a": "pauli_z", "b": "pauli_x",
                                            "state": {"kind": "basis", "index": 0, "dim": 2}})
    code, out, _ = run(capsys, "analyze", "--config", model_cfg, "--format", "json")
    assert code == 0 and json.loads(out)["epsilon"] < 1e-9


def test_dilate_random_povm_and_identity_channel(capsys, tmp_path):
    cfg = write(tmp_path, "p.json", {"kind": "povm", "random": {"dim": 3}})
    code, out, _ = run(capsys, "dilate", "--config", cfg, "--format", "json")
    assert code == 0 and json.loads(out)["residual"] <= 1e-9
    cfg = write(tmp_path, "c.json", {"kind": "channel", "identity": 2})
    code, out, _ = run(capsys, "dilate", "--config", cfg, "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["dim_probe"] == 1 and doc["residual"] <= 1e-9


def test_exit_codes(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "analyze", "--config", str(bad))[0] == 2
    assert run(capsys, "analyze", "--config", write(tmp_path, "k.json", {"model": {"kind": "nope"}}))[0] == 2
    assert run(capsys, "dilate")[0] == 2
    not_unitary = {"model": {"kind": "custom", "unitary": encode_matrix(2 * np.eye(4)),
                             "probe_state": {"kind": "basis", "index": 0, "dim": 2}, "meter": "x"}}
    not_unitary["model"]["meter"] = [[1, 0], [0, -1]]
    not_unitary.update(a="pauli_z", b="pauli_x", state={"kind": "basis", "index": 0, "dim": 2})
    code, _, err = run(capsys, "analyze", "--config", write(tmp_path, "u.json", not_unitary))
    assert code == 3 and "unitary" in err


def test_out_writes_file(capsys, tmp_path):
    target = tmp_path / "report.json"
    code, out, _ = run(capsys, "analyze", "--config", luders_config(tmp_path), "--format", "json", "--out", str(target))
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["precise"] is True


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "qmeter.cli", "verify", "--count", "0"], capture_output=True, text=True)
    assert proc.returncode == 0 and "suites passed" in proc.stdout

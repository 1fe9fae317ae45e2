import json
import os
import subprocess
import sys

import numpy as np
import pytest

from spirallike import cli


def run(tmp_path, *argv, name="out"):
    out = str(tmp_path / name)
    code = cli.main([*argv, "--out", out])
    report = None
    path = os.path.join(out, "report.json")
    if os.path.exists(path):
        with open(path) as fh:
            report = json.load(fh)
    return code, report, out


def test_spiralcheck_pass(tmp_path):
    code, rep, out = run(tmp_path, "spiralcheck", "--builtin", "hartogs", "--samples", "1000", "--horizon", "20")
    assert code == 0
    assert rep["schema"] == "spiral-report/1" and rep["status"] == "pass"
    assert rep["result"]["verified"] is True
    assert {"data/violations.csv", "data/trajectories.csv", "plots/trajectories.svg"} <= set(rep["files"])
    assert open(os.path.join(out, "plots/trajectories.svg")).read().startswith("<svg")


def test_spiralcheck_finding(tmp_path):
    code, rep, _ = run(tmp_path, "spiralcheck", "--domain", "hartogs", "--field", '{"linear": {"n": 2, "entries": [[0, 1], [0, 0], [0, 0], [1, 0]]}}', "--samples", "50", "--horizon", "5")
    assert code == 2
    assert rep["status"] == "finding" and rep["result"]["violations"]


def test_refute_diag_rotation(tmp_path, capsys):
    code, rep, _ = run(tmp_path, "refute", "--matrix", "diag(i, 1)")
    assert code == 2
    cert = rep["result"]["certificate"]
    assert cert["case_label"] == "diagonal.b1!=0"
    assert cert["verified"] is True
    assert "b1" in capsys.readouterr().out
    assert "data/exit_path.csv" in rep["files"]


def test_refute_numeric_none(tmp_path):
    code, rep, _ = run(tmp_path, "refute", "--builtin", "hartogs", "--samples", "4")
    assert code == 0
    assert rep["result"]["certificate"] is None


def test_conditions(tmp_path):
    code, rep, _ = run(tmp_path, "conditions", "--matrix", "diag(-2,-3)", "--alpha", "2")
    assert code == 0
    assert rep["result"]["checks"]["decay_spectral"]["value"] == pytest.approx(1)
    code, rep, _ = run(tmp_path, "conditions", "--matrix", "diag(1,3)", name="o2")
    assert code == 2


def test_linearize_and_loewner(tmp_path):
    code, rep, _ = run(tmp_path, "linearize", "--builtin", "hartogs", "--alpha", "2", "--samples", "16")
    assert code == 0 and rep["result"]["DF0_defect"] <= 1e-6
    code, rep, _ = run(tmp_path, "loewner-verify", "--builtin", "hartogs", "--alpha", "2", "--samples", "4", name="o2")
    assert code == 0 and rep["result"]["pde_max"] <= 1e-5


def test_report_command(tmp_path):
    run(tmp_path, "conditions", "--matrix", "diag(-2,-3)", "--alpha", "2")
    assert cli.main(["report", "--out", str(tmp_path / "out")]) == 0
    assert cli.main(["report", "--out", str(tmp_path / "missing")]) == 1


def test_errors(tmp_path):
    assert run(tmp_path, "refute", "--matrix", "[[1, 1], [1, 1]]")[0] == 1
    assert run(tmp_path, "conditions")[0] == 1
    assert run(tmp_path, "spiralcheck", "--samples", "0")[0] == 1
    assert run(tmp_path, "spiralcheck", "--builtin", "nope")[0] == 1
    assert run(tmp_path, "conditions", "--matrix", "[[1, 2, 3]]")[0] == 1


@pytest.mark.parametrize(
    "argv",
    [
        ["spiralcheck", "--builtin", "hartogs", "--samples", "100", "--horizon", "5", "--seed", "3"],
        ["refute", "--matrix", "[[-1, 1], [0, -1]]"],
        ["linearize", "--builtin", "hartogs", "--alpha", "2", "--samples", "8"],
    ],
)
def test_byte_identical_reruns(tmp_path, argv):
    _, _, a = run(tmp_path, *argv, name="a")
    _, _, b = run(tmp_path, *argv, name="b")
    for root, _, files in os.walk(a):
        for f in files:
            pa = os.path.join(root, f)
            pb = os.path.join(b, os.path.relpath(pa, a))
            ta, tb = open(pa, "rb").read(), open(pb, "rb").read()
            if f == "report.json":
                ta = ta.replace(a.encode(), b"")
                tb = tb.replace(b.encode(), b"")
            assert ta == tb, f


def test_parse_matrix_forms(tmp_path):
    ref = np.diag([1j, 1])
    assert np.array_equal(cli.parse_matrix("diag(i, 1)"), ref)
    assert np.array_equal(cli.parse_matrix('[["i", 0], [0, 1]]'), ref)
    assert np.array_equal(cli.parse_matrix("[[[0, 1], 0], [0, 1]]"), ref)
    assert np.array_equal(cli.parse_matrix('{"n": 2, "entries": [[0, 1], [0, 0], [0, 0], [1, 0]]}'), ref)
    assert cli.parse_matrix('[["1-2i", "3"], ["-i", "0.5"]]')[0, 0] == 1 - 2j
    path = tmp_path / "m.json"
    path.write_text("[[1, 2], [3, 4]]")
    assert np.array_equal(cli.parse_matrix(str(path)), np.array([[1, 2], [3, 4]]))


def test_console_module_entry(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "spirallike", "conditions", "--matrix", "diag(-1,-1)", "--out", str(tmp_path / "o")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "spectral_gap: pass" in proc.stdout

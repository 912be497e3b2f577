import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from selftesting import chsh, cli
from selftesting import io as sio
from selftesting import models as md

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
IDEAL = str(FIXTURES / "ideal.json")
SOM = str(FIXTURES / "random_som.json")


def run(*argv, env=None):
    report, code, _ = cli.run_argv(list(argv), None if env is None else cli.default_tolerance(env))
    return json.loads(sio.dumps(report)), code


def test_chsh_score_fixture():
    rep, code = run("chsh", "score", IDEAL)
    assert code == 0
    assert rep["winProb"] == pytest.approx(0.5 + 1 / (2 * np.sqrt(2)), abs=1e-12)
    assert rep["bias"] == pytest.approx(2 * np.sqrt(2), abs=1e-12)
    assert "residuals" in rep


def test_chsh_selftest_and_extract():
    rep, code = run("chsh", "selftest", IDEAL)
    assert code == 0 and rep["verdict"] and rep["worst_residual"] <= 1e-12
    assert rep["robustness"] == "heuristic"
    rep, code = run("chsh", "extract-pvm", IDEAL)
    assert code == 0 and rep["model"]["alice"]["kind"] == "pvm"


def test_counterexample_command():
    rep, code = run("chsh", "counterexample")
    assert code == 0 and rep["obstruction_norm"] > 0.1


def test_clifford_commands():
    rep, code = run("clifford", "witness", "--n", "2")
    assert code == 0 and rep["kernelDim"] == 1
    assert run("clifford", "rep", "--n", "4")[1] == 0
    assert run("clifford", "correlation", "--n", "4")[1] == 0
    assert run("clifford", "ac-check", "--n", "4")[1] == 0
    rep, code = run("clifford", "ac-check", "--model", "independent")
    assert code == 1
    assert all(v == pytest.approx(0.125) for v in rep["residuals"].values())


def test_qcolor_commands():
    assert run("qcolor", "verify")[1] == 0
    rep, code = run("qcolor", "extract", "--k", "2", "--count", "3", "--seed", "4")
    assert code == 0 and rep["worst_residual"] <= 1e-7


def test_scenario_commands():
    assert run("scenario", "check", str(FIXTURES / "odd_cycle.json"))[1] == 0
    assert run("scenario", "check", str(FIXTURES / "chsh_ns.json"))[1] == 0


def test_schur_commands():
    rep, code = run("schur", "hypotheses")
    assert code == 0 and rep["extremalityRank"] == 16 and rep["marginallyCyclic"]
    rep, code = run("schur", "hypotheses", "--theta", str(np.pi / 2))
    assert code == 1 and rep["extremalityRank"] < 16
    assert run("schur", "build")[1] == 0
    rep, code = run("schur", "selftest", "--seed", "2")
    assert code == 0 and rep["worst_residual"] <= 1e-8


def test_som_commands():
    assert run("som", "validate", SOM)[1] == 0
    assert run("som", "factor", SOM)[1] == 0
    rep, code = run("som", "dilate", SOM)
    assert code == 0
    assert max(rep["residuals"].values()) <= 1e-9


def test_model_commands():
    for action in ("correlation", "support", "split"):
        rep, code = run("model", action, IDEAL)
        assert code == 0, rep


def test_dilate_verify(tmp_path):
    iso = tmp_path / "iso.json"
    iso.write_text(json.dumps({"v_a": sio.encode_complex(np.eye(2)), "v_b": sio.encode_complex(np.eye(2))}))
    rep, code = run("dilate", "verify", IDEAL, IDEAL, str(iso))
    assert code == 0 and rep["verdict"]
    iso.write_text(json.dumps({"v_a": sio.encode_complex(np.array([[0, 1], [1, 0]])), "v_b": sio.encode_complex(np.eye(2))}))
    rep, code = run("dilate", "verify", IDEAL, IDEAL, str(iso))
    assert code == 1 and not rep["verdict"]


def test_exit_code_contract(tmp_path):
    # pass
    assert run("chsh", "score", IDEAL)[1] == 0
    # fail: a valid but non-optimal model
    a0, a1, b0, b1 = chsh.ideal_observables()
    m = md.Model("tensor", (2, 2), md.pvm_from_observables([a0, a0]), md.pvm_from_observables([b0, b1]), chsh.ideal_model().state)
    weak = tmp_path / "weak.json"
    weak.write_text(sio.dumps(sio.model_to_json(m)))
    rep, code = run("chsh", "selftest", str(weak))
    assert code == 1 and rep["error"]["type"] == "NotOptimal"
    # input errors
    assert run("chsh", "score", str(tmp_path / "missing.json"))[1] == 2
    bad = tmp_path / "bad.json"
    doc = sio.model_to_json(chsh.ideal_model())
    doc["state"] = (0.99 * np.array(doc["state"])).tolist()
    bad.write_text(json.dumps(doc))
    rep, code = run("chsh", "score", str(bad))
    assert code == 2 and rep["error"]["residual"] == pytest.approx(0.01)
    del doc["alice"]
    bad.write_text(json.dumps(doc))
    rep, code = run("chsh", "score", str(bad))
    assert code == 2 and rep["error"]["path"] == "$.alice"
    assert run("nonsense")[1] == 2
    assert run("chsh", "score", IDEAL, "--tol", "-1")[1] == 2


def test_tolerance_precedence():
    rep, _ = run("clifford", "rep", env={"SELFTEST_TOL": "1e-6"})
    assert rep["tolerance"] == 1e-6
    rep, _ = run("clifford", "rep", "--tol", "1e-3", env={"SELFTEST_TOL": "1e-6"})
    assert rep["tolerance"] == 1e-3
    rep, _ = run("clifford", "rep", env={})
    assert rep["tolerance"] == 1e-9
    with pytest.raises(cli.InputError):
        cli.default_tolerance({"SELFTEST_TOL": "abc"})


def test_reports_deterministic_for_fixed_seed():
    a, _ = run("qcolor", "extract", "--k", "2", "--count", "2", "--seed", "9")
    b, _ = run("qcolor", "extract", "--k", "2", "--count", "2", "--seed", "9")
    a.pop("timing_s"), b.pop("timing_s")
    assert a == b


def test_batch(tmp_path):
    batch = tmp_path / "batch.json"
    batch.write_text(json.dumps([{"command": ["chsh", "score", IDEAL]}, {"command": ["clifford", "ac-check", "--model", "independent"]}]))
    rep, code = run("batch", str(batch))
    assert code == 1
    assert rep["exit_codes"] == [0, 1]
    assert [it["index"] for it in rep["items"]] == [0, 1]


def test_console_entry_point_writes_output(tmp_path):
    out = tmp_path / "report.json"
    proc = subprocess.run(
        [sys.executable, "-m", "selftesting.cli", "chsh", "score", IDEAL, "--output", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert json.loads(out.read_text())["verdict"] is True

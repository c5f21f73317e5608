import json

import numpy as np
import pytest

from sdymflow import cli
from sdymflow.adhm import ADHMData, OneInstantonParams, one_instanton_data


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr().out
    report = json.loads(out) if out.strip() else None
    return code, report


def test_verify_ok(capsys):
    code, rep = run(capsys, "verify", "--lambda", "1", "--n-samples", "50", "--n-lines", "5")
    assert code == 0
    assert rep["passed"]
    assert all(c["residual"] < 1e-10 for c in rep["results"]["checks"])


def test_verify_unsatisfiable_tol(capsys):
    code, rep = run(capsys, "verify", "--lambda", "1", "--tol", "1e-30",
                    "--n-samples", "10", "--n-lines", "2")
    assert code == 1
    assert not rep["passed"]


def test_verify_broken_data(capsys, tmp_path):
    data = one_instanton_data(OneInstantonParams(1.0))
    data.A[2][:, 0] = 0
    path = tmp_path / "broken.json"
    data.save(path)
    code, rep = run(capsys, "verify", "--adhm", str(path), "--n-samples", "5", "--n-lines", "0")
    assert code == 1
    failed = [c["name"] for c in rep["results"]["checks"] if not c["passed"]]
    assert "A_rank_k" in failed


def test_action_radial(capsys):
    code, rep = run(capsys, "action", "--lambda", "1")
    assert code == 0
    assert abs(rep["results"]["action"] - 78.9568) < 0.1
    assert rep["results"]["rel_err"] < 0.01


def test_action_translated(capsys):
    code, rep = run(capsys, "action", "--lambda", "2", "--center", "1+0i,0+0i")
    assert code == 0
    assert rep["results"]["rel_err"] < 0.01


def test_split_reports_residuals(capsys):
    code, rep = run(capsys, "split", "--lambda", "1", "--point", "0.5,0.2,-0.3,0.1")
    assert code == 0
    assert rep["results"]["reconstruction_residual"] < 1e-10
    assert rep["results"]["J_det_residual"] < 1e-10


def test_classify_verdicts(capsys):
    code, rep = run(capsys, "classify", "--family", "scaling:lam0=1,k=1")
    assert code == 0
    assert rep["results"]["verdict"] == "Scaling"
    assert abs(rep["results"]["flow_k"] - 1.0) < 1e-8

    code, rep = run(capsys, "classify", "--family", "affine:dalpha=1")
    assert code == 0
    assert rep["results"] == {
        "verdict": "NotInduced",
        "witness": "cJ",
        "variation": rep["results"]["variation"],
    }

    code, rep = run(capsys, "classify", "--family", "remark45")
    assert code == 0
    assert rep["results"]["verdict"] == "NotInduced"


def test_classify_malformed_family(capsys):
    code, _ = run(capsys, "classify", "--family", "nonsense:foo=1")
    assert code == 2


def test_build_writes_data(capsys, tmp_path):
    code, rep = run(capsys, "build", "--lambda", "1.5", "--center", "0.2+0.1i,-0.3+0i",
                    "--out", str(tmp_path))
    assert code == 0
    data = ADHMData.load(tmp_path / "adhm.json")
    assert data.k == 1
    assert (tmp_path / "build.json").exists()


def test_flow_constant_T_zero(capsys, tmp_path):
    from sdymflow.symmetry import TwistorPoly

    tpath = tmp_path / "T0.json"
    TwistorPoly([]).save(tpath)
    code, rep = run(capsys, "flow", "--T", str(tpath), "--lambda", "1",
                    "--rows", "2", "--t-end", "0.5", "--grid=-1,1,5",
                    "--out", str(tmp_path))
    assert code == 0
    rows = rep["results"]["rows"]
    assert len(rows) == 2
    assert abs(rows[0]["lambda_eff"] - rows[1]["lambda_eff"]) < 1e-6
    assert (tmp_path / "flow.csv").exists()


def test_flow_requires_spec(capsys):
    code, _ = run(capsys, "flow", "--lambda", "1")
    assert code == 2


def test_report_determinism(capsys):
    _, rep1 = run(capsys, "verify", "--lambda", "1", "--n-samples", "10", "--n-lines", "2")
    _, rep2 = run(capsys, "verify", "--lambda", "1", "--n-samples", "10", "--n-lines", "2")
    rep1.pop("runtime_s")
    rep2.pop("runtime_s")
    assert rep1 == rep2


def test_flowed_family_field_scale():
    fam = cli._parse_family("scaling:lam0=1,k=1")
    field = cli.flowed_family_field(fam, 0.75)
    from sdymflow.gauge import effective_scale
    from sdymflow.geometry import R4Point

    lam = effective_scale(field, R4Point(0, 0, 0, 0))
    assert abs(lam - 2.0) < 1e-6

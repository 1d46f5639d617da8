import csv
import json
import subprocess
import sys

import pytest

from pointer_anneal import collision
from pointer_anneal.cli import eval_fraction, main, manifest_path, read_threshold_csv
from pointer_anneal.model import SimParams


def _lambda_hat(out: str) -> float:
    line = next(x for x in out.splitlines() if x.startswith("lambda_hat="))
    return float(line.split()[0].split("=")[1])


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_eval_fraction():
    assert eval_fraction("1/4") == 0.25
    assert eval_fraction(" 0.5 ") == 0.5
    with pytest.raises(ValueError):
        eval_fraction("a/b")


def test_simulate_example(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    fig = tmp_path / "traj.png"
    code = main(["simulate", "--epsilon", "0.25", "--n", "256", "--samples", "8",
                 "--out", str(out), "--figure", str(fig)])
    assert code == 0
    line = capsys.readouterr().out.strip().splitlines()[-1]
    assert line.startswith("final_p1=") and " fidelity=" in line
    assert float(line.split()[0].split("=")[1]) >= 0.9
    rows = _read(out)
    assert rows[0] == ["t", "p0", "p1", "re01", "im01"]
    assert len(rows) == 10
    assert fig.stat().st_size > 0
    manifest = json.loads(manifest_path(out).read_text())
    assert set(manifest["outputs"]) == {str(out), str(fig)}
    for key in ("params", "engine_version", "integrator", "started", "finished", "summary", "seed"):
        assert key in manifest


def test_manifest_round_trip_bit_identical(tmp_path):
    out = tmp_path / "a.csv"
    assert main(["simulate", "--epsilon", "1/3", "--n", "37", "--h", "0.7", "--case", "psi",
                 "--samples", "4", "--out", str(out)]) == 0
    manifest = json.loads(manifest_path(out).read_text())
    res = collision.run(SimParams.from_dict(manifest["params"]))
    assert res.final_p1 == manifest["summary"]["final_p1"]
    assert res.final_p0 == manifest["summary"]["final_p0"]
    assert res.fidelity == manifest["summary"]["fidelity"]


def test_simulate_csv_full_precision(tmp_path):
    out = tmp_path / "a.csv"
    main(["simulate", "--epsilon", "0.5", "--n", "8", "--samples", "4", "--out", str(out)])
    rows = _read(out)[1:]
    res = collision.run(SimParams(0.5, 8), sample_times=[0, 2.5, 5, 7.5, 10])
    assert float(rows[-1][2]) == float(res.rhos[-1][1, 1].real)


def test_simulate_json_and_dense(tmp_path, capsys):
    out = tmp_path / "a.json"
    assert main(["simulate", "--epsilon", "0.5", "--n", "2", "--engine", "dense", "--samples", "4",
                 "--format", "json", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["columns"] == ["t", "p0", "p1", "re01", "im01"]
    assert len(data["rows"]) == 5
    assert json.loads(manifest_path(out).read_text())["integrator"]["method"] == "rk4"


@pytest.mark.parametrize("argv,code", [
    (["simulate", "--epsilon", "0", "--n", "4"], 2),
    (["simulate", "--epsilon", "0.5", "--n", "0"], 2),
    (["simulate", "--epsilon", "0.5"], 2),
    (["simulate", "--epsilon", "0.5", "--n", "20", "--engine", "dense"], 4),
    (["verify", "--epsilon", "0.5", "--n", "17"], 4),
    (["fit", "--input", "missing.csv"], 2),
    (["bogus"], 2),
])
def test_error_exit_codes(argv, code, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == code


def test_convergence_failure_exit_code(monkeypatch, tmp_path):
    from pointer_anneal import experiments
    from pointer_anneal.model import ConvergenceError

    def boom(*a, **k):
        raise ConvergenceError("forced")

    monkeypatch.setattr(experiments, "simulate", boom)
    monkeypatch.chdir(tmp_path)
    assert main(["simulate", "--epsilon", "0.5", "--n", "4"]) == 3


def test_verify_examples(tmp_path, capsys):
    assert main(["verify", "--epsilon", "0.5", "--n", "4"]) == 0
    assert "PASS" in capsys.readouterr().out
    report = tmp_path / "v.json"
    assert main(["verify", "--epsilon", "1", "--n", "2", "--out", str(report), "--seed", "5"]) == 0
    data = json.loads(report.read_text())
    assert data["fidelity"] == pytest.approx(1.0, abs=1e-9)
    assert json.loads(manifest_path(report).read_text())["seed"] == 5
    assert main(["verify", "--epsilon", "0.5", "--n", "8", "--tol", "1e-15"]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_threshold_p1(tmp_path, capsys):
    out, fig = tmp_path / "thr.csv", tmp_path / "thr.png"
    assert main(["threshold", "--epsilon-list", "0.5,0.25,0.125", "--target", "0.9", "--quantity", "p1",
                 "--workers", "1", "--out", str(out), "--figure", str(fig)]) == 0
    assert 8 <= _lambda_hat(capsys.readouterr().out) <= 32
    rows = _read(out)
    assert rows[0] == ["epsilon", "n_min", "value_at_n_min"]
    assert [r[1] for r in rows[1:]] == ["64", "256", "1024"]
    assert fig.stat().st_size > 0
    manifest = json.loads(manifest_path(out).read_text())
    assert manifest["probes"]["0.5"]["64"] >= 0.9


def test_threshold_not_found_is_empty_field(tmp_path, capsys):
    out = tmp_path / "thr.csv"
    assert main(["threshold", "--epsilon-list", "1/8", "--n-cap", "8", "--workers", "1", "--out", str(out)]) == 0
    assert _read(out)[1] == ["0.125", "", ""]
    assert read_threshold_csv(out) == []


def test_threshold_fidelity_measured(capsys):
    assert main(["threshold", "--epsilon-list", "0.5,0.25,0.125", "--quantity", "fidelity", "--workers", "1"]) == 0
    assert _lambda_hat(capsys.readouterr().out) == pytest.approx((64 * 128 * 128) ** (1 / 3), rel=1e-12)


@pytest.mark.xfail(strict=True, reason="measured fidelity thresholds give lambda_hat near 102")
def test_threshold_fidelity_reference(capsys):
    main(["threshold", "--epsilon-list", "0.5,0.25,0.125", "--quantity", "fidelity", "--workers", "1"])
    assert 16 <= _lambda_hat(capsys.readouterr().out) <= 64


def test_fit_synthetic(tmp_path, capsys):
    src = tmp_path / "pts.csv"
    src.write_text("epsilon,n_min,value_at_n_min\n0.5,64,0.91\n0.25,256,0.92\n0.125,,\n")
    assert main(["fit", "--input", str(src)]) == 0
    out = capsys.readouterr().out
    assert _lambda_hat(out) == pytest.approx(16.0, rel=1e-12)
    assert "points=2" in out


def test_sweep_and_adiabatic(tmp_path, capsys):
    out, fig = tmp_path / "sw.csv", tmp_path / "sw.png"
    assert main(["sweep", "--epsilon-list", "1/4,1/2", "--n-list", "8,2", "--workers", "1",
                 "--out", str(out), "--figure", str(fig)]) == 0
    rows = _read(out)
    assert rows[0] == ["epsilon", "n", "final_p1", "final_p0", "fidelity"]
    assert [(r[0], r[1]) for r in rows[1:]] == [("0.25", "2"), ("0.25", "8"), ("0.5", "2"), ("0.5", "8")]
    assert fig.exists()

    ad, adfig = tmp_path / "ad.csv", tmp_path / "ad.png"
    assert main(["adiabatic", "--samples", "10", "--out", str(ad), "--figure", str(adfig)]) == 0
    rows = _read(ad)
    assert rows[0] == ["t", "metric", "gap"] and len(rows) == 12
    assert float(rows[1][1]) == pytest.approx(0.05, abs=1e-12)
    assert adfig.exists()


def test_stdout_csv_without_out(capsys):
    assert main(["adiabatic", "--samples", "2"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "t,metric,gap"


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "pointer_anneal", "simulate", "--epsilon", "0", "--n", "4"],
                          cwd=tmp_path, capture_output=True, text=True)
    assert proc.returncode == 2
    assert "epsilon" in proc.stderr

import json
import math
import subprocess
import sys

import jsonschema
import numpy as np
import pytest
from numpy.testing import assert_allclose

from schatten_lab import cli
from schatten_lab.errors import ConvergenceError
from schatten_lab.sampling import parse_matrix
from schatten_lab.schemas import SCHEMAS
from schatten_lab.spectral import EmpiricalMeasure, schatten_norm


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    monkeypatch.delenv("SCHATTEN_LAB_SEED", raising=False)
    monkeypatch.delenv("SOURCE_DATE_EPOCH", raising=False)


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv)
    assert code == 0
    return json.loads(out)


# ---- volume

def test_volume_examples(capsys):
    doc = run_json(capsys, "volume", "--m", 1, "--n", 1, "--beta", 1)
    jsonschema.validate(doc, SCHEMAS["volume"])
    assert_allclose(doc["volume_if_representable"], 2.0)
    doc = run_json(capsys, "volume", "--m", 2, "--n", 2, "--beta", 1)
    assert_allclose(doc["log_volume"], math.log(2 * math.pi ** 2 / 3))
    scaled = run_json(capsys, "volume", "--m", 2, "--n", 2, "--beta", 1, "--scaled", "1,3")
    assert_allclose(scaled["log_volume"], doc["log_volume"] + 2 * math.log(3))


def test_volume_p2_and_asymptotic(capsys):
    doc = run_json(capsys, "volume", "--m", 3, "--n", 3, "--p", 2, "--asymptotic")
    jsonschema.validate(doc, SCHEMAS["volume"])
    # Frobenius ball in R^9
    assert_allclose(doc["log_volume"], 4.5 * math.log(math.pi) - math.lgamma(5.5))
    assert "asymptotic_radius" in doc


def test_volume_huge_dimension_reports_null(capsys):
    doc = run_json(capsys, "volume", "--m", 300, "--n", 300)
    assert doc["volume_if_representable"] is None
    assert math.isfinite(doc["log_volume"])


@pytest.mark.parametrize("argv", [
    ["volume", "--m", 3, "--n", 2],
    ["volume", "--m", 2, "--n", 2, "--p", 3],
    ["volume", "--m", 2, "--n", 2, "--scaled", "1"],
    ["volume", "--m", 2, "--n", 2, "--beta", 4],
    ["volume", "--m", 2, "--n", 2, "--p", "-1"],
    ["density", "--family", "bogus", "--c", 0.5],
    ["density", "--family", "nu_c2", "--c", 2],
    ["frobnicate"],
])
def test_usage_errors_exit_2(capsys, argv):
    code, _, _ = run(capsys, *argv)
    assert code == 2


# ---- sample and spectrum

def test_sample_ball_files(capsys, tmp_path):
    out = tmp_path / "s"
    code, _, _ = run(capsys, "sample", "--m", 2, "--n", 3, "--beta", 1, "--p", "inf", "--mode", "ball",
                     "--count", 10, "--seed", 7, "--out", out)
    assert code == 0
    files = sorted(out.glob("sample_*.txt"))
    assert len(files) == 10
    for f in files:
        x = parse_matrix(f.read_text())
        assert x.seed == 7
        assert schatten_norm(x, math.inf) <= 1 + 1e-12
    manifest = json.loads((out / "manifest.json").read_text())
    jsonschema.validate(manifest, SCHEMAS["manifest"])
    assert manifest["seed"] == 7 and manifest["timestamp"] is None


def test_sample_cone_p2(capsys, tmp_path):
    out = tmp_path / "c"
    code, _, _ = run(capsys, "sample", "--m", 2, "--n", 3, "--beta", 2, "--p", 2, "--mode", "cone",
                     "--count", 5, "--seed", 3, "--mcmc-burnin", 200, "--mcmc-thin", 2, "--out", out)
    assert code == 0
    for f in out.glob("sample_*.txt"):
        assert_allclose(schatten_norm(parse_matrix(f.read_text()), 2), 1.0, atol=1e-10)


def test_sample_same_seed_byte_identical(capsys, tmp_path):
    dirs = []
    for run_dir in ("a", "b"):
        d = tmp_path / run_dir
        (d).mkdir()
        argv = ["sample", "--m", 2, "--n", 4, "--mode", "stiefel", "--count", 3, "--seed", 11, "--out", "out"]
        with pytest.MonkeyPatch.context() as mp:
            mp.chdir(d)
            assert run(capsys, *argv)[0] == 0
        dirs.append(d / "out")
    for f in sorted(dirs[0].iterdir()):
        assert f.read_bytes() == (dirs[1] / f.name).read_bytes()


def test_seed_from_environment(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("SCHATTEN_LAB_SEED", "42")
    run(capsys, "sample", "--m", 1, "--n", 2, "--out", tmp_path / "e")
    assert json.loads((tmp_path / "e" / "manifest.json").read_text())["seed"] == 42
    monkeypatch.setenv("SCHATTEN_LAB_SEED", "abc")
    assert run(capsys, "sample", "--m", 1, "--n", 2, "--out", tmp_path / "f")[0] == 2


def test_spectrum_of_dump(capsys, tmp_path):
    run(capsys, "sample", "--m", 2, "--n", 3, "--count", 1, "--seed", 5, "--out", tmp_path / "s")
    dump = tmp_path / "s" / "sample_0000.txt"
    code, out, err = run(capsys, "spectrum", "--input", dump)
    assert code == 0
    emp = EmpiricalMeasure.from_csv(out)
    s = np.linalg.svd(parse_matrix(dump.read_text()).entries, compute_uv=False)
    assert_allclose(np.sort(emp.locations), np.sort(s), rtol=1e-12)
    jsonschema.validate(json.loads(err), SCHEMAS["manifest"])
    code, out, _ = run(capsys, "spectrum", "--input", dump, "--p", 2, "--scaling", "m_pow")
    assert_allclose(np.sort(EmpiricalMeasure.from_csv(out).locations), np.sort(s) * math.sqrt(2), rtol=1e-12)
    assert run(capsys, "spectrum", "--input", tmp_path / "missing.txt")[0] == 2


# ---- density and equilibrium

def test_density_curves(capsys, tmp_path):
    code, out, _ = run(capsys, "density", "--family", "mu_c_inf", "--c", 0.5)
    rows = out.splitlines()
    assert rows[0] == "x,density" and len(rows) == 1001
    assert_allclose(float(rows[1].split(",")[0]), 1 / 3)
    target = tmp_path / "qc.csv"
    assert run(capsys, "density", "--family", "mu_c2", "--c", 1, "--points", 11, "--out", target)[0] == 0
    data = np.loadtxt(target, delimiter=",", skiprows=1)
    assert_allclose(data[:, 0], np.linspace(0, 2, 11))
    assert_allclose(data[:, 1], np.sqrt(4 - data[:, 0] ** 2) / math.pi, atol=1e-12)
    assert (tmp_path / "qc.csv.manifest.json").exists()


def test_equilibrium_json(capsys):
    doc = run_json(capsys, "equilibrium", "--c", 1, "--p", 2, "--grid", 200)
    jsonschema.validate(doc, SCHEMAS["equilibrium"])
    assert abs(doc["B"] - (-0.75 - math.log(2) / 2)) < 0.01
    assert doc["manifest"]["parameters"]["p"] == 2.0


def test_numerical_failure_exit_3(capsys, monkeypatch):
    def boom(_):
        raise ConvergenceError("no progress", 1.0, 5)

    monkeypatch.setattr(cli, "solve_equilibrium", boom)
    code, _, err = run(capsys, "equilibrium", "--c", 1, "--p", 2)
    assert code == 3 and "numerical failure" in err


# ---- checks

def test_check_lln_passes(capsys):
    code, out, _ = run(capsys, "check", "--name", "lln", "--c", 1, "--p", "inf", "--seed", 1)
    assert code == 0
    report = json.loads(out)
    jsonschema.validate(report, SCHEMAS["check"])
    assert report["passed"]


def test_check_failure_exit_1(capsys):
    code, out, _ = run(capsys, "check", "--name", "polar", "--law", "dependent", "--seed", 2)
    assert code == 1
    assert not json.loads(out)["passed"]


def test_check_output_file_with_manifest(capsys, tmp_path):
    target = tmp_path / "pmb.jsonl"
    code, _, _ = run(capsys, "check", "--name", "pmb", "--samples", 500, "--seed", 3, "--out", target)
    assert code in (0, 1)
    jsonschema.validate(json.loads(target.read_text()), SCHEMAS["check"])
    manifest = json.loads((tmp_path / "pmb.jsonl.manifest.json").read_text())
    assert manifest["parameters"]["samples"] == 500


# ---- manifests

def test_manifest_reproduces_output(capsys):
    first = run_json(capsys, "volume", "--m", 2, "--n", 5, "--beta", 2, "--asymptotic")
    params = first["manifest"]["parameters"]
    argv = [first["manifest"]["command"], "--m", params["m"], "--n", params["n"], "--beta", params["beta"],
            "--p", params["p"]]
    if params["asymptotic"]:
        argv.append("--asymptotic")
    assert run_json(capsys, *argv) == first


def test_timestamp_from_source_date_epoch(capsys, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
    doc = run_json(capsys, "volume", "--m", 1, "--n", 1)
    assert doc["manifest"]["timestamp"] == "1970-01-01T00:00:00+00:00"
    monkeypatch.delenv("SOURCE_DATE_EPOCH")
    doc = run_json(capsys, "--record-time", "volume", "--m", 1, "--n", 1)
    assert doc["manifest"]["timestamp"] is not None


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "schatten_lab", "volume", "--m", "1", "--n", "1"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["volume_if_representable"] == pytest.approx(2.0)

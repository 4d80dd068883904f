import json
import subprocess
import sys

import numpy as np
import pytest

from unimodal_spath.cli import load_config, main, read_observations
from unimodal_spath.cli import CliError


def run_cli(*args, cwd=None, env=None):
    """Run the installed module in a fresh process (files are the only coupling)."""
    return subprocess.run(
        [sys.executable, "-m", "unimodal_spath", *map(str, args)], capture_output=True, text=True, cwd=cwd, env=env
    )


@pytest.fixture
def tiny(tmp_path):
    p = tmp_path / "tiny.csv"
    p.write_text("# five observations\n0.3\n-0.4\n1.2  # inline\n\n-1.5\n2.0\n")
    return p


def test_count_table1(capsys):
    assert main(["count", "--table1", "20"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 6
    assert "282,105,616" in lines[0] and "13,450,200,625" in lines[0] and lines[0].endswith("2.097")
    assert "6,564,120,420" in lines[5] and "51,724,158,235,372" in lines[5] and lines[5].endswith("0.013")


def test_count_single(capsys):
    assert main(["count", "-n", "8"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out == {"n": 8, "paths": 1430, "partitions": 4140}


def test_read_observations(tiny, tmp_path):
    assert list(read_observations(str(tiny))) == [0.3, -0.4, 1.2, -1.5, 2.0]
    bad = tmp_path / "bad.csv"
    bad.write_text("1.0\n1,5\n")
    with pytest.raises(CliError, match="bad.csv:2"):
        read_observations(str(bad))


def test_exact_then_oracle_compare(tiny, tmp_path, capsys):
    out = tmp_path / "res"
    assert main(["exact", "--data", tiny, "--theta", "0", "--grid", "-5:5:0.1", "--out", out]) == 0
    exact = np.loadtxt(out / "exact_density.csv", delimiter=",", skiprows=1)
    assert exact.shape == (101, 2) and (out / "exact_density.csv").read_text().startswith("t,estimate\n")
    capsys.readouterr()
    assert main(["oracle-compare", "--data", tiny, "--theta", "0", "--grid", "-5:5:0.1"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["max_rel_deviation"] <= 1e-10 and rep["pass"]
    assert rep["conditional_uniformity_deviation"] <= 1e-12


def test_exact_unknown_theta(tiny, tmp_path, capsys):
    assert main(["exact", "--data", tiny, "--prior", "-1,1.5", "--theta-step", "0.05", "--out", tmp_path]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert -1 < rep["theta_mean"] < 1.5 and rep["prior"] == [-1.0, 1.5]


def test_simulate_estimate_roundtrip(tmp_path):
    r = run_cli("simulate", "--density", "lambda3", "-n", "200", "--seed", "7", "--out", tmp_path)
    assert r.returncode == 0, r.stderr
    data = json.loads(r.stdout)["path"]
    r = run_cli("estimate-mode", "--data", data, "--rho", "normal:0,0.25", "--draws", "300", "--seed", "7")
    assert r.returncode == 0, r.stderr
    rep = json.loads(r.stdout)
    assert {"theta_hat", "ess", "M", "draws", "seed", "runtime_ms", "config"} <= set(rep)
    assert rep["M"] == 300 and rep["config"]["rho"] == "normal:0,0.25"
    outs = []
    for k in range(2):
        d = tmp_path / f"dens{k}"
        r = run_cli("estimate-density", "--data", data, "--draws", "200", "--seed", "3", "--grid", "-5:5:0.05", "--out", d)
        assert r.returncode == 0, r.stderr
        outs.append((d / "density.csv").read_bytes())
    assert outs[0] == outs[1]
    summary = json.loads((tmp_path / "dens0" / "summary.json").read_text())
    assert summary["ess"] > 0 and summary["config"]["grid"] == "-5:5:0.05"


def test_results_dir_from_environment(tmp_path):
    import os

    env = dict(os.environ, UNIMODAL_RESULTS_DIR=str(tmp_path / "envdir"))
    r = run_cli("simulate", "-n", "5", "--seed", "1", env=env)
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "envdir" / "lambda1_5.csv").exists()


def test_seed_changes_output(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    assert main(["simulate", "-n", "20", "--seed", "1", "--output", a]) == 0
    assert main(["simulate", "-n", "20", "--seed", "2", "--output", b]) == 0
    assert a.read_bytes() != b.read_bytes()


def test_error_json_on_bad_parameter(tiny, capsys):
    assert main(["exact", "--data", tiny, "--theta", "0", "--pd-a", "1.2"]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "invalid-parameter" and "pd-a" in err["message"]


def test_error_json_on_malformed_input(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("0.1\nabc\n")
    assert main(["estimate-mode", "--data", bad]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "malformed-input" and ":2" in err["message"]
    assert main(["estimate-mode"]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "missing-input"


def test_error_json_when_enumeration_too_large(tmp_path, capsys):
    big = tmp_path / "big.csv"
    big.write_text("\n".join(str(x) for x in np.linspace(0.1, 3, 16)) + "\n")
    assert main(["oracle-compare", "--data", big]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "invalid-input"


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("density = lambda2\nsize = 7\nseed = 4  # comment\n")
    assert load_config(str(cfg)) == {"density": "lambda2", "size": "7", "seed": "4"}
    out = tmp_path / "o.csv"
    assert main(["simulate", "--config", cfg, "--output", out]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep == {"density": "lambda2", "n": 7, "seed": 4, "path": str(out)}
    assert main(["simulate", "--config", cfg, "-n", "3", "--output", out]) == 0
    assert json.loads(capsys.readouterr().out)["n"] == 3


def test_sip_diag(tiny, capsys):
    assert main(["sip-diag", "--data", tiny, "--theta", "0", "--draws", "50", "--seeds", "3"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["n"] == 3 and len(rep["sip_ess"]) == 3
    assert all(0 < e <= 50 + 1e-9 for e in rep["sip_ess"] + rep["naive_ess"])


def test_experiment_subcommand(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("[run]\ndensity = lambda1\nsizes = 30,60\ndraws = 40\nmode_known = -0.5\ngrid = -4:4:0.1\n")
    assert main(["experiment", "--config", cfg, "--out", tmp_path / "exp"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert [r["N"] for r in rep["lambda1"]["rows"]] == [30, 60]
    assert (tmp_path / "exp" / "summary.json").exists()
    assert "mode_table" not in rep


def test_experiment_mode_table(tmp_path, capsys):
    args = ["experiment", "--density", "lambda1,lambda3", "--sizes", "40,80", "--draws", "20", "--grid", "-3:3:0.5"]
    assert main(args + ["--out", tmp_path]) == 0
    rep = json.loads(capsys.readouterr().out)
    lines = (tmp_path / "mode_table.csv").read_text().splitlines()
    assert lines[0] == "rho,N,lambda1,lambda3"
    assert len(lines) == 1 + 2 * 2
    assert lines[1].startswith('"normal:0,0.25",40,')
    assert (tmp_path / "lambda3" / "summary.json").exists() and set(rep) == {"lambda1", "lambda3", "mode_table"}
    assert main(["experiment", "--sizes", "1", "--out", tmp_path / "x"]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "invalid-config"

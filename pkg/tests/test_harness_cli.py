import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from kklab import cli, harness
from kklab.suites import DEFAULT_TOL, SUITES, trial_rng


def run_cli(*args, env=None, cwd=None):
    e = dict(os.environ)
    e.update(env or {})
    return subprocess.run([sys.executable, "-m", "kklab.cli", *args], capture_output=True,
                          text=True, env=e, cwd=cwd)


def test_parse_dims():
    assert harness.parse_dims("n=6,N=2") == {"n": 6, "N": 2}
    with pytest.raises(harness.ConfigError):
        harness.parse_dims("n=six")
    with pytest.raises(harness.ConfigError):
        harness.parse_dims("m=3")


def test_config_precedence(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text("seed: 5\ntrials: {matcore: 3}\ndims: {n: 4}\ntolerances: {identity: 1.0e-8}\n")
    cfg = harness.load_config(str(path))
    assert cfg.seed == 5 and cfg.trials_for("matcore") == 3 and cfg.dims["n"] == 4
    assert cfg.tolerances["identity"] == 1e-8
    assert cfg.tolerances["projection"] == DEFAULT_TOL["projection"]
    cfg = harness.load_config(str(path), seed=9, trials=2)
    assert cfg.seed == 9 and all(cfg.trials_for(s) == 2 for s in SUITES)


def test_json_config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"seed": 3, "suites": ["matcore"]}))
    cfg = harness.load_config(str(path))
    assert cfg.seed == 3 and cfg.suites == ["matcore"]


@pytest.mark.parametrize("text", ["bogus: 1\n", "tolerances: {nope: 1}\n", "suites: [x]\n",
                                  "trials: {x: 1}\n", "seed: -1\n", "- 1\n"])
def test_config_errors(tmp_path, text):
    path = tmp_path / "cfg.yaml"
    path.write_text(text)
    with pytest.raises(harness.ConfigError):
        harness.load_config(str(path))


def test_trial_rng_is_independent_of_order():
    a = trial_rng(7, "cycles", 3).random(4)
    trial_rng(7, "cycles", 2).random(10)
    assert (a == trial_rng(7, "cycles", 3).random(4)).all()
    assert not (a == trial_rng(7, "cycles", 4).random(4)).all()
    assert not (a == trial_rng(7, "homotopy", 3).random(4)).all()


def test_verify_in_process(tmp_path):
    cfg = harness.load_config(seed=1, trials=3, out=str(tmp_path), suites=["matcore", "averaging"])
    ok, files = harness.verify(cfg)
    assert ok
    doc = json.loads(files["report"].read_text())
    assert doc["schema"] == harness.SCHEMA and doc["passed"]
    assert {r["suite"] for r in doc["records"]} == {"matcore", "averaging"}
    assert "seconds" not in files["report"].read_text()
    text = files["summary"].read_bytes().decode()
    assert text.startswith("suite,tag,records,failures,worst_margin\r\n")


def test_verify_parallel_matches_serial(tmp_path):
    cfg_a = harness.load_config(seed=2, trials=2, out=str(tmp_path / "a"), suites=["matcore"])
    cfg_b = harness.load_config(seed=2, trials=2, out=str(tmp_path / "b"), suites=["matcore"])
    _, fa = harness.verify(cfg_a, workers=1)
    _, fb = harness.verify(cfg_b, workers=2)
    ra = json.loads(fa["report"].read_text())
    rb = json.loads(fb["report"].read_text())
    assert ra == rb


def test_failing_check_gives_exit_one(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text("tolerances: {identity: 1.0e-30}\n")
    code = cli.main(["verify", "--suite", "matcore", "--trials", "2", "--config", str(path),
                     "--out", str(tmp_path / "o")])
    assert code == 1


def test_unknown_suite_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["verify", "--suite", "nope"])
    assert exc.value.code == 2
    assert "unknown suite" in capsys.readouterr().err


def test_bad_config_is_usage_error(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text("bogus: 1\n")
    with pytest.raises(SystemExit) as exc:
        cli.main(["verify", "--config", str(path)])
    assert exc.value.code == 2


def test_cli_determinism_subprocess(tmp_path):
    args = ["verify", "--seed", "11", "--trials", "2", "--suite", "matcore,idempotent"]
    a = run_cli(*args, "--out", str(tmp_path / "a"))
    b = run_cli(*args, "--out", str(tmp_path / "b"), env={"KKLAB_THREADS": "2"})
    assert a.returncode == 0 and b.returncode == 0, a.stderr + b.stderr
    for name in ("report.json", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_decay_outputs(tmp_path):
    assert cli.main(["decay", "--k", "4,8,16", "--out", str(tmp_path)]) == 0
    table = (tmp_path / "decay.csv").read_bytes().decode()
    assert table.startswith("n,k,L,quantity,value\r\n")
    plot = (tmp_path / "decay_plot.csv").read_text().split()
    assert plot[1:] == ["4,2.0", "8,4.0", "16,6.0"]
    man = json.loads((tmp_path / "decay_manifest.json").read_text())
    assert man["depths"] == [12, 22, 42] and man["route"] == "reduced"
    before = table
    cli.main(["decay", "--k", "4,8,16", "--out", str(tmp_path)])
    assert (tmp_path / "decay.csv").read_bytes().decode() == before


def test_decay_from_config(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text(f"decay: {{n: 3, k: [6]}}\nout: {tmp_path}\n")
    assert cli.main(["decay", "--config", str(path)]) == 0
    man = json.loads((tmp_path / "decay_manifest.json").read_text())
    assert man["n"] == 3 and man["k"] == [6]


def test_decay_cap_error(tmp_path, capsys):
    code = cli.main(["decay", "--n", "3", "--k", "32", "--sparse", "--out", str(tmp_path)])
    assert code == 3
    assert "cap" in capsys.readouterr().err
    assert not (tmp_path / "decay.csv").exists()


def test_boundary_default(tmp_path):
    assert cli.main(["boundary", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "boundary.json").read_text())
    assert [s["name"] for s in doc["scenarios"]] == ["commuting", "eps-1e-3", "eps-1e-2",
                                                     "eps-1e-1"]
    assert all(s["passed"] for s in doc["scenarios"])


def test_boundary_expected_margins(tmp_path):
    path = tmp_path / "scen.yaml"
    path.write_text(
        "scenarios:\n"
        "  - {name: tight, eps: 0.01, expected: {closeness: 1.0e-30}}\n"
        "  - {name: loose, eps: 0.0, expected: {comm_boundary: 1.0e-10}}\n")
    code = cli.main(["boundary", "--config", str(path), "--out", str(tmp_path)])
    assert code == 1
    doc = json.loads((tmp_path / "boundary.json").read_text())
    assert [s["passed"] for s in doc["scenarios"]] == [False, True]


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv(harness.THREADS_ENV, "3")
    assert harness.worker_count() == 3
    monkeypatch.setenv(harness.THREADS_ENV, "x")
    with pytest.raises(harness.ConfigError):
        harness.worker_count()


def test_trial_crash_is_recorded(monkeypatch, tmp_path):
    import kklab.suites as suites

    def boom(rng, trial, dims, tol):
        raise RuntimeError("kaput")

    monkeypatch.setitem(suites.SUITES, "matcore", boom)
    cfg = harness.load_config(seed=0, trials=1, out=str(tmp_path), suites=["matcore"])
    ok, files = harness.verify(cfg, workers=1)
    assert not ok
    doc = json.loads(files["report"].read_text())
    assert doc["records"][0]["tag"] == "trial-error"

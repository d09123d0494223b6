import csv
import json
import subprocess
import sys

import pytest

from ednetrmab.cli import build_parser, main
from ednetrmab.studentgen import simulate_log, write_interaction_log


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def model_file(tmp_path):
    path = tmp_path / "m.json"
    assert run("generate", "--synthetic", "--n-arms", 6, "--n-topics", 3, "--seed", 7, "--out", path) == 0
    return path


def test_generate_synthetic_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run("generate", "--synthetic", "--n-arms", 50, "--n-topics", 20, "--seed", 7, "--out", a) == 0
    assert "validation: valid" in capsys.readouterr().out
    run("generate", "--synthetic", "--n-arms", 50, "--n-topics", 20, "--seed", 7, "--out", b)
    assert a.read_bytes() == b.read_bytes()
    assert json.loads(a.read_text())["n_arms"] == 50


def test_generate_from_logs(tmp_path):
    log = simulate_log([0.3, 0.4, 0.5], [0.8, 0.7, 0.9], [["a"], ["a", "b"], ["b"]], [0.1, 0.5, 0.9],
                       20, 10, rng=0)
    write_interaction_log(log, tmp_path / "log.csv", tmp_path / "items.csv")
    out = tmp_path / "m.json"
    assert run("generate", "--from-logs", tmp_path / "log.csv", "--items", tmp_path / "items.csv",
               "--out", out) == 0
    assert json.loads(out.read_text())["n_topics"] == 2


def test_generate_invalid_spec(tmp_path):
    assert run("generate", "--synthetic", "--n-topics", 0, "--out", tmp_path / "m.json") == 2
    assert run("generate", "--from-logs", tmp_path / "missing.csv", "--items", tmp_path / "x.csv",
               "--out", tmp_path / "m.json") == 3
    assert run("generate", "--from-logs", tmp_path / "missing.csv", "--out", tmp_path / "m.json") == 1


def test_run_single_record(model_file, tmp_path):
    out = tmp_path / "res"
    assert run("run", "--model", model_file, "--policies", "random", "--episodes", 1, "--seeds", 1,
               "--horizon", 5, "--out", out) == 0
    rows = list(csv.DictReader(open(out / "records.csv")))
    assert len(rows) == 1 and rows[0]["policy"] == "random"
    meta = json.loads((out / "meta.json").read_text())
    assert meta["config"]["episodes"] == 1 and "Philox" in meta["rng"]


def test_run_and_analyze_round_trip(model_file, tmp_path):
    out = tmp_path / "res"
    assert run("run", "--model", model_file, "--policies", "eduqate,eduqate-minus,wiql,tw,myopic,random",
               "--episodes", 2, "--horizon", 5, "--seeds", "0,1", "--out", out) == 0
    original = (out / "summary.csv").read_bytes()
    assert run("analyze", out, "--out", tmp_path / "again.csv") == 0
    assert (tmp_path / "again.csv").read_bytes() == original


def test_analyze_hand_records(tmp_path, capsys):
    path = tmp_path / "records.csv"
    path.write_text("seed,policy,episode,reward\n"
                    "0,eduqate,0,24.0\n1,eduqate,0,20.0\n"
                    "0,random,0,16.0\n1,random,0,10.0\n"
                    "0,tw,0,20.0\n1,tw,0,20.0\n")
    assert run("analyze", path) == 0
    rows = {r["policy"]: r for r in csv.DictReader(open(tmp_path / "summary.csv"))}
    assert float(rows["tw"]["mean_IB"]) == pytest.approx(75.0)
    assert float(rows["eduqate"]["mean_IB"]) == 100.0


def test_analyze_missing_policy(tmp_path, capsys):
    path = tmp_path / "records.csv"
    path.write_text("seed,policy,episode,reward\n0,random,0,1.0\n")
    assert run("analyze", path) == 2
    assert "eduqate" in capsys.readouterr().err


def test_run_errors(model_file, tmp_path):
    assert run("run", "--model", model_file, "--policies", "nope", "--out", tmp_path) == 2
    assert run("run", "--model", tmp_path / "absent.json", "--policies", "random", "--out", tmp_path) == 3
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    assert run("run", "--model", model_file, "--policies", "random", "--episodes", 1, "--seeds", 1,
               "--out", blocker / "x") == 3
    assert run("run", "--model", model_file, "--set", "episodes", "--out", tmp_path) == 1


def test_run_config_precedence(model_file, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"episodes": 5, "horizon": 3, "policies": ["random"], "seeds": [0]}))
    out = tmp_path / "res"
    assert run("run", "--config", cfg, "--model", model_file, "--set", "horizon=2", "--episodes", 2,
               "--out", out) == 0
    meta = json.loads((out / "meta.json").read_text())
    assert meta["config"]["episodes"] == 2 and meta["config"]["horizon"] == 2


def test_run_output_env(model_file, tmp_path, monkeypatch):
    monkeypatch.setenv("EDNETRMAB_OUTPUT_DIR", str(tmp_path / "env"))
    assert run("run", "--model", model_file, "--policies", "random", "--episodes", 1, "--seeds", 1) == 0
    assert (tmp_path / "env" / "records.csv").exists()
    assert run("run", "--model", model_file, "--policies", "random", "--episodes", 1, "--seeds", 1,
               "--out", tmp_path / "flag") == 0
    assert (tmp_path / "flag" / "records.csv").exists()


def test_run_oracle_check(model_file, tmp_path):
    out = tmp_path / "res"
    assert run("run", "--model", model_file, "--policies", "eduqate,random", "--k", 2, "--episodes", 2,
               "--horizon", 5, "--seeds", 1, "--oracle-check", "--out", out) == 0
    checks = json.loads((out / "meta.json").read_text())["oracle_check"]
    assert checks[0]["greedy_exceeds_optimum"] == 0


def test_export_network(tmp_path, capsys):
    assert run("export-network", "--n-arms", 10, "--n-topics", 3, "--seed", 1, "--out", tmp_path) == 0
    assert (tmp_path / "edges.csv").exists() and (tmp_path / "nodes.csv").exists()


def test_greedy_demo(capsys):
    assert run("greedy-demo", "--instances", 20, "--k", 2) == 0
    assert "greedy above optimum: 0" in capsys.readouterr().out


def test_help_lists_flags(capsys):
    parser = build_parser()
    sub = parser._subparsers._group_actions[0].choices["run"]
    text = sub.format_help()
    for action in sub._actions:
        for flag in action.option_strings:
            assert flag in text


def test_unknown_flag_fails_fast(capsys):
    with pytest.raises(SystemExit) as exc:
        run("run", "--bogus")
    assert exc.value.code == 1


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "ednetrmab", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "generate" in proc.stdout

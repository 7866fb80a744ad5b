"""Command-line harness: exit codes, report determinism, schemas."""

import json
import subprocess
import sys

import pytest

from qfocklab.cli import ExperimentConfig, main, parse_grid, parse_word
from qfocklab.errors import ConfigError


def run_cli(args, tmp_path=None):
    return subprocess.run(
        [sys.executable, "-m", "qfocklab.cli", *args],
        capture_output=True,
        text=True,
    )


def test_parse_grid():
    assert parse_grid("0.3:0.5:0.1") == [0.3, 0.4, 0.5]
    assert parse_grid("0.30:0.70:0.05")[0] == 0.3
    assert len(parse_grid("0.30:0.70:0.05")) == 9
    with pytest.raises(ConfigError):
        parse_grid("1:0:0.1")
    with pytest.raises(ConfigError):
        parse_grid("nope")


def test_parse_word():
    assert parse_word("1,2,1") == [1, 2, 1]
    with pytest.raises(ConfigError):
        parse_word("1,x")


def test_config_validation():
    cfg = ExperimentConfig(command="decay", q=0.95)
    with pytest.raises(ConfigError):
        cfg.validate()
    cfg = ExperimentConfig(command="decay", word_a=[3], dim=2)
    with pytest.raises(ConfigError):
        cfg.validate()
    ExperimentConfig(command="decay").validate()


def test_bad_q_exits_2(capsys):
    assert main(["verify", "--q", "0.999"]) == 2


def test_decay_report(tmp_path, capsys):
    out = tmp_path / "decay.csv"
    jout = tmp_path / "decay.json"
    code = main(
        [
            "decay",
            "--q",
            "0.5",
            "--dim",
            "2",
            "--max-level",
            "8",
            "--word-a",
            "1",
            "--word-b",
            "1",
            "--out",
            str(out),
            "--json-out",
            str(jout),
        ]
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "m,level_norm,sp_bound,partial_sum,ratio"
    assert len(lines) == 1 + 7  # levels 0..6 are lossless at this depth
    payload = json.loads(jout.read_text())
    assert payload["schema_version"] == "1"
    assert payload["config"]["q"] == 0.5
    assert payload["verdict"] == "CONVERGENT"
    import math

    assert payload["fitted_log_slope"] == pytest.approx(math.log(0.5), abs=1e-9)


def test_decay_deterministic_bytes(tmp_path):
    args = [
        "decay",
        "--q",
        "0.4",
        "--dim",
        "2",
        "--max-level",
        "6",
        "--seed",
        "7",
    ]
    first = tmp_path / "a.csv"
    second = tmp_path / "b.csv"
    assert main(args + ["--out", str(first)]) == 0
    assert main(args + ["--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_threshold_flip(tmp_path):
    out = tmp_path / "th.csv"
    jout = tmp_path / "th.json"
    code = main(
        [
            "threshold",
            "--dim",
            "4",
            "--max-level",
            "6",
            "--p",
            "2",
            "--grid",
            "0.45:0.55:0.10",
            "--out",
            str(out),
            "--json-out",
            str(jout),
        ]
    )
    assert code == 0
    payload = json.loads(jout.read_text())
    assert payload["flip_count"] == 1
    assert payload["predicted_threshold"] == pytest.approx(0.5)
    rows = out.read_text().splitlines()[1:]
    assert rows[0].endswith("CONVERGENT")
    assert rows[-1].endswith("DIVERGENT")


def test_torus_command(tmp_path):
    out = tmp_path / "torus.csv"
    jout = tmp_path / "torus.json"
    code = main(
        [
            "torus",
            "--semigroup",
            "poisson",
            "-l",
            "1",
            "-m",
            "1",
            "--window",
            "8",
            "--out",
            str(out),
            "--json-out",
            str(jout),
        ]
    )
    assert code == 0
    payload = json.loads(jout.read_text())
    assert payload["nonzero_count"] == 1
    assert payload["support"] == [-1]
    assert payload["rank_bound"] == 3
    lines = out.read_text().splitlines()
    assert lines[0] == "k,coefficient"


def test_heat_torus_window_clipping(tmp_path):
    out = tmp_path / "heat.csv"
    code = main(
        ["torus", "--semigroup", "heat", "-l", "2", "-m", "3", "--window", "8", "--out", str(out)]
    )
    assert code == 0
    rows = out.read_text().splitlines()[1:]
    ks = [int(r.split(",")[0]) for r in rows]
    # only inputs whose shifted output stays inside the window
    assert min(ks) == -8 and max(ks) == 8 - 5
    assert all(r.split(",")[1] == "-6" for r in rows)


def test_ao_decay_torus(tmp_path):
    jout = tmp_path / "ao.json"
    code = main(
        [
            "ao-decay",
            "--model",
            "torus",
            "-l",
            "1",
            "-m",
            "1",
            "--window",
            "16",
            "--json-out",
            str(jout),
        ]
    )
    assert code == 0
    payload = json.loads(jout.read_text())
    assert payload["trend_pass"] is True


def test_config_file_with_flag_override(tmp_path):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"q": 0.4, "dim": 2, "max_level": 6}))
    out = tmp_path / "d.csv"
    jout = tmp_path / "d.json"
    code = main(
        ["decay", "--config", str(cfg_file), "--q", "0.3", "--out", str(out), "--json-out", str(jout)]
    )
    assert code == 0
    payload = json.loads(jout.read_text())
    assert payload["config"]["q"] == 0.3  # flag wins
    assert payload["config"]["max_level"] == 6  # file survives


def test_unknown_config_key(tmp_path):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"qq": 0.4}))
    assert main(["decay", "--config", str(cfg_file)]) == 2


def test_verify_subprocess_smoke():
    proc = run_cli(["verify", "--max-level", "4"])
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert proc.stdout.count("[PASS]") == 13


def test_verify_corrupted_tolerance(tmp_path):
    jout = tmp_path / "verify.json"
    code = main(["verify", "--max-level", "4", "--tol", "1e-30", "--out", str(jout)])
    assert code == 1
    payload = json.loads(jout.read_text())
    assert payload["passed"] is False
    assert payload["failed_checks"], "failing checks must be named"

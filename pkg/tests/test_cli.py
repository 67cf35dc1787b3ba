import csv
import json
import os
import subprocess
import sys

import pytest

from rollwave import cli


def _write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def _files(d):
    return {f: open(os.path.join(d, f), "rb").read() for f in sorted(os.listdir(d))}


DRESSLER = {"physical": {"F": 3.0, "delta": 0.01}, "dressler": {"qbar": 1.0, "sweep": 10}}
MAIN = {"physical": {"F": 2.5, "delta": 0.04}, "wave": {"k": 0.16, "qbar": 1.0}}


def test_dressler_rows_and_echo(tmp_path):
    cfgp = _write(tmp_path, DRESSLER)
    out = tmp_path / "o"
    assert cli.run(["dressler", "--config", cfgp, "--out", str(out)]) == 0
    lines = (out / "dressler.csv").read_text().splitlines()
    assert len(lines) == 1 + 10
    echo = json.loads((out / "resolved_config.json").read_text())
    assert echo["command"] == "dressler" and echo["config"]["dressler"]["sweep"] == 10


def test_dressler_byte_identical(tmp_path):
    cfgp = _write(tmp_path, DRESSLER)
    cli.run(["dressler", "--config", cfgp, "--out", str(tmp_path / "a")])
    first = _files(tmp_path / "a")
    cli.run(["dressler", "--config", cfgp, "--out", str(tmp_path / "a")])
    assert _files(tmp_path / "a") == first


def test_regime_exit_code(tmp_path, capsys):
    cfgp = _write(tmp_path, {"physical": {"F": 1.5, "delta": 0.01}})
    assert cli.run(["dressler", "--config", cfgp, "--out", str(tmp_path / "o")]) == 2
    assert "outside Dressler regime" in capsys.readouterr().err


def test_usage_exit_codes(tmp_path):
    cfgp = _write(tmp_path, {"physical": {"F": 3, "delta": 0.01, "Re": 100}})
    assert cli.run(["dressler", "--config", cfgp]) == 1
    good = _write(tmp_path, DRESSLER, "good.json")
    assert cli.run(["plot", "--config", good]) == 1
    assert cli.run(["dressler"]) == 1
    assert cli.run(["dressler", "--config", good, "--parallel", "0"]) == 1


def test_threads_env_overrides(monkeypatch):
    args = cli.build_parser().parse_args(["dressler", "--config", "x", "--parallel", "3"])
    assert cli._workers(args) == 3
    monkeypatch.setenv("ROLLWAVE_THREADS", "2")
    assert cli._workers(args) == 2
    monkeypatch.setenv("ROLLWAVE_THREADS", "two")
    with pytest.raises(cli.ConfigError):
        cli._workers(args)


def test_json_format(tmp_path):
    cfgp = _write(tmp_path, {**DRESSLER, "output": {"format": "json"}})
    assert cli.run(["dressler", "--config", cfgp, "--out", str(tmp_path / "o")]) == 0
    rows = json.loads((tmp_path / "o" / "dressler.json").read_text())
    assert len(rows) == 10 and set(rows[0]) >= {"h_plus", "h_minus", "k", "M", "c_star"}


def test_profile_and_whitham2(tmp_path):
    cfgp = _write(tmp_path, MAIN)
    assert cli.run(["profile", "--config", cfgp, "--out", str(tmp_path / "p")]) == 0
    rep = json.loads((tmp_path / "p" / "profile_report.json").read_text())
    assert abs(rep["c"] - 1.9062329) < 1e-6
    assert cli.run(["whitham2", "--config", cfgp, "--out", str(tmp_path / "w")]) == 0
    assert (tmp_path / "w" / "mu.csv").exists()


def test_stability_sweep_flags_failure_and_is_parallel_stable(tmp_path):
    pts = [{"k": 0.15}, {"k": 0.16}, {"k": 0.17}, {"k": 5.0}]
    cfgp = _write(tmp_path, {"physical": {"F": 2.5, "delta": 0.04}, "wave": {"points": pts},
                             "stability": {"chunk": 2}})
    assert cli.run(["stability", "--config", cfgp, "--out", str(tmp_path / "s")]) == 0
    with open(tmp_path / "s" / "stability.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4
    assert [bool(r["errors"]) for r in rows] == [False, False, False, True]
    assert rows[1]["hyperbolic"] == "True"
    assert cli.run(["stability", "--config", cfgp, "--out", str(tmp_path / "s2"),
                    "--parallel", "2"]) == 0
    a, b = _files(tmp_path / "s"), _files(tmp_path / "s2")
    assert a["stability.csv"] == b["stability.csv"]


def test_validate_dry_run(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfgp = _write(tmp_path, {**MAIN, "sim": {"order": 1}})
    assert cli.run(["validate", "--config", cfgp, "--dry-run"]) == 0
    echo = json.loads(capsys.readouterr().out)
    plan = echo["estimate"]["plan"]
    assert [p["eps"] for p in plan] == [0.1, 0.05, 0.025]
    assert not os.path.exists("out")


def test_console_script_exit_code(tmp_path):
    cfgp = _write(tmp_path, {"physical": {"F": 1.5, "delta": 0.01}})
    r = subprocess.run([sys.executable, "-m", "rollwave.cli", "dressler", "--config", cfgp,
                        "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert r.returncode == 2

import json

import pytest

from adhoccloud.cli import (EXIT_INFEASIBLE, EXIT_INVARIANT, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, OUT_ENV,
                            format_sweep, main, parse_sizes)
from adhoccloud.sim import run_scenario


def test_run_writes_identical_files(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--seed", "7", "--out", str(a)]) == EXIT_OK
    assert main(["run", "--seed", "7", "--out", str(b)]) == EXIT_OK
    for name in ("report.json", "trace.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    report = json.loads((a / "report.json").read_text())
    assert report["feasible"] and report["improvement"] == pytest.approx(0.17, abs=1e-6)


def test_no_trace(tmp_path):
    assert main(["run", "--no-trace", "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "report.json").exists() and not (tmp_path / "trace.txt").exists()


def test_env_default_out(tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "env"))
    assert main(["baseline"]) == EXIT_OK
    assert json.loads((tmp_path / "env" / "baseline.json").read_text())["source_node"] == "vega_lte"


def test_sweep_table_matches_reports(tmp_path, capsys, threenode_at):
    assert main(["sweep", "30,50", "--out", str(tmp_path), "--jobs", "2"]) == EXIT_OK
    rows = json.loads((tmp_path / "sweep.json").read_text())
    for row, mb in zip(rows, (30.0, 50.0)):
        r = run_scenario(threenode_at(mb))
        assert row["makespan"] == r.makespan and row["improvement"] == r.improvement
    table = (tmp_path / "sweep.txt").read_text()
    assert table == format_sweep(rows)
    assert "17.000000" in table and "20.000000" in table
    assert table in capsys.readouterr().out


def test_validate_ok_and_cyclic(tmp_path):
    assert main(["validate", "table2_threenode"]) == EXIT_OK
    bad = tmp_path / "cyc.toml"
    bad.write_text("""
[[nodes]]
id = "a"
processing_power = 1.0
available_energy = 1.0
proc_energy_rate = 1.0
tx_energy_per_packet = 1.0

[workload]
tasks = [{id = "x", size = 1.0}, {id = "y", size = 1.0}]
edges = [["x", "y"], ["y", "x"]]
""")
    assert main(["validate", str(bad)]) == EXIT_VALIDATION


def test_validate_syntax_error(tmp_path, capsys):
    bad = tmp_path / "e.toml"
    bad.write_text("")
    assert main(["validate", str(bad)]) == EXIT_VALIDATION
    assert "line 1" in capsys.readouterr().err


def test_usage_errors(tmp_path):
    assert main([]) == EXIT_USAGE
    assert main(["frobnicate"]) == EXIT_USAGE
    assert main(["sweep", "30,abc", "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["run", "--scenario", str(tmp_path / "missing.toml")]) == EXIT_USAGE


def test_infeasible_exit_code(tmp_path):
    s = tmp_path / "tight.toml"
    s.write_text("""
[[nodes]]
id = "a"
processing_power = 1.0
available_energy = 100.0
proc_energy_rate = 1.0
tx_energy_per_packet = 0.0

[workload]
tasks = [{id = "x", size = 1000.0, deadline = 1.0}]
""")
    assert main(["run", "--scenario", str(s), "--out", str(tmp_path / "o")]) == EXIT_INFEASIBLE
    assert (tmp_path / "o" / "report.json").exists()


def test_trace_check(tmp_path):
    assert main(["run", "--out", str(tmp_path)]) == EXIT_OK
    trace = tmp_path / "trace.txt"
    assert main(["trace-check", str(trace)]) == EXIT_OK
    lines = trace.read_text().splitlines()
    lines[3], lines[4] = lines[4], lines[3]
    trace.write_text("\n".join(lines) + "\n")
    assert main(["trace-check", str(trace)]) == EXIT_INVARIANT


def test_parse_sizes():
    assert parse_sizes("30, 50") == [30.0, 50.0]

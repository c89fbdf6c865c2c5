import json
import os
import subprocess
import sys

import pytest

from lpu._validation import SchemaError
from lpu.cli import main
from lpu.io import read_json, write_json
from lpu.tomography import simulate_counts, write_counts
from lpu.protocols.gates import SINGLE_QUBIT_GATES


def run(tmp_path, *argv, name="out"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, out


def report(out):
    return read_json(out / "report.json", "report")


def test_ztl_example(tmp_path):
    code, out = run(tmp_path, "ztl", "--photons", "101010", "--matrix", "fourier6")
    assert code == 0
    metrics = report(out)["metrics"]
    assert metrics["outcomes"] == 20 and metrics["zero_outcomes"] == 12
    assert metrics["nu"] == 0.0
    rows = [l for l in (out / "outcomes.txt").read_text().splitlines() if not l.startswith("#")]
    assert len(rows) == 20


def test_compose_builtin_matches_printed_matrix(tmp_path):
    code, out = run(tmp_path, "compose", "--builtin", "bsg")
    assert code == 0
    assert report(out)["metrics"]["max_deviation_after_gauge_fix"] <= 2e-3


def test_usage_errors_exit_one(tmp_path):
    assert run(tmp_path, "haar")[0] == 1  # stochastic without --seed
    assert main(["teleport"]) == 1
    assert run(tmp_path, "compose", "--config", str(tmp_path / "missing.json"))[0] == 1
    bad = tmp_path / "chip.json"
    write_json(bad, {"schema": "lpu.matrix/1"})
    assert run(tmp_path, "calibrate", "--chip", str(bad), "--seed", "1")[0] == 1


def test_reports_are_byte_identical(tmp_path):
    argv = ("boson-sample", "--unitaries", "3", "--shots", "1000", "--seed", "5")
    _, a = run(tmp_path, *argv, name="a")
    _, b = run(tmp_path, *argv, name="b")
    for name in ("report.json", "fidelities.txt", "histogram.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert "timing.json" in os.listdir(a)


def test_boson_sample_files(tmp_path):
    code, out = run(tmp_path, "boson-sample", "--unitaries", "100", "--shots", "100", "--seed", "1")
    assert code == 0
    rows = [l.split() for l in (out / "fidelities.txt").read_text().splitlines() if not l.startswith("#")]
    assert len(rows) == 100
    assert all(0 <= float(r[1]) <= 1 for r in rows)


def test_empty_campaign_writes_nothing(tmp_path):
    spec = tmp_path / "campaign.json"
    write_json(spec, {"schema": "lpu.campaign/1", "members": []})
    code, out = run(tmp_path, "campaign", "--spec", str(spec), "--seed", "1")
    assert code == 1
    assert not out.exists()


def test_campaign_seeds_and_aggregate(tmp_path):
    argv = ("campaign", "--generate", "haar", "--members", "3", "--seed", "11")
    _, a = run(tmp_path, *argv, name="a")
    _, b = run(tmp_path, *argv, name="b")
    ra, rb = report(a), report(b)
    seeds = ra["metrics"]["member_seeds"]
    assert seeds == rb["metrics"]["member_seeds"]
    assert len(set(seeds)) == 3
    assert ra["metrics"]["succeeded"] == 3


def test_campaign_records_member_failures(tmp_path):
    spec = tmp_path / "campaign.json"
    write_json(spec, {"schema": "lpu.campaign/1", "members": [
        {"command": "ztl", "args": {}},
        {"command": "compose", "args": {"config": str(tmp_path / "missing.json")}},
    ]})
    code, out = run(tmp_path, "campaign", "--spec", str(spec), "--seed", "2")
    assert code == 0
    metrics = report(out)["metrics"]
    assert metrics["succeeded"] == 1 and len(metrics["failures"]) == 1
    assert "ztl.nu" in metrics["aggregate"]


def test_incompatible_schema_is_rejected(tmp_path):
    _, out = run(tmp_path, "ztl")
    data = read_json(out / "report.json")
    data["schema"] = "lpu.report/99"
    write_json(out / "report.json", data)
    with pytest.raises(SchemaError):
        read_json(out / "report.json", "report")
    with pytest.raises(SchemaError):
        read_json(out / "report.json", "chip")


def test_runtime_failure_leaves_no_files(tmp_path):
    counts = tmp_path / "counts.json"
    write_counts(counts, simulate_counts(SINGLE_QUBIT_GATES["H"], 100, rng=1)[:-1])
    code, out = run(tmp_path, "tomography", "--counts", str(counts), "--ideal", "H")
    assert code == 2
    assert not out.exists() or not os.listdir(out)


def test_tomography_from_counts(tmp_path):
    counts = tmp_path / "counts.json"
    write_counts(counts, simulate_counts(SINGLE_QUBIT_GATES["H"], 2_000, rng=2))
    code, out = run(tmp_path, "tomography", "--counts", str(counts), "--ideal", "H")
    assert code == 0
    assert report(out)["metrics"]["process_fidelity"] >= 0.99
    assert (out / "choi.json").exists()


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "lpu", "chm", "--family", "fourier", "--out", str(tmp_path)],
        capture_output=True, text=True, check=True,
    )
    assert isinstance(json.loads(proc.stdout), dict)


def test_campaign_independent_of_workers(tmp_path):
    argv = ("campaign", "--generate", "haar", "--members", "3", "--seed", "4")
    _, a = run(tmp_path, *argv, "--workers", "1", name="a")
    _, b = run(tmp_path, *argv, "--workers", "2", name="b")
    assert report(a)["metrics"] == report(b)["metrics"]
    assert (a / "members.txt").read_bytes() == (b / "members.txt").read_bytes()

from __future__ import annotations

import json
from pathlib import Path

from revstream.cli import main
from revstream.records import load_jsonl


def test_run_case_study(tmp_path: Path, capsys):
    out = tmp_path / "case.json"
    code = main([
        "run", "--scenario", "event_planning", "--rho", "0.25",
        "--policy", "absorber", "--revision", "substitutive",
        "--backend", "mock", "--seed", "0", "--out", str(out),
    ])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["wasted_acts"] == 1 and doc["comp_calls"] == 1
    assert "wasted=1" in capsys.readouterr().out


def test_run_unknown_scenario_usage_error(tmp_path: Path, capsys):
    code = main(["run", "--scenario", "mars_base", "--out", str(tmp_path / "x.json")])
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_grid_preset_and_resume(tmp_path: Path, capsys):
    out = tmp_path / "grid.jsonl"
    code = main(["grid", "--preset", "plan-length", "--out", str(out), "--workers", "2"])
    assert code == 0
    full = out.read_bytes()
    docs = load_jsonl(out)
    assert len(docs) == 72

    # interrupt the file halfway; a rerun must fill in exactly the missing runs
    lines = full.decode().strip().split("\n")
    out.write_text("\n".join(lines[:30]) + "\n")
    code = main(["grid", "--preset", "plan-length", "--out", str(out), "--workers", "2"])
    assert code == 0
    assert out.read_bytes() == full
    assert "resuming" in capsys.readouterr().out


def test_grid_rerun_skips_everything(tmp_path: Path):
    out = tmp_path / "grid.jsonl"
    main(["grid", "--preset", "plan-length", "--out", str(out)])
    first = out.read_bytes()
    main(["grid", "--preset", "plan-length", "--out", str(out)])
    assert out.read_bytes() == first


def test_report_idempotent_bytes(tmp_path: Path):
    grid_out = tmp_path / "grid.jsonl"
    main(["grid", "--preset", "plan-length", "--out", str(grid_out)])
    report_a = tmp_path / "a.csv"
    report_b = tmp_path / "b.csv"
    assert main(["report", "--records", str(grid_out), "--group", "policy,length_mult",
                 "--resamples", "100", "--out", str(report_a)]) == 0
    assert main(["report", "--records", str(grid_out), "--group", "policy,length_mult",
                 "--resamples", "100", "--out", str(report_b)]) == 0
    assert report_a.read_bytes() == report_b.read_bytes()


def test_report_unknown_group_usage_error(tmp_path: Path, capsys):
    grid_out = tmp_path / "grid.jsonl"
    main(["grid", "--preset", "plan-length", "--out", str(grid_out)])
    code = main(["report", "--records", str(grid_out), "--group", "flavor"])
    assert code == 1


def test_report_detects_corrupt_records(tmp_path: Path):
    grid_out = tmp_path / "grid.jsonl"
    main(["grid", "--preset", "plan-length", "--out", str(grid_out)])
    docs = load_jsonl(grid_out)
    docs[0]["wasted_acts"] = 999
    grid_out.write_text("\n".join(json.dumps(d) for d in docs) + "\n")
    code = main(["report", "--records", str(grid_out), "--group", "policy"])
    assert code == 3


def test_bad_flags_usage_exit():
    assert main(["run", "--nonsense"]) == 1
    assert main(["grid"]) == 1  # missing --out


def test_grid_from_config_file(tmp_path: Path):
    cfg = tmp_path / "grid.yaml"
    cfg.write_text(
        "scenarios: [event_planning]\n"
        "rhos: [0.25]\n"
        "revision_types: [substitutive, additive]\n"
        "policies: [absorber, ignore]\n"
        "seeds: [0]\n"
    )
    out = tmp_path / "grid.jsonl"
    assert main(["grid", "--config", str(cfg), "--out", str(out)]) == 0
    assert len(load_jsonl(out)) == 4


def test_grid_config_unknown_key(tmp_path: Path, capsys):
    cfg = tmp_path / "grid.yaml"
    cfg.write_text("flavors: [mild]\n")
    out = tmp_path / "grid.jsonl"
    assert main(["grid", "--config", str(cfg), "--out", str(out)]) == 1

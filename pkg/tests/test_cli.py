"""End-to-end command line runs (in process, small configurations)."""
import json
import os

import pytest

from chaoskit.cli import main

SMALL = {
    "d": 2,
    "truncation": 4,
    "max_degree": 4,
    "n_time": 8,
    "chaos_n_time": 4,
    "chaos_truncation": 2,
    "n_paths": 400,
    "seed": 11,
}


@pytest.fixture
def cfg_path(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(SMALL))
    return os.fspath(path)


def run_dir_of(captured: str) -> str:
    last = captured.strip().splitlines()[-1]
    return last[last.index("[") + 1 : last.rindex("]")]


def test_fock_suite_writes_a_full_bundle(tmp_path, cfg_path, capsys):
    out = os.fspath(tmp_path / "runs")
    code = main(["fock", "--config", cfg_path, "--out", out])
    captured = capsys.readouterr().out
    assert code == 0
    assert "11/11 pass" in captured
    run_dir = run_dir_of(captured)
    assert os.path.dirname(run_dir) == out
    for name in ("report.jsonl", "report.csv", "manifest.json", "timing.jsonl"):
        assert os.path.isfile(os.path.join(run_dir, name))
    with open(os.path.join(run_dir, "manifest.json")) as fh:
        manifest = json.load(fh)
    assert manifest["suite"] == "fock"
    assert manifest["seed"] == 11
    assert manifest["passed"] == 11


def test_identical_runs_emit_identical_report_bytes(tmp_path, cfg_path, capsys):
    out = os.fspath(tmp_path / "runs")
    assert main(["fock", "--config", cfg_path, "--out", out]) == 0
    first = run_dir_of(capsys.readouterr().out)
    assert main(["fock", "--config", cfg_path, "--out", out]) == 0
    second = run_dir_of(capsys.readouterr().out)
    assert first != second
    for name in ("report.jsonl", "report.csv"):
        with open(os.path.join(first, name), "rb") as fa:
            with open(os.path.join(second, name), "rb") as fb:
                assert fa.read() == fb.read(), name


def test_seed_and_paths_overrides_reach_the_manifest(tmp_path, cfg_path, capsys):
    out = os.fspath(tmp_path / "runs")
    assert main(["fock", "--config", cfg_path, "--out", out, "--seed", "12", "--paths", "777"]) == 0
    run_dir = run_dir_of(capsys.readouterr().out)
    with open(os.path.join(run_dir, "manifest.json")) as fh:
        manifest = json.load(fh)
    assert manifest["seed"] == 12
    assert manifest["config"]["n_paths"] == 777
    base = json.loads((tmp_path / "cfg.json").read_text())
    assert base["seed"] == 11  # the file itself is untouched


def test_unreachable_tolerance_exits_one(tmp_path, capsys):
    data = dict(SMALL, tolerances={"algebraic": 0.0})
    path = tmp_path / "strict.json"
    path.write_text(json.dumps(data))
    out = os.fspath(tmp_path / "runs")
    code = main(["fock", "--config", os.fspath(path), "--out", out])
    captured = capsys.readouterr().out
    assert code == 1
    assert "fail" in captured


def test_invalid_config_exits_two(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(dict(SMALL, n_paths=-5)))
    code = main(["fock", "--config", os.fspath(path)])
    err = capsys.readouterr().err
    assert code == 2
    assert "invalid config" in err
    assert main(["fock", "--config", os.fspath(tmp_path / "missing.json")]) == 2


def test_unknown_suite_is_refused_by_the_parser(capsys):
    with pytest.raises(SystemExit):
        main(["warp"])

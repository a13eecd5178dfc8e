import csv
import filecmp

import pytest

from vue import crypto
from vue.cli import main
from vue.config import build_scenario, parse_text
from vue.protocol import compute_vote_identifier, rp_index
from vue.sweep import RAW_COLUMNS, SUMMARY_COLUMNS

SMALL = """\
field.nodes = 120
field.width_m = 700
field.height_m = 700
sim.duration_s = 900
sim.warmup_s = 600
events.count = 8
negotiation.interval_min_s = 150
negotiation.interval_max_s = 300
"""
SWEEP = SMALL + """\
sweep.models = rwp,rpgm
sweep.hop_limits = 1,2
sweep.malicious_ratios = 0.0,0.2
sweep.repetitions = 3
"""


@pytest.fixture(autouse=True)
def no_env(monkeypatch):
    import os

    for key in list(os.environ):
        if key.startswith("VUE_"):
            monkeypatch.delenv(key)


def read(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_run_writes_results_and_resolved_config(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(SMALL)
    out = tmp_path / "missing" / "dir"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--seed", "3"]) == 0
    rows = read(out / "results.csv")
    assert len(rows) == 2 and rows[0][0] == "model"
    resolved = (out / "config.resolved.txt").read_text()
    parsed = build_scenario(parse_text(resolved))
    assert parsed.seed == 3 and parsed.node_count == 120
    assert build_scenario(parse_text(resolved)) == build_scenario({**parse_text(SMALL), "sim.seed": "3"})
    detail = read(out / "reports.csv")
    assert detail[0][:3] == ["report_id", "event_id", "reporter"]
    assert int(rows[1][4]) == len(detail) - 1
    raw = (out / "results.csv").read_bytes()
    assert b"\r\n" not in raw


def test_run_bad_config_exit_1(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("sim.duration_s = 100\nsim.warmup_s = 100\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "sim.warmup_s" in capsys.readouterr().err
    cfg.write_text("this is not a config\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert main(["run", "--config", str(tmp_path / "absent.cfg"), "--out", str(tmp_path / "o")]) == 1


def test_env_override_applies(tmp_path, monkeypatch):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(SMALL)
    monkeypatch.setenv("VUE_MOBILITY_MODEL", "nc")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert read(tmp_path / "o" / "results.csv")[1][0] == "nc"
    monkeypatch.setenv("VUE_FIELD_NODES", "zero")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o2")]) == 1


def test_runtime_failure_exit_2(tmp_path, monkeypatch):
    import vue.engine

    def boom(cfg):
        raise RuntimeError("disk on fire")

    monkeypatch.setattr(vue.engine, "run_scenario", boom)
    cfg = tmp_path / "c.cfg"
    cfg.write_text(SMALL)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_sweep_outputs(tmp_path):
    cfg = tmp_path / "s.cfg"
    cfg.write_text(SWEEP)
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", str(cfg), "--out", str(out), "--seed", "5"]) == 0
    raw = read(out / "raw.csv")
    assert tuple(raw[0]) == RAW_COLUMNS
    assert len(raw) - 1 == 2 * 2 * 2 * 3
    summary = read(out / "summary.csv")
    assert tuple(summary[0]) == SUMMARY_COLUMNS
    assert len(summary) - 1 == 8
    for name in ("witnesses_vs_k.png", "unsure_vs_k.png", "benign_majority_vs_malicious.png"):
        assert (out / name).read_bytes()[:4] == b"\x89PNG"

    # summary means recomputed from raw rows
    header = raw[0]
    cells = {}
    for row in raw[1:]:
        rec = dict(zip(header, row))
        cells.setdefault((rec["model"], rec["k"], rec["malicious_ratio"]), []).append(rec)
    sh = summary[0]
    for row in summary[1:]:
        rec = dict(zip(sh, row))
        members = cells[(rec["model"], rec["k"], rec["malicious_ratio"])]
        assert int(rec["repetitions"]) == len(members) == 3
        for metric in ("avg_witnesses", "unsure_ratio", "benign_majority_ratio", "reports"):
            mean = sum(float(m[metric]) for m in members) / len(members)
            assert float(rec[f"{metric}_mean"]) == pytest.approx(mean, rel=1e-12, abs=1e-12)
            assert float(rec[f"{metric}_ci99_low"]) <= mean <= float(rec[f"{metric}_ci99_high"])


def test_sweep_repetitions_flag_and_determinism(tmp_path):
    cfg = tmp_path / "s.cfg"
    cfg.write_text(SWEEP)
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    for out, par in ((a, "1"), (b, "2"), (c, "1")):
        assert main(["sweep", "--config", str(cfg), "--out", str(out), "--repetitions", "2",
                     "--parallelism", par, "--no-figures"]) == 0
    assert len(read(a / "raw.csv")) - 1 == 16
    assert filecmp.cmp(a / "raw.csv", b / "raw.csv", shallow=False)
    assert filecmp.cmp(a / "raw.csv", c / "raw.csv", shallow=False)
    assert not (a / "witnesses_vs_k.png").exists()


def test_single_repetition_summary_has_nan_ci(tmp_path):
    cfg = tmp_path / "s.cfg"
    cfg.write_text(SWEEP)
    out = tmp_path / "one"
    assert main(["sweep", "--config", str(cfg), "--out", str(out), "--repetitions", "1"]) == 0
    row = dict(zip(*read(out / "summary.csv")[:2]))
    assert row["avg_witnesses_ci99_low"] == "nan"


def test_sweep_bad_arguments(tmp_path):
    cfg = tmp_path / "s.cfg"
    cfg.write_text(SWEEP)
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o"), "--repetitions", "0"]) == 1
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o"), "--parallelism", "0"]) == 1


def test_demo_exit_and_trace(capsys):
    assert main(["demo"]) == 0
    out = capsys.readouterr().out
    assert "confirmed" in out.splitlines()[-1]
    assert "vote-rejected" in out and "duplicate upsilon" in out


def test_recover(capsys):
    k_is = bytes(range(32))
    hm = crypto.hash_data(b"report")
    ups = compute_vote_identifier(4242, hm, k_is)
    args = ["recover", "--upsilon", ups.hex(), "--hm", hm.hex(), "--k-is", k_is.hex()]
    assert main(args + ["--ids", "0:10000"]) == 0
    assert capsys.readouterr().out.strip() == "4242"
    assert main(args + ["--ids", "0:0"]) == 0
    assert capsys.readouterr().out.strip() == "not found"
    assert main(["recover", "--upsilon", "xyz", "--hm", hm.hex(), "--k-is", k_is.hex(), "--ids", "0:5"]) == 1
    assert main(args + ["--ids", "a:b"]) == 1


def test_rp_index_helper_consistent_with_registry():
    # the CLI demo prints full taus; the index printed must be recomputable
    assert rp_index(b"\x00" * 32, 8) == int.from_bytes(crypto.hash_data(b"\x00" * 32), "big") % 8

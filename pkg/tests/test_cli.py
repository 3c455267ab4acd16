import json
import math

import numpy as np
import pytest

from photoland.cli import EXIT_CHECKPOINT, EXIT_CONFIG, EXIT_INPUT, main, stratified_sample
from photoland.config import ConfigError, RunConfig, load_config
from photoland.tables import METRICS_HEADER, TRAINING_HEADER, fmt, parse, read_csv, write_csv

TINY = {
    "design_bins": 2, "weight_bins": 5, "max_steps": 1500,
    "train_budget": 30, "train_seeds": [0, 1], "train_designs": 4,
    "coopt_budget": 60, "coopt_seeds": [0, 1, 2], "coopt_bin_width": 10,
}


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(TINY))
    return path


def run(cfg_path, out, *cmds, workers=1, resume=False):
    codes = []
    for c in cmds:
        argv = [c, "--config", str(cfg_path), "--out", str(out), "--workers", str(workers)]
        if resume:
            argv.append("--resume")
        codes.append(main(argv))
    return codes


def test_config_presets_and_overrides(tmp_path):
    desk = RunConfig.preset("desk")
    assert (desk.design_bins, desk.weight_bins, desk.max_steps) == (5, 41, 20_000)
    paper = load_config(scale="paper")
    assert (paper.design_bins, paper.weight_bins, paper.max_steps) == (9, 121, 100_000)
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"scale": "paper", "workers": 3}))
    cfg = load_config(p, workers=5)
    assert cfg.design_bins == 9 and cfg.workers == 5
    assert load_config(p, scale="desk").design_bins == 5


@pytest.mark.parametrize("bad", [
    {"nonsense": 1}, {"train_seeds": [1, 1]}, {"methods": ["cmaes"]},
    {"max_steps": 0}, {"train_designs": 10}, {"scale": "huge"},
])
def test_config_rejects(tmp_path, bad):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(bad))
    with pytest.raises(ConfigError):
        load_config(p)
    assert main(["sweep", "--config", str(p), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_unreadable_config(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    assert main(["sweep", "--config", str(p), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_csv_round_trip(tmp_path):
    rows = [[0.5, -0.25, 0.0, 1e-7, 0.123456789, 0.333333, 3, 0, 12, 400],
            [0.1, 0.2, 0.3, 0.4, 0.0, float("nan"), 1, 2, 3, 4]]
    path = tmp_path / "m.csv"
    write_csv(path, METRICS_HEADER, rows)
    text = path.read_bytes()
    assert b"\r" not in text
    _, back = read_csv(path, METRICS_HEADER)
    write_csv(tmp_path / "again.csv", METRICS_HEADER, back)
    assert (tmp_path / "again.csv").read_bytes() == text
    assert back[0][4] == 0.123457 and back[0][3] == 1e-7 and math.isnan(back[1][5])
    train = [[0.5, 0.5, 0.5, -0.5, "de", 3, None, True, 0.25], [0.5, 0.5, 0.5, -0.5, "gss", 1, 17, False, 0.0]]
    write_csv(tmp_path / "t.csv", TRAINING_HEADER, train)
    _, back = read_csv(tmp_path / "t.csv", TRAINING_HEADER)
    assert back[0][6] is None and back[0][7] == 1 and back[1][6] == 17
    assert fmt(np.int64(7)) == "7" and fmt(np.float64(2.5)) == "2.5" and parse("x") == "x"


def test_stratified_sample():
    rows = [[0, 0, 0, 0, m] for m in [0.0] * 12 + [0.1, 0.2, 0.3, 0.4]]
    pick = stratified_sample(rows, 4, seed=0)
    assert len(pick) == 4 and pick == sorted(set(pick))
    assert sum(rows[i][4] > 0 for i in pick) >= 1  # top quarter is all positive
    assert stratified_sample(rows, 4, seed=0) == pick
    assert stratified_sample(rows, 0, seed=0) == list(range(16))


def test_pipeline_end_to_end(tiny_config, tmp_path):
    out = tmp_path / "run"
    assert run(tiny_config, out, "sweep", "train", "coopt", "report") == [0, 0, 0, 0]
    _, metrics = read_csv(out / "metrics.csv", METRICS_HEADER)
    assert len(metrics) == 16
    _, training = read_csv(out / "train" / "training.csv", TRAINING_HEADER)
    assert len(training) == 4 * 4 * 2
    _, corr = read_csv(out / "train" / "correlations.csv")
    assert len(corr) == 8
    runs = sorted((out / "coopt" / "runs").glob("*.csv"))
    assert len(runs) == 6
    _, mw = read_csv(out / "coopt" / "mann_whitney.csv")
    assert mw[0][3] == mw[0][4] == 3
    _, dtw_rows = read_csv(out / "coopt" / "dtw_curve.csv")
    assert len(dtw_rows) == 60 // 10
    report = json.loads((out / "report.json").read_text())
    for key in ("best_m_l_design", "correlations", "u_test_p", "dtw_trend_slope"):
        assert key in report
    best = max(metrics, key=lambda r: r[4])
    assert report["best_m_l_design"]["m_l"] == best[4]
    resolved = json.loads((out / "resolved_config.json").read_text())
    assert resolved["weight_bins"] == 5

    # idempotent: rerunning with resume leaves every table byte-identical
    before = {p: p.read_bytes() for p in out.rglob("*.csv") if p.name != "progress.csv"}
    assert run(tiny_config, out, "sweep", "train", "coopt", resume=True) == [0, 0, 0]
    for p, data in before.items():
        assert p.read_bytes() == data, p


def test_worker_invariance(tiny_config, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run(tiny_config, a, "sweep", "train", workers=1)
    run(tiny_config, b, "sweep", "train", workers=2)
    for rel in ("metrics.csv", "train/training.csv", "train/correlations.csv"):
        assert (a / rel).read_bytes() == (b / rel).read_bytes()


def test_train_resume_after_interruption(tiny_config, tmp_path):
    out = tmp_path / "r"
    run(tiny_config, out, "sweep", "train")
    full = (out / "train" / "training.csv").read_bytes()
    progress = out / "train" / "progress.csv"
    lines = progress.read_text().splitlines(keepends=True)
    progress.write_text("".join(lines[:12]))
    (out / "train" / "training.csv").unlink()
    assert run(tiny_config, out, "train", resume=True) == [0]
    assert (out / "train" / "training.csv").read_bytes() == full


def test_exit_codes(tiny_config, tmp_path):
    out = tmp_path / "x"
    assert run(tiny_config, out, "train") == [EXIT_INPUT]
    assert run(tiny_config, out, "report") == [EXIT_INPUT]
    assert run(tiny_config, out, "sweep") == [0]
    other = tmp_path / "other.json"
    other.write_text(json.dumps({**TINY, "max_steps": 1400}))
    assert run(other, out, "sweep", resume=True) == [EXIT_CHECKPOINT]
    ck = out / "sweep.ckpt"
    ck.write_bytes(b"junk")
    assert run(tiny_config, out, "sweep", resume=True) == [EXIT_INPUT]


def test_coopt_partial_run_is_reported(tiny_config, tmp_path):
    out = tmp_path / "c"
    assert run(tiny_config, out, "coopt") == [0]
    victim = sorted((out / "coopt" / "runs").glob("*.csv"))[0]
    lines = victim.read_text().splitlines(keepends=True)
    victim.write_text("".join(lines[:20]))
    assert run(tiny_config, out, "coopt", resume=True) == [EXIT_INPUT]
    assert run(tiny_config, out, "coopt") == [0]  # without resume the run is redone

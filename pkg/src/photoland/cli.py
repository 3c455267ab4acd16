"""Command-line driver: ``sweep``, ``train``, ``coopt`` and ``report``.

Each command reads a resolved :class:`RunConfig`, writes ``resolved_config.json``
next to its outputs and leaves plain CSV/JSON tables in the output directory::

    out/
      metrics.csv  sweep.ckpt
      train/training.csv  train/correlations.csv  train/efficiency.csv  train/progress.csv
      coopt/runs/<mode>_seed<NN>.csv  coopt/summary.csv  coopt/mann_whitney.csv
      coopt/success_curves.csv  coopt/dtw_curve.csv
      report.json

Exit codes: 0 success, 2 bad configuration, 3 checkpoint from another
configuration, 4 missing or corrupt input.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import coopt as co
from .config import SCALES, ConfigError, load_config
from .dynamics import Design
from .landscape import CheckpointCorruptError, CheckpointMismatchError, design_grid, sweep
from .optimize import censored_mean, iter_train_units
from .rng import make_rng
from .stats import DegenerateVarianceError, mann_whitney_u, pearson
from .tables import (
    COOPT_RUN_HEADER, COOPT_SUMMARY_HEADER, CORRELATION_HEADER, METRICS_HEADER,
    TRAINING_HEADER, TableError, fmt, read_csv, write_csv,
)

log = logging.getLogger("photoland")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CHECKPOINT = 3
EXIT_INPUT = 4


class MissingInputError(RuntimeError):
    pass


def _outdir(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "resolved_config.json").write_text(cfg.to_json(), encoding="utf-8")
    return out


def _read(path, header):
    if not Path(path).exists():
        raise MissingInputError(f"missing input {path}; run the earlier stage first")
    try:
        return read_csv(path, header)[1]
    except (TableError, csv.Error, UnicodeDecodeError) as exc:
        raise MissingInputError(f"corrupt input {path}: {exc}") from exc


# -- sweep ----------------------------------------------------------------------

def cmd_sweep(cfg, resume=False):
    out = _outdir(cfg)
    metrics = sweep(cfg.grid(), cfg.envs(), cfg.sim(), workers=cfg.workers,
                    checkpoint=out / "sweep.ckpt", resume=resume)
    rows = [list(m.design.as_vector()) + [m.m_l, m.m_ci, *m.counts] for m in metrics]
    write_csv(out / "metrics.csv", METRICS_HEADER, rows)
    log.info("wrote %d designs to %s", len(rows), out / "metrics.csv")
    return out / "metrics.csv"


# -- train ----------------------------------------------------------------------

def stratified_sample(rows, n, seed):
    """``n/4`` designs from each quarter of the designs ranked by m_l (ties by grid order)."""
    if n == 0 or n >= len(rows):
        return list(range(len(rows)))
    order = sorted(range(len(rows)), key=lambda i: (rows[i][4], i))
    quarters = np.array_split(np.array(order), 4)
    picked = []
    for q, members in enumerate(quarters):
        rng = make_rng(seed, "stratify", q)
        picked.extend(int(i) for i in rng.choice(members, n // 4, replace=False))
    return sorted(picked)


def _design_key(vec):
    return tuple(float(fmt(v)) for v in vec)


def cmd_train(cfg, resume=False):
    out = _outdir(cfg)
    rows = _read(out / "metrics.csv", METRICS_HEADER)
    chosen = [rows[i] for i in stratified_sample(rows, cfg.train_designs, cfg.study_seed)]
    envs, sim = cfg.envs(), cfg.sim()
    units = [(tuple(r[:4]), m, s, envs, sim, cfg.train_budget)
             for r in chosen for m in cfg.methods for s in cfg.train_seeds]

    tdir = out / "train"
    tdir.mkdir(exist_ok=True)
    progress = tdir / "progress.csv"
    done = {}
    if resume and progress.exists():
        for r in _read_progress(progress):
            done[(_design_key(r[:4]), r[4], r[5])] = r
    else:
        progress.write_text(",".join(TRAINING_HEADER) + "\n", encoding="utf-8")
    todo = [u for u in units if (_design_key(u[0]), u[1], u[2]) not in done]
    log.info("training %d of %d runs on %d worker(s)", len(todo), len(units), cfg.workers)
    with open(progress, "a", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for (dvec, run), u in zip(iter_train_units(todo, cfg.workers), todo):
            row = list(dvec) + [run.method, run.seed, run.evals_to_full_success,
                                run.censored, run.best_loss]
            w.writerow([fmt(v) for v in row])
            fh.flush()
            done[(_design_key(u[0]), u[1], u[2])] = [float(fmt(v)) for v in dvec] + row[4:]

    table = [done[(_design_key(u[0]), u[1], u[2])] for u in units]
    write_csv(tdir / "training.csv", TRAINING_HEADER, table)

    eff_rows, corr_rows = [], []
    metric_of = {_design_key(r[:4]): (r[4], r[5]) for r in chosen}
    for method in cfg.methods:
        per_design = []
        for r in chosen:
            key = _design_key(r[:4])
            evals = [cfg.train_budget if t[7] else t[6] for t in table if _design_key(t[:4]) == key and t[4] == method]
            per_design.append(float(np.mean(evals)))
            eff_rows.append(list(r[:4]) + [r[4], r[5], method, per_design[-1]])
        for mi, metric in enumerate(("m_l", "m_ci")):
            xs = [metric_of[_design_key(r[:4])][mi] for r in chosen]
            try:
                rep = pearson(xs, per_design)
                corr_rows.append([metric, method, rep.r, rep.p, rep.n])
            except (DegenerateVarianceError, ValueError) as exc:
                log.warning("no correlation for %s/%s: %s", metric, method, exc)
                corr_rows.append([metric, method, float("nan"), float("nan"), len(xs)])
    write_csv(tdir / "efficiency.csv",
              ["l1x", "l1y", "l2x", "l2y", "m_l", "m_ci", "method", "mean_evals"], eff_rows)
    write_csv(tdir / "correlations.csv", CORRELATION_HEADER, corr_rows)
    return tdir / "correlations.csv"


def _read_progress(path):
    try:
        _, rows = read_csv(path, TRAINING_HEADER)
    except (TableError, csv.Error) as exc:
        raise MissingInputError(f"corrupt training progress {path}: {exc}") from exc
    return rows


# -- coopt ----------------------------------------------------------------------

def _run_path(cdir, mode, seed):
    return cdir / "runs" / f"{mode}_seed{seed:02d}.csv"


def _write_run(path, run):
    rows = [[i, run.best_success[i], run.dtw_scores[i], run.success_counts[i],
             bool(run.archive_accepted[i]), run.incumbent_ids[i]] for i in range(run.budget)]
    write_csv(path, COOPT_RUN_HEADER, rows)
    sidecar = {"seed": run.seed, "mode": run.mode, "final_id": run.final.id,
               "final_sum": run.final.total, "final_success_count": run.final.success_count,
               "final_vars": run.final.vars.tolist(), "meta": run.meta}
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=1) + "\n", encoding="utf-8")


class _LoadedRun:
    """The parts of a finished run the summaries need, rebuilt from its files."""

    def __init__(self, path, budget):
        rows = _read(path, COOPT_RUN_HEADER)
        side = path.with_suffix(".json")
        if len(rows) != budget or not side.exists():
            raise MissingInputError(f"partial co-optimization run {path}")
        try:
            info = json.loads(side.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise MissingInputError(f"corrupt run sidecar {side}: {exc}") from exc
        a = np.array([[np.nan if v is None or v == "nan" else v for v in r] for r in rows], dtype=float)
        if not np.array_equal(a[:, 0], np.arange(budget)):
            raise MissingInputError(f"run {path} is out of order")
        self.seed, self.mode = info["seed"], info["mode"]
        self.best_success = a[:, 1].astype(np.int64)
        self.dtw_scores = a[:, 2]
        self.incumbent_ids = a[:, 5].astype(np.int64)
        self.final_sum = info["final_sum"]
        self.final_success_count = info["final_success_count"]
        self.final_vars = info["final_vars"]


def cmd_coopt(cfg, resume=False):
    out = _outdir(cfg)
    cdir = out / "coopt"
    (cdir / "runs").mkdir(parents=True, exist_ok=True)
    envs, sim = cfg.envs(), cfg.sim()
    loaded = {}
    for mode in co.MODES:
        score = cfg.coopt_dtw and mode == co.FREE
        todo = []
        for s in cfg.coopt_seeds:
            path = _run_path(cdir, mode, s)
            if resume and path.exists():
                loaded[mode, s] = _LoadedRun(path, cfg.coopt_budget)
            else:
                todo.append(s)
        log.info("co-optimizing %s: %d of %d seeds", mode, len(todo), len(cfg.coopt_seeds))
        for run in co.coopt_many(mode, todo, envs, sim, cfg.coopt_budget, score, cfg.workers):
            path = _run_path(cdir, mode, run.seed)
            _write_run(path, run)
            loaded[mode, run.seed] = _LoadedRun(path, cfg.coopt_budget)

    runs = {m: [loaded[m, s] for s in cfg.coopt_seeds] for m in co.MODES}
    summary = []
    for m in co.MODES:
        for r in runs[m]:
            v = r.final_vars if m == co.FREE else list(Design.baseline().as_vector()) + r.final_vars
            summary.append([r.seed, m, r.final_sum, r.final_success_count, *v])
    write_csv(cdir / "summary.csv", COOPT_SUMMARY_HEADER, summary)

    final = {m: [int(r.best_success[-1]) for r in runs[m]] for m in co.MODES}
    mw = mann_whitney_u(final[co.FREE], final[co.FIXED], alternative="greater")
    write_csv(cdir / "mann_whitney.csv",
              ["alternative", "u", "p", "n1", "n2", "mean_free", "mean_fixed"],
              [[mw.alternative, mw.u, mw.p, mw.n1, mw.n2,
                float(np.mean(final[co.FREE])), float(np.mean(final[co.FIXED]))]])

    curves = []
    for m in co.MODES:
        mean, half = co.average_success_curve([r.best_success for r in runs[m]])
        curves.append((mean, half))
    write_csv(cdir / "success_curves.csv",
              ["eval_index", "free_mean", "free_ci_low", "free_ci_high",
               "fixed_mean", "fixed_ci_low", "fixed_ci_high"],
              [[i, curves[0][0][i], curves[0][0][i] - curves[0][1][i], curves[0][0][i] + curves[0][1][i],
                curves[1][0][i], curves[1][0][i] - curves[1][1][i], curves[1][0][i] + curves[1][1][i]]
               for i in range(cfg.coopt_budget)])

    if cfg.coopt_dtw:
        starts, inc, cand = co.dtw_curve(runs[co.FREE], cfg.coopt_bin_width)
        write_csv(cdir / "dtw_curve.csv", ["bin_start", "incumbent_dtw", "candidate_dtw"],
                  [[int(b), i, c] for b, i, c in zip(starts, inc, cand)])
    return cdir


# -- report ---------------------------------------------------------------------

def cmd_report(cfg):
    out = Path(cfg.out)
    metrics = _read(out / "metrics.csv", METRICS_HEADER)
    corr = _read(out / "train" / "correlations.csv", CORRELATION_HEADER)
    mw = _read(out / "coopt" / "mann_whitney.csv", None)
    dtw_rows = _read(out / "coopt" / "dtw_curve.csv", ["bin_start", "incumbent_dtw", "candidate_dtw"])

    best = max(range(len(metrics)), key=lambda i: (metrics[i][4], -i))
    b = metrics[best]
    x = np.array([r[0] for r in dtw_rows], dtype=float)
    y = np.array([r[1] for r in dtw_rows], dtype=float)
    slope = float(np.polyfit(x, y, 1)[0]) if len(x) > 1 else float("nan")
    try:
        trend = pearson(x, y)
        trend_r, trend_p = trend.r, trend.p
    except (DegenerateVarianceError, ValueError):
        trend_r = trend_p = float("nan")
    report = {
        "best_m_l_design": {"l1": b[0:2], "l2": b[2:4], "m_l": b[4], "m_ci": b[5]},
        "correlations": [{"metric": r[0], "method": r[1], "r": r[2], "p": r[3], "n": r[4]} for r in corr],
        "u_test_p": mw[0][2],
        "dtw_trend_slope": slope,
        "dtw_trend_r": trend_r,
        "dtw_trend_p": trend_p,
        "coopt_mean_final_success": {"free": mw[0][5], "fixed": mw[0][6]},
    }
    path = out / "report.json"
    path.write_text(json.dumps(report, indent=2, allow_nan=True) + "\n", encoding="utf-8")
    return path


# -- entry point ----------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="photoland", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("sweep", "train", "coopt", "report"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON file with RunConfig overrides")
        sp.add_argument("--scale", choices=SCALES)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--out")
        sp.add_argument("--resume", action="store_true", help="reuse finished work in --out")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        cfg = load_config(args.config, args.scale, workers=args.workers, out=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "sweep":
            cmd_sweep(cfg, args.resume)
        elif args.command == "train":
            cmd_train(cfg, args.resume)
        elif args.command == "coopt":
            cmd_coopt(cfg, args.resume)
        else:
            print(cmd_report(cfg))
    except CheckpointMismatchError as exc:
        print(f"checkpoint mismatch: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except (MissingInputError, CheckpointCorruptError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Joint search over sensor placement and policy with an epsilon-box archive.

Each environment's loss is a separate objective.  The search is a reduced
Borg-style steady-state MOEA:

* an epsilon-dominance archive (one member per epsilon box);
* three variation operators (simulated binary crossover, differential
  evolution, uniform mutation) picked with probability proportional to the
  number of current archive members each one produced, plus one;
* a restart that reseeds the population around the archive after a stretch
  of evaluations without any archive change.

In ``fixed-baseline`` mode the sensors stay at the baseline placement and only
the two weights are searched.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    DESIGN_HI, DESIGN_LO, WEIGHT_HI, WEIGHT_LO, Design, Policy, SimConfig,
    default_environments, evaluate_batch, simulate,
)
from .optimize import de_trial
from .rng import make_rng
from .stats import DTW_MAX_POINTS, design_dtw_score

FREE = "free-design"
FIXED = "fixed-baseline"
MODES = (FREE, FIXED)

EPSILON = 0.05
POPSIZE = 36
STAGNATION = 200
SBX_ETA = 15.0
DE_F = 0.7
DE_CR = 0.9
OPERATORS = ("sbx", "de", "um")


class EmptyArchiveError(ValueError):
    pass


@dataclass
class Candidate:
    id: int
    vars: np.ndarray
    objectives: np.ndarray
    success_count: int
    operator: str = "init"

    @property
    def total(self):
        return float(np.sum(self.objectives))


@dataclass
class EpsilonArchive:
    epsilons: np.ndarray
    members: list = field(default_factory=list)

    def __post_init__(self):
        self.epsilons = np.asarray(self.epsilons, dtype=float)
        if np.any(self.epsilons <= 0):
            raise ValueError("epsilons must be positive")

    def __len__(self):
        return len(self.members)


@dataclass
class CooptRun:
    seed: int
    mode: str
    budget: int
    best_success: np.ndarray
    candidate_ids: np.ndarray
    success_counts: np.ndarray
    totals: np.ndarray
    archive_accepted: np.ndarray
    incumbent_ids: np.ndarray
    dtw_scores: np.ndarray
    final: Candidate
    archive: EpsilonArchive
    meta: dict = field(default_factory=dict)


def _boxes(f, eps):
    return np.floor(np.asarray(f, dtype=float) / eps)


def _corner_dist2(f, box, eps):
    return float(np.sum((np.asarray(f, dtype=float) - box * eps) ** 2))


def _same_box_order(a, b, box, eps):
    """-1 if ``a`` is strictly closer to the box corner, 1 if ``b`` is, 0 on a tie."""
    da, db = _corner_dist2(a, box, eps), _corner_dist2(b, box, eps)
    tol = 1e-12 * max(da, db, 1e-300)
    if da < db - tol:
        return -1
    if db < da - tol:
        return 1
    return 0


def epsilon_dominates(a, b, eps):
    """Whether objective vector ``a`` epsilon-box dominates ``b`` (minimization)."""
    eps = np.broadcast_to(np.asarray(eps, dtype=float), np.shape(a))
    ba, bb = _boxes(a, eps), _boxes(b, eps)
    if np.array_equal(ba, bb):
        return _same_box_order(a, b, ba, eps) < 0
    return bool(np.all(ba <= bb) and np.any(ba < bb))


def archive_insert(arch, c):
    """Offer ``c`` to the archive; returns (archive, accepted).

    Rejected if a member dominates it or already holds its box at least as
    close to the corner; on acceptance every member it dominates is dropped.
    """
    eps = arch.epsilons
    bc = _boxes(c.objectives, eps)
    for m in arch.members:
        bm = _boxes(m.objectives, eps)
        if np.array_equal(bm, bc):
            if _same_box_order(c.objectives, m.objectives, bc, eps) >= 0:
                return arch, False
        elif np.all(bm <= bc) and np.any(bm < bc):
            return arch, False
    arch.members = [m for m in arch.members if not epsilon_dominates(c.objectives, m.objectives, eps)]
    arch.members.append(c)
    return arch, True


def final_solution(arch):
    """Archive member with the smallest summed objectives (lowest id on ties)."""
    if not arch.members:
        raise EmptyArchiveError("archive is empty")
    return min(arch.members, key=lambda m: (m.total, m.id))


def pareto_dominates(a, b):
    return bool(np.all(a <= b) and np.any(a < b))


# -- variation -----------------------------------------------------------------

def sbx(p1, p2, lo, hi, rng, eta=SBX_ETA):
    """Simulated binary crossover; one child, each variable crossed with probability 1/2."""
    child = p1.copy()
    for j in range(p1.size):
        if rng.random() >= 0.5 or abs(p1[j] - p2[j]) < 1e-14:
            continue
        u = rng.random()
        if u <= 0.5:
            beta = (2.0 * u) ** (1.0 / (eta + 1.0))
        else:
            beta = (1.0 / (2.0 * (1.0 - u))) ** (1.0 / (eta + 1.0))
        c1 = 0.5 * ((1 + beta) * p1[j] + (1 - beta) * p2[j])
        c2 = 0.5 * ((1 - beta) * p1[j] + (1 + beta) * p2[j])
        child[j] = c1 if rng.random() < 0.5 else c2
    return np.clip(child, lo, hi)


def uniform_mutation(p, lo, hi, rng, rate=None):
    """Redraw each variable uniformly with probability ``rate`` (default 1/dim), at least one."""
    rate = 1.0 / p.size if rate is None else rate
    child = p.copy()
    mask = rng.random(p.size) < rate
    if not mask.any():
        mask[rng.integers(p.size)] = True
    child[mask] = rng.uniform(lo[mask], hi[mask])
    return child


def operator_probabilities(archive):
    credit = np.ones(len(OPERATORS))
    for m in archive.members:
        if m.operator in OPERATORS:
            credit[OPERATORS.index(m.operator)] += 1
    return credit / credit.sum()


# -- run -----------------------------------------------------------------------

def _bounds(mode):
    if mode == FREE:
        lo = np.array([DESIGN_LO] * 4 + [WEIGHT_LO] * 2)
        hi = np.array([DESIGN_HI] * 4 + [WEIGHT_HI] * 2)
    elif mode == FIXED:
        lo = np.array([WEIGHT_LO] * 2)
        hi = np.array([WEIGHT_HI] * 2)
    else:
        raise ValueError(f"unknown mode {mode!r}; choose from {MODES}")
    return lo, hi


def split_vars(mode, x):
    """(design, policy) for a decision vector in the given mode."""
    if mode == FREE:
        return Design.from_vector(x[:4]), Policy(x[4], x[5])
    return Design.baseline(), Policy(x[0], x[1])


def trace_config(cfg, max_points=DTW_MAX_POINTS):
    """Copy of ``cfg`` that records sensor traces with at most ``max_points`` samples."""
    stride = max(cfg.sensor_stride, -(-cfg.max_steps // max_points))
    return SimConfig(dt=cfg.dt, max_steps=cfg.max_steps, light_radius=cfg.light_radius,
                     record_sensors=True, sensor_stride=stride, distance_floor=cfg.distance_floor)


class _Evaluator:
    def __init__(self, mode, envs, cfg, score_dtw):
        self.mode = mode
        self.envs = envs
        self.cfg = cfg
        self.score_dtw = score_dtw
        self.tcfg = trace_config(cfg) if score_dtw else None

    def __call__(self, x):
        design, policy = split_vars(self.mode, x)
        if self.score_dtw:
            results = [simulate(design, policy, s, self.tcfg) for s in self.envs]
            md = np.array([r.min_distance for r in results])
            losses = np.maximum(0.0, md - self.cfg.light_radius)
            count = int(sum(bool(r.success) for r in results))
            return losses, count, design_dtw_score(results).aggregate
        losses, succ = evaluate_batch(design.as_vector(), policy.as_vector()[None, :], self.envs, self.cfg)
        return losses[0], int(succ[0].sum()), math.nan


def _tournament(pop, rng):
    a, b = rng.choice(len(pop), 2, replace=False)
    ca, cb = pop[a], pop[b]
    if pareto_dominates(ca.objectives, cb.objectives):
        return ca
    if pareto_dominates(cb.objectives, ca.objectives):
        return cb
    return ca if (ca.total, ca.id) <= (cb.total, cb.id) else cb


def _update_population(pop, child, rng):
    dominated = [i for i, m in enumerate(pop) if pareto_dominates(child.objectives, m.objectives)]
    if dominated:
        pop[dominated[rng.integers(len(dominated))]] = child
    elif not any(pareto_dominates(m.objectives, child.objectives) for m in pop):
        pop[rng.integers(len(pop))] = child


def coopt_run(mode, envs=None, cfg=None, budget=3000, seed=0, score_dtw=False,
              epsilon=EPSILON, popsize=POPSIZE, stagnation=STAGNATION):
    """One co-optimization run of exactly ``budget`` evaluations."""
    if budget < popsize:
        raise ValueError(f"budget must cover the initial population ({popsize})")
    envs = envs or default_environments()
    cfg = cfg or SimConfig()
    lo, hi = _bounds(mode)
    rng = make_rng(seed, "coopt", mode)
    evaluate = _Evaluator(mode, envs, cfg, score_dtw)
    archive = EpsilonArchive(np.full(len(envs), epsilon))

    queue = [rng.uniform(lo, hi) for _ in range(popsize)]
    pop = []
    best = 0
    last_change = 0
    restarts = 0
    log = {k: np.empty(budget) for k in ("best", "count", "total", "accepted", "incumbent", "dtw")}

    for n in range(budget):
        if queue:
            x, op = queue.pop(0), "init" if restarts == 0 else "restart"
        else:
            op = OPERATORS[rng.choice(len(OPERATORS), p=operator_probabilities(archive))]
            parent = archive.members[rng.integers(len(archive))].vars
            if op == "sbx":
                x = sbx(parent, _tournament(pop, rng).vars, lo, hi, rng)
            elif op == "de":
                others = [_tournament(pop, rng).vars for _ in range(3)]
                x = de_trial(np.vstack([parent] + others), 0, DE_F, DE_CR, lo, hi, rng)
            else:
                x = uniform_mutation(parent, lo, hi, rng)
        losses, count, dtw = evaluate(x)
        cand = Candidate(n, x, losses, count, op)
        _, accepted = archive_insert(archive, cand)
        if accepted:
            last_change = n
        if len(pop) < popsize:
            pop.append(cand)
        else:
            _update_population(pop, cand, rng)
        best = max(best, count)
        log["best"][n] = best
        log["count"][n] = count
        log["total"][n] = cand.total
        log["accepted"][n] = accepted
        log["incumbent"][n] = final_solution(archive).id
        log["dtw"][n] = dtw
        if not queue and n - last_change >= stagnation:
            restarts += 1
            last_change = n
            pop = list(archive.members)
            queue = [uniform_mutation(archive.members[rng.integers(len(archive))].vars, lo, hi, rng)
                     for _ in range(max(0, popsize - len(pop)))]

    meta = {
        "algorithm": "epsilon-archive steady-state MOEA (reduced Borg)",
        "epsilon": epsilon, "popsize": popsize, "stagnation": stagnation,
        "operators": list(OPERATORS), "sbx_eta": SBX_ETA, "de_F": DE_F, "de_CR": DE_CR,
        "um_rate": "1/dim", "restarts": restarts,
    }
    return CooptRun(seed, mode, budget, log["best"].astype(np.int64),
                    np.arange(budget), log["count"].astype(np.int64), log["total"],
                    log["accepted"].astype(bool), log["incumbent"].astype(np.int64), log["dtw"],
                    final_solution(archive), archive, meta)


def average_success_curve(runs):
    """Per-evaluation mean best-so-far success count and 95% normal half-width."""
    curves = np.array([r.best_success if hasattr(r, "best_success") else r for r in runs], dtype=float)
    if curves.ndim != 2:
        raise ValueError("runs must share one budget")
    n = curves.shape[0]
    mean = curves.mean(axis=0)
    if n < 2:
        return mean, np.zeros_like(mean)
    return mean, 1.96 * curves.std(axis=0, ddof=1) / math.sqrt(n)


def binned_mean(values_per_run, bin_width):
    """Mean of each run's values over consecutive evaluation bins, averaged across runs."""
    v = np.asarray(values_per_run, dtype=float)
    if v.ndim != 2 or bin_width < 1:
        raise ValueError("need (runs, evals) values and a positive bin width")
    nbins = v.shape[1] // bin_width
    v = v[:, :nbins * bin_width].reshape(v.shape[0], nbins, bin_width)
    return v.mean(axis=2).mean(axis=0)


def incumbent_dtw(run):
    """Per-evaluation DTW score of the archive's current best design."""
    return run.dtw_scores[run.incumbent_ids]


def dtw_curve(runs, bin_width):
    """Binned mean DTW of the incumbent design and of all evaluated candidates.

    Returns (bin_starts, incumbent_curve, candidate_curve).
    """
    inc = binned_mean([incumbent_dtw(r) for r in runs], bin_width)
    cand = binned_mean([r.dtw_scores for r in runs], bin_width)
    return np.arange(inc.size) * bin_width, inc, cand


def _run_unit(args):
    return coopt_run(*args)


def coopt_many(mode, seeds, envs, cfg, budget, score_dtw=False, workers=1):
    units = [(mode, envs, cfg, budget, s, score_dtw) for s in seeds]
    if workers > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_unit, units, chunksize=1))
    return [_run_unit(u) for u in units]

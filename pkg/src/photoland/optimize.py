"""Derivative-free policy training and the per-design sample-efficiency study.

Four optimizers share one bookkeeping wrapper that counts objective calls,
tracks the best loss seen so far and stops the run at the first evaluation
that solves every environment.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .dynamics import WEIGHT_HI, WEIGHT_LO, Design, SimConfig, default_environments, evaluate_batch
from .rng import make_rng

METHODS = ("random", "gss", "snes", "de")

# Hyperparameters recorded with every run.
GSS_STEP0 = 0.25
GSS_MIN_STEP = 1e-8
DE_POPSIZE = 20
DE_F = 0.7
DE_CR = 0.9
SNES_SIGMA0 = 0.3


class UnknownMethodError(ValueError):
    pass


@dataclass
class Objective:
    """Black-box loss over a box.  ``evaluate(x) -> (loss, success_count)``."""

    evaluate: Callable
    bounds: np.ndarray
    target: int = 4

    def __post_init__(self):
        self.bounds = np.asarray(self.bounds, dtype=float).reshape(-1, 2)

    @property
    def dim(self):
        return self.bounds.shape[0]

    @property
    def lo(self):
        return self.bounds[:, 0]

    @property
    def hi(self):
        return self.bounds[:, 1]


@dataclass
class TrainRun:
    method: str
    seed: int
    budget: int
    evals_used: int
    evals_to_full_success: Optional[int]
    best_loss: float
    best_params: np.ndarray
    success_curve: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def censored(self):
        return self.evals_to_full_success is None


class _Budget(Exception):
    """Raised inside an optimizer loop once it must stop."""


class _Tracker:
    def __init__(self, obj, budget):
        if budget < 1:
            raise ValueError("budget must be >= 1")
        self.obj = obj
        self.budget = int(budget)
        self.n = 0
        self.best_loss = math.inf
        self.best_params = None
        self.best_count = 0
        self.curve = []
        self.hit = None

    def __call__(self, x):
        if self.n >= self.budget or self.hit is not None:
            raise _Budget
        x = np.clip(np.asarray(x, dtype=float), self.obj.lo, self.obj.hi)
        loss, count = self.obj.evaluate(x)
        self.n += 1
        if loss < self.best_loss:
            self.best_loss = float(loss)
            self.best_params = x.copy()
        self.best_count = max(self.best_count, int(count))
        self.curve.append(self.best_count)
        if count >= self.obj.target and self.hit is None:
            self.hit = self.n
        if self.hit is not None:
            raise _Budget
        return float(loss)

    def result(self, method, seed, meta):
        return TrainRun(method, seed, self.budget, self.n, self.hit, self.best_loss,
                        self.best_params, np.asarray(self.curve, dtype=np.int64), meta)


def _rng(seed, method):
    if isinstance(seed, (int, np.integer)):
        return make_rng(seed, method)
    return seed


def _run(method, obj, budget, seed, body, meta):
    track = _Tracker(obj, budget)
    try:
        body(track, _rng(seed, method))
    except _Budget:
        pass
    return track.result(method, int(seed) if isinstance(seed, (int, np.integer)) else -1, meta)


def random_search(obj, budget, seed):
    def body(f, rng):
        while True:
            f(rng.uniform(obj.lo, obj.hi))
    return _run("random", obj, budget, seed, body, {})


def generating_set_search(obj, budget, seed, x0=None, step0=GSS_STEP0, min_step=GSS_MIN_STEP):
    """Compass search on the box.

    The step is a fraction of each dimension's span.  Polls +e1, -e1, +e2, ...
    and moves to the first improving point (step doubles, capped at the full
    span); a poll with no improvement halves the step.  Below ``min_step`` the
    search restarts from a uniform random point.
    """
    span = obj.hi - obj.lo
    dirs = []
    for i in range(obj.dim):
        for sign in (1.0, -1.0):
            e = np.zeros(obj.dim)
            e[i] = sign
            dirs.append(e)

    def body(f, rng):
        x = rng.uniform(obj.lo, obj.hi) if x0 is None else np.asarray(x0, dtype=float)
        fx = f(x)
        step = step0
        while True:
            improved = False
            for e in dirs:
                y = np.clip(x + step * span * e, obj.lo, obj.hi)
                if np.array_equal(y, x):
                    continue
                fy = f(y)
                if fy < fx:
                    x, fx = y, fy
                    improved = True
                    break
            if improved:
                step = min(2.0 * step, 1.0)
            else:
                step *= 0.5
                if step < min_step:
                    x = rng.uniform(obj.lo, obj.hi)
                    fx = f(x)
                    step = step0

    meta = {"step0": step0, "expand": 2.0, "contract": 0.5, "min_step": min_step}
    return _run("gss", obj, budget, seed, body, meta)


def snes_utilities(lam):
    """Rank-based fitness shaping weights, best rank first; they sum to zero."""
    k = np.arange(1, lam + 1)
    raw = np.maximum(0.0, math.log(lam / 2.0 + 1.0) - np.log(k))
    return raw / raw.sum() - 1.0 / lam


def snes_popsize(dim):
    return 4 + int(math.floor(3.0 * math.log(dim)))


def snes(obj, budget, seed, sigma0=SNES_SIGMA0):
    """Separable natural evolution strategy with rank utilities."""
    d = obj.dim
    lam = snes_popsize(d)
    if budget < lam:
        raise ValueError(f"snes needs a budget of at least one population ({lam})")
    eta_mu = 1.0
    eta_sigma = (3.0 + math.log(d)) / (5.0 * math.sqrt(d))
    util = snes_utilities(lam)

    def body(f, rng):
        mu = rng.uniform(obj.lo, obj.hi)
        sigma = sigma0 * (obj.hi - obj.lo)
        while True:
            z = rng.standard_normal((lam, d))
            fit = np.array([f(mu + sigma * zi) for zi in z])
            order = np.argsort(fit, kind="stable")
            zs = z[order]
            mu = mu + eta_mu * sigma * (util @ zs)
            sigma = sigma * np.exp(0.5 * eta_sigma * (util @ (zs**2 - 1.0)))

    meta = {"popsize": lam, "eta_mu": eta_mu, "eta_sigma": eta_sigma, "sigma0": sigma0}
    return _run("snes", obj, budget, seed, body, meta)


def de_trial(pop, i, F, CR, lo, hi, rng):
    """DE/rand/1/bin trial vector for target ``i`` with bounce-back repair.

    Draw order: three distinct donors (not ``i``), the forced crossover index,
    the crossover mask, then one uniform per out-of-bounds coordinate.
    """
    n, d = pop.shape
    others = [j for j in range(n) if j != i]
    r1, r2, r3 = rng.choice(others, 3, replace=False)
    base = pop[r1]
    donor = base + F * (pop[r2] - pop[r3])
    jrand = rng.integers(d)
    mask = rng.random(d) < CR
    mask[jrand] = True
    trial = np.where(mask, donor, pop[i])
    for j in range(d):
        if trial[j] < lo[j]:
            trial[j] = lo[j] + rng.random() * (base[j] - lo[j])
        elif trial[j] > hi[j]:
            trial[j] = hi[j] - rng.random() * (hi[j] - base[j])
    return trial


def de_generation(pop, fit, f, F, CR, lo, hi, rng):
    """One generation: a trial per target, each kept if no worse than its target."""
    new_pop, new_fit = pop.copy(), fit.copy()
    for i in range(pop.shape[0]):
        trial = de_trial(pop, i, F, CR, lo, hi, rng)
        ft = f(trial)
        if ft <= fit[i]:
            new_pop[i], new_fit[i] = trial, ft
    return new_pop, new_fit


def differential_evolution(obj, budget, seed, popsize=DE_POPSIZE, F=DE_F, CR=DE_CR):
    """Generational DE/rand/1/bin with greedy one-to-one selection."""
    if budget < popsize:
        raise ValueError(f"de needs a budget of at least one population ({popsize})")

    def body(f, rng):
        pop = rng.uniform(obj.lo, obj.hi, (popsize, obj.dim))
        fit = np.array([f(x) for x in pop])
        while True:
            pop, fit = de_generation(pop, fit, f, F, CR, obj.lo, obj.hi, rng)

    meta = {"popsize": popsize, "F": F, "CR": CR, "strategy": "rand/1/bin", "repair": "bounce-back"}
    return _run("de", obj, budget, seed, body, meta)


OPTIMIZERS = {
    "random": random_search,
    "gss": generating_set_search,
    "snes": snes,
    "de": differential_evolution,
}


def policy_objective(design, envs=None, cfg=None):
    """Training loss for a fixed design: summed per-environment shortfall."""
    envs = envs or default_environments()
    cfg = cfg or SimConfig()
    dvec = design.as_vector()

    def evaluate(w):
        losses, succ = evaluate_batch(dvec, w[None, :], envs, cfg)
        return float(losses[0].sum()), int(succ[0].sum())

    bounds = [(WEIGHT_LO, WEIGHT_HI), (WEIGHT_LO, WEIGHT_HI)]
    return Objective(evaluate, bounds, target=len(envs))


def train_design(design, method, envs=None, cfg=None, budget=2000, seeds=(0, 1, 2, 3, 4)):
    if method not in OPTIMIZERS:
        raise UnknownMethodError(f"unknown method {method!r}; choose from {METHODS}")
    obj = policy_objective(design, envs, cfg)
    return [OPTIMIZERS[method](obj, budget, s) for s in seeds]


def censored_mean(runs):
    """Mean evaluations to full success; runs that never got there count as their budget."""
    if not runs:
        raise ValueError("need at least one run")
    return float(np.mean([r.budget if r.censored else r.evals_to_full_success for r in runs]))


def efficiency_table(runs_by_design):
    return {key: censored_mean(runs) for key, runs in runs_by_design.items()}


def _train_unit(args):
    design_vec, method, seed, envs, cfg, budget = args
    run = train_design(Design.from_vector(design_vec), method, envs, cfg, budget, (seed,))[0]
    return tuple(design_vec), run


def iter_train_units(units, workers=1):
    """Yield ``(design_tuple, TrainRun)`` for each ``(design_vec, method, seed, envs, cfg, budget)``
    unit, in submission order whatever the worker count."""
    for u in units:
        if u[1] not in OPTIMIZERS:
            raise UnknownMethodError(f"unknown method {u[1]!r}")
    if workers > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            yield from pool.map(_train_unit, units, chunksize=1)
    else:
        for u in units:
            yield _train_unit(u)


def train_many(designs, methods, seeds, envs, cfg, budget, workers=1):
    """Every (design, method, seed) run, returned in that nested order."""
    units = [(tuple(d.as_vector()), m, s, envs, cfg, budget)
             for d in designs for m in methods for s in seeds]
    return list(iter_train_units(units, workers))

"""Correlation, rank test and dynamic time warping.

The Student-t and normal tail probabilities come from :mod:`scipy.stats`;
everything upstream of them (sums, ranks, DP tables) is computed here.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as _sps

from . import _kernels

DTW_MAX_POINTS = 500


class DegenerateVarianceError(ValueError):
    pass


class MissingTraceError(ValueError):
    pass


@dataclass(frozen=True)
class CorrelationReport:
    r: float
    p: float
    n: int


@dataclass(frozen=True)
class MannWhitneyResult:
    u: float
    p: float
    n1: int
    n2: int
    alternative: str = "two-sided"


@dataclass(frozen=True)
class DTWScore:
    per_sensor: tuple
    aggregate: float


def pearson(xs, ys):
    """Sample Pearson r with a two-sided p-value from the t distribution (n-2 dof)."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("pearson needs two 1-d sequences of equal length")
    n = x.size
    if n < 3:
        raise ValueError("pearson needs at least 3 points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateVarianceError("one of the inputs is constant")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return CorrelationReport(r, 0.0, n)
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    p = float(2.0 * _sps.t.sf(abs(t), n - 2))
    return CorrelationReport(r, min(1.0, p), n)


def midranks(values):
    """1-based ranks with ties sharing the mean of the ranks they span."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="mergesort")
    ranks = np.empty(v.size)
    sorted_v = v[order]
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and sorted_v[j + 1] == sorted_v[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def mann_whitney_u(a, b, alternative="two-sided"):
    """U statistic of ``a`` against ``b`` and its normal-approximation p-value.

    Uses tie-corrected variance and a 0.5 continuity correction.  With
    ``alternative="greater"`` the p-value tests whether ``a`` tends to exceed
    ``b``; ``"less"`` the reverse.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n1, n2 = a.size, b.size
    if n1 < 1 or n2 < 1:
        raise ValueError("both samples need at least one value")
    ranks = midranks(np.concatenate([a, b]))
    u = float(ranks[:n1].sum() - n1 * (n1 + 1) / 2.0)
    mu = n1 * n2 / 2.0
    N = n1 + n2
    _, tie_sizes = np.unique(np.concatenate([a, b]), return_counts=True)
    tie_term = float(np.sum(tie_sizes**3 - tie_sizes))
    var = n1 * n2 / 12.0 * ((N + 1) - (tie_term / (N * (N - 1)) if N > 1 else 0.0))
    if var <= 0.0:
        return MannWhitneyResult(u, 1.0, n1, n2, alternative)
    sd = math.sqrt(var)
    if alternative == "two-sided":
        z = (abs(u - mu) - 0.5) / sd
        p = 2.0 * _sps.norm.sf(z)
    elif alternative == "greater":
        p = _sps.norm.sf((u - mu - 0.5) / sd)
    elif alternative == "less":
        p = _sps.norm.cdf((u - mu + 0.5) / sd)
    else:
        raise ValueError(f"unknown alternative {alternative!r}")
    return MannWhitneyResult(u, float(min(1.0, p)), n1, n2, alternative)


def dtw(a, b):
    """Dynamic time warping cost between two 1-d signals (unnormalized)."""
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("dtw needs non-empty signals")
    return float(_kernels.dtw_cost(a, b))


def stride_to(trace, max_points=DTW_MAX_POINTS):
    """Keep every k-th sample, with the smallest k leaving at most ``max_points``."""
    trace = np.asarray(trace, dtype=float)
    k = max(1, -(-trace.size // max_points))
    return trace[::k]


def design_dtw_score(results, max_points=DTW_MAX_POINTS):
    """Mean pairwise DTW across environments, per sensor and averaged over both."""
    per_sensor = []
    for attr in ("sensor_trace_1", "sensor_trace_2"):
        traces = []
        for r in results:
            t = getattr(r, attr)
            if t is None:
                raise MissingTraceError("simulate with record_sensors=True to score DTW")
            traces.append(stride_to(t, max_points))
        pairs = list(itertools.combinations(range(len(traces)), 2))
        if not pairs:
            raise ValueError("DTW scoring needs at least two environments")
        per_sensor.append(float(np.mean([dtw(traces[i], traces[j]) for i, j in pairs])))
    return DTWScore(tuple(per_sensor), float(np.mean(per_sensor)))

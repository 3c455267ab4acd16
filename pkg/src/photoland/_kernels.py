"""Compiled inner loops for the robot simulation and DTW.

The arithmetic here is written out scalar by scalar and must stay in step with
the readable reference versions in :mod:`photoland.dynamics`; the test suite
checks them against each other.
"""

import math

import numpy as np
from numba import njit

# Status codes returned alongside each trajectory.
OK = 0
DIVERGED = 1


@njit(cache=True)
def simulate_one(l1x, l1y, l2x, l2y, w1, w2, x, y, a,
                 dt, max_steps, radius, floor):
    """Euler-integrate one trajectory.

    Returns (min_distance, success, steps_taken, x, y, alpha, status).
    """
    r2 = radius * radius
    f2 = floor * floor
    dmin2 = x * x + y * y
    if dmin2 <= r2:
        return math.sqrt(dmin2), True, 0, x, y, a, OK
    steps = max_steps
    success = False
    for n in range(max_steps):
        c = math.cos(a)
        s = math.sin(a)
        px = x + (c * l1x - s * l1y)
        py = y + (s * l1x + c * l1y)
        q1 = px * px + py * py
        if q1 < f2:
            q1 = f2
        px = x + (c * l2x - s * l2y)
        py = y + (s * l2x + c * l2y)
        q2 = px * px + py * py
        if q2 < f2:
            q2 = f2
        s1 = 1.0 / q1
        s2 = 1.0 / q2
        u1 = w1 * s1
        u2 = w2 * s2
        v = 0.5 * (u1 + u2)
        x = x + dt * (v * c)
        y = y + dt * (v * s)
        a = a + dt * (u1 - u2)
        d2 = x * x + y * y
        if d2 < dmin2:
            dmin2 = d2
        if d2 <= r2:
            steps = n + 1
            success = True
            break
    status = OK
    if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(a)):
        status = DIVERGED
    return math.sqrt(dmin2), success, steps, x, y, a, status


@njit(cache=True)
def simulate_traced(l1x, l1y, l2x, l2y, w1, w2, x, y, a,
                    dt, max_steps, radius, floor, stride, trace1, trace2):
    """As :func:`simulate_one`, also writing pre-step sensor values every
    ``stride`` steps into ``trace1``/``trace2``.

    Returns (min_distance, success, steps_taken, x, y, alpha, status, n_trace).
    """
    r2 = radius * radius
    f2 = floor * floor
    dmin2 = x * x + y * y
    if dmin2 <= r2:
        return math.sqrt(dmin2), True, 0, x, y, a, OK, 0
    steps = max_steps
    success = False
    nt = 0
    for n in range(max_steps):
        c = math.cos(a)
        s = math.sin(a)
        px = x + (c * l1x - s * l1y)
        py = y + (s * l1x + c * l1y)
        q1 = px * px + py * py
        if q1 < f2:
            q1 = f2
        px = x + (c * l2x - s * l2y)
        py = y + (s * l2x + c * l2y)
        q2 = px * px + py * py
        if q2 < f2:
            q2 = f2
        s1 = 1.0 / q1
        s2 = 1.0 / q2
        if n % stride == 0:
            trace1[nt] = s1
            trace2[nt] = s2
            nt += 1
        u1 = w1 * s1
        u2 = w2 * s2
        v = 0.5 * (u1 + u2)
        x = x + dt * (v * c)
        y = y + dt * (v * s)
        a = a + dt * (u1 - u2)
        d2 = x * x + y * y
        if d2 < dmin2:
            dmin2 = d2
        if d2 <= r2:
            steps = n + 1
            success = True
            break
    status = OK
    if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(a)):
        status = DIVERGED
    return math.sqrt(dmin2), success, steps, x, y, a, status, nt


@njit(cache=True)
def success_grid(l1x, l1y, l2x, l2y, w1s, w2s, starts,
                 dt, max_steps, radius, floor):
    """Binary success tensor of shape (K, len(w1s), len(w2s)).

    Also returns a diverged flag so the caller can raise.
    """
    K = starts.shape[0]
    n1 = w1s.shape[0]
    n2 = w2s.shape[0]
    out = np.zeros((K, n1, n2), dtype=np.uint8)
    diverged = False
    for k in range(K):
        for i in range(n1):
            for j in range(n2):
                res = simulate_one(l1x, l1y, l2x, l2y, w1s[i], w2s[j],
                                   starts[k, 0], starts[k, 1], starts[k, 2],
                                   dt, max_steps, radius, floor)
                if res[1]:
                    out[k, i, j] = 1
                if res[6] != OK:
                    diverged = True
    return out, diverged


@njit(cache=True)
def evaluate_many(designs, policies, starts, dt, max_steps, radius, floor):
    """Min distances and success flags for m (design, policy) rows over K starts.

    ``designs`` is (m, 4), ``policies`` is (m, 2), ``starts`` is (K, 3).
    """
    m = policies.shape[0]
    K = starts.shape[0]
    dmin = np.empty((m, K))
    succ = np.zeros((m, K), dtype=np.bool_)
    diverged = False
    for i in range(m):
        for k in range(K):
            res = simulate_one(designs[i, 0], designs[i, 1], designs[i, 2], designs[i, 3],
                               policies[i, 0], policies[i, 1],
                               starts[k, 0], starts[k, 1], starts[k, 2],
                               dt, max_steps, radius, floor)
            dmin[i, k] = res[0]
            succ[i, k] = res[1]
            if res[6] != OK:
                diverged = True
    return dmin, succ, diverged


@njit(cache=True)
def dtw_cost(a, b):
    """Unnormalized DTW cost, unit-weight symmetric step pattern, |a_i - b_j|."""
    n = a.shape[0]
    m = b.shape[0]
    prev = np.empty(m + 1)
    cur = np.empty(m + 1)
    prev[0] = 0.0
    for j in range(1, m + 1):
        prev[j] = np.inf
    for i in range(1, n + 1):
        cur[0] = np.inf
        ai = a[i - 1]
        for j in range(1, m + 1):
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = abs(ai - b[j - 1]) + best
        prev, cur = cur, prev
    return prev[m]

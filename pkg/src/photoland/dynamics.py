"""Two-sensor phototaxis robot: pose kinematics, sensors and episode rollout.

The light source sits at the origin.  A robot carries two light sensors at
body-frame offsets ``ell1`` and ``ell2``; each sensor reads the inverse square
of its distance to the light.  The two synapse weights map the readings onto a
turning rate and a forward speed::

    x' = v cos(alpha)      y' = v sin(alpha)
    alpha' = w1 s1 - w2 s2       v = (w1 s1 + w2 s2) / 2

Episodes are integrated with explicit Euler steps and stop as soon as the body
centre comes within ``light_radius`` of the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels

DESIGN_LO, DESIGN_HI = -0.5, 0.5
WEIGHT_LO, WEIGHT_HI = -1.0, 1.0

# Front corners of the 0.5 m square frame, mirror-symmetric about the heading.
BASELINE_ELL1 = (0.25, 0.25)
BASELINE_ELL2 = (0.25, -0.25)


class DivergedStateError(FloatingPointError):
    """A pose coordinate became non-finite during integration."""


def _check_vec(name, v, lo, hi):
    v = tuple(float(c) for c in v)
    if len(v) != 2:
        raise ValueError(f"{name} must have two coordinates, got {v!r}")
    for c in v:
        if not (lo <= c <= hi):
            raise ValueError(f"{name}={v!r} outside [{lo}, {hi}]")
    return v


@dataclass(frozen=True)
class Design:
    """Body-frame offsets of the two sensors, in meters."""

    ell1: tuple
    ell2: tuple

    def __post_init__(self):
        object.__setattr__(self, "ell1", _check_vec("ell1", self.ell1, DESIGN_LO, DESIGN_HI))
        object.__setattr__(self, "ell2", _check_vec("ell2", self.ell2, DESIGN_LO, DESIGN_HI))

    @classmethod
    def from_vector(cls, v):
        return cls((v[0], v[1]), (v[2], v[3]))

    @classmethod
    def baseline(cls):
        return cls(BASELINE_ELL1, BASELINE_ELL2)

    def as_vector(self):
        return np.array(self.ell1 + self.ell2, dtype=float)


@dataclass(frozen=True)
class Policy:
    w1: float
    w2: float

    def __post_init__(self):
        w = _check_vec("policy", (self.w1, self.w2), WEIGHT_LO, WEIGHT_HI)
        object.__setattr__(self, "w1", w[0])
        object.__setattr__(self, "w2", w[1])

    def as_vector(self):
        return np.array([self.w1, self.w2], dtype=float)


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    alpha: float = 0.0

    def __post_init__(self):
        for name in ("x", "y", "alpha"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"pose {name} must be finite, got {v}")
            object.__setattr__(self, name, v)

    def as_array(self):
        return np.array([self.x, self.y, self.alpha], dtype=float)


@dataclass(frozen=True)
class SimConfig:
    """Integration and termination settings.

    ``sensor_stride`` only matters when ``record_sensors`` is set: the sensor
    pair read at every ``sensor_stride``-th step is kept.
    """

    dt: float = 0.1
    max_steps: int = 20_000
    light_radius: float = 0.075
    record_sensors: bool = False
    sensor_stride: int = 1
    distance_floor: float = 1e-6

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if int(self.max_steps) < 1:
            raise ValueError("max_steps must be >= 1")
        if not self.light_radius > 0:
            raise ValueError("light_radius must be positive")
        if int(self.sensor_stride) < 1:
            raise ValueError("sensor_stride must be >= 1")
        if not (0 < self.distance_floor < self.light_radius):
            raise ValueError("distance_floor must lie in (0, light_radius)")
        object.__setattr__(self, "max_steps", int(self.max_steps))
        object.__setattr__(self, "sensor_stride", int(self.sensor_stride))

    @classmethod
    def desk(cls, **kw):
        return cls(**kw)

    @classmethod
    def paper(cls, **kw):
        kw.setdefault("max_steps", 100_000)
        return cls(**kw)


@dataclass
class SimResult:
    min_distance: float
    success: bool
    steps_taken: int
    final_pose: Pose
    sensor_trace_1: Optional[np.ndarray] = None
    sensor_trace_2: Optional[np.ndarray] = None


@dataclass(frozen=True)
class EnvironmentSet:
    start_poses: tuple

    def __post_init__(self):
        poses = tuple(self.start_poses)
        if not poses:
            raise ValueError("an environment set needs at least one start pose")
        object.__setattr__(self, "start_poses", poses)

    def __len__(self):
        return len(self.start_poses)

    def __iter__(self):
        return iter(self.start_poses)

    def as_array(self):
        return np.array([p.as_array() for p in self.start_poses], dtype=float)


@dataclass
class EnvEvaluation:
    losses: np.ndarray
    total_loss: float
    success_count: int
    results: list = field(default_factory=list)


def rotate(alpha, p):
    """Rotate the 2-vector ``p`` counterclockwise by ``alpha`` radians."""
    c, s = math.cos(alpha), math.sin(alpha)
    return np.array([c * p[0] - s * p[1], s * p[0] + c * p[1]])


def sensor_intensity(pose, ell, distance_floor=1e-6):
    """Inverse-square reading of a sensor at body offset ``ell``."""
    c, s = math.cos(pose.alpha), math.sin(pose.alpha)
    px = pose.x + (c * ell[0] - s * ell[1])
    py = pose.y + (s * ell[0] + c * ell[1])
    q = max(px * px + py * py, distance_floor * distance_floor)
    return 1.0 / q


def step(state, design, policy, dt, distance_floor=1e-6):
    """One explicit Euler step; sensors are read at the pre-step pose."""
    s1 = sensor_intensity(state, design.ell1, distance_floor)
    s2 = sensor_intensity(state, design.ell2, distance_floor)
    u1 = policy.w1 * s1
    u2 = policy.w2 * s2
    v = 0.5 * (u1 + u2)
    c, s = math.cos(state.alpha), math.sin(state.alpha)
    return Pose(state.x + dt * (v * c),
                state.y + dt * (v * s),
                state.alpha + dt * (u1 - u2))


def simulate(design, policy, start, cfg=None):
    """Roll out one episode from ``start`` and summarize it."""
    cfg = cfg or SimConfig()
    l1x, l1y = design.ell1
    l2x, l2y = design.ell2
    if cfg.record_sensors:
        n = -(-cfg.max_steps // cfg.sensor_stride)
        t1 = np.empty(n)
        t2 = np.empty(n)
        dmin, ok, steps, x, y, a, status, nt = _kernels.simulate_traced(
            l1x, l1y, l2x, l2y, policy.w1, policy.w2, start.x, start.y, start.alpha,
            cfg.dt, cfg.max_steps, cfg.light_radius, cfg.distance_floor,
            cfg.sensor_stride, t1, t2)
        traces = (t1[:nt].copy(), t2[:nt].copy())
    else:
        dmin, ok, steps, x, y, a, status = _kernels.simulate_one(
            l1x, l1y, l2x, l2y, policy.w1, policy.w2, start.x, start.y, start.alpha,
            cfg.dt, cfg.max_steps, cfg.light_radius, cfg.distance_floor)
        traces = (None, None)
    if status != _kernels.OK:
        raise DivergedStateError(
            f"non-finite pose for design={design}, policy={policy}, start={start}")
    return SimResult(float(dmin), bool(ok), int(steps), Pose(x, y, a), *traces)


def default_environments(distance=4.0, heading=0.0):
    """Four starts on the diagonals, ``distance`` from the light, same heading."""
    d = distance / math.sqrt(2.0)
    return EnvironmentSet(tuple(Pose(sx * d, sy * d, heading)
                                for sx, sy in ((1, 1), (1, -1), (-1, 1), (-1, -1))))


def per_env_loss(min_distance, light_radius):
    """Distance still to cover before touching the light; zero on success."""
    return np.maximum(0.0, np.asarray(min_distance, dtype=float) - light_radius)


def evaluate(design, policy, envs=None, cfg=None):
    envs = envs or default_environments()
    cfg = cfg or SimConfig()
    results = [simulate(design, policy, start, cfg) for start in envs]
    losses = per_env_loss([r.min_distance for r in results], cfg.light_radius)
    return EnvEvaluation(losses=losses,
                         total_loss=float(losses.sum()),
                         success_count=sum(r.success for r in results),
                         results=results)


def evaluate_batch(designs, policies, envs, cfg):
    """Vectorized evaluation of m (design, policy) rows.

    ``designs`` is (m, 4) or (4,), ``policies`` is (m, 2).  Returns per-env
    losses (m, K) and success flags (m, K).
    """
    policies = np.ascontiguousarray(np.atleast_2d(policies), dtype=float)
    designs = np.asarray(designs, dtype=float)
    if designs.ndim == 1:
        designs = np.broadcast_to(designs, (policies.shape[0], 4))
    designs = np.ascontiguousarray(designs)
    dmin, succ, diverged = _kernels.evaluate_many(
        designs, policies, envs.as_array(), cfg.dt, cfg.max_steps,
        cfg.light_radius, cfg.distance_floor)
    if diverged:
        raise DivergedStateError("non-finite pose during batch evaluation")
    return per_env_loss(dmin, cfg.light_radius), succ

"""Run configuration: a scale preset, optionally overridden by a JSON file and flags."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .dynamics import SimConfig, default_environments
from .landscape import GridSpec
from .optimize import METHODS

SCALES = ("desk", "paper")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scale: str = "desk"
    design_bins: int = 5
    weight_bins: int = 41
    dt: float = 0.1
    max_steps: int = 20_000
    light_radius: float = 0.075
    distance_floor: float = 1e-6
    env_distance: float = 4.0
    study_seed: int = 0
    train_budget: int = 2000
    train_seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    train_designs: int = 100  # stratified sample size; 0 trains every design
    methods: list = field(default_factory=lambda: list(METHODS))
    coopt_budget: int = 3000
    coopt_seeds: list = field(default_factory=lambda: list(range(30)))
    coopt_bin_width: int = 50
    coopt_dtw: bool = True
    out: str = "runs"
    workers: int = 1

    @classmethod
    def preset(cls, scale):
        if scale == "desk":
            return cls()
        if scale == "paper":
            return cls(scale="paper", design_bins=9, weight_bins=121, max_steps=100_000,
                       train_budget=10_000, train_designs=0)
        raise ConfigError(f"unknown scale {scale!r}; choose from {SCALES}")

    def grid(self):
        return GridSpec(design_bins=self.design_bins, weight_bins=self.weight_bins)

    def sim(self):
        return SimConfig(dt=self.dt, max_steps=self.max_steps, light_radius=self.light_radius,
                         distance_floor=self.distance_floor)

    def envs(self):
        return default_environments(self.env_distance)

    def validate(self):
        try:
            self.grid()
            self.sim()
            self.envs()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        for name in ("train_seeds", "coopt_seeds"):
            seeds = getattr(self, name)
            if not seeds or len(set(seeds)) != len(seeds):
                raise ConfigError(f"{name} must be a non-empty list of unique seeds")
            if not all(isinstance(s, int) and s >= 0 for s in seeds):
                raise ConfigError(f"{name} must hold non-negative integers")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ConfigError(f"unknown methods {bad}; choose from {METHODS}")
        for name in ("train_budget", "coopt_budget", "coopt_bin_width", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.train_designs < 0 or self.train_designs % 4:
            raise ConfigError("train_designs must be 0 or a positive multiple of 4")
        return self

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


_KNOWN = {f.name for f in fields(RunConfig)}


def load_config(path=None, scale=None, **overrides):
    """Preset for ``scale`` (flag, else the file's ``scale`` key, else desk),
    then the file's keys, then non-None keyword overrides."""
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    unknown = set(data) - _KNOWN
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = RunConfig.preset(scale or data.get("scale", "desk"))
    data = {k: v for k, v in data.items() if k != "scale"}
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = replace(cfg, **data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()

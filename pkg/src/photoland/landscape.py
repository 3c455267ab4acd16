"""Exhaustive success maps over the weight grid and the two design metrics.

For a fixed design, every policy on an ``n x n`` weight grid is rolled out in
each environment.  Stacking the binary success maps gives the overlap matrix,
whose cell values count how many environments a policy solves.  From it:

* learnability ``m_l``: fraction of cells solving every environment;
* interference resistance ``m_ci``: cells solving every environment divided by
  cells solving at least one (0 if no cell solves anything).
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import os
import struct
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .dynamics import (
    DESIGN_HI, DESIGN_LO, WEIGHT_HI, WEIGHT_LO, Design, DivergedStateError,
    EnvironmentSet, Policy,
)

log = logging.getLogger(__name__)


class ShapeMismatchError(ValueError):
    pass


class CheckpointMismatchError(RuntimeError):
    """The checkpoint on disk was written for a different configuration."""


class CheckpointCorruptError(RuntimeError):
    pass


@dataclass(frozen=True)
class GridSpec:
    design_bins: int = 5
    weight_bins: int = 41
    design_lo: float = DESIGN_LO
    design_hi: float = DESIGN_HI
    weight_lo: float = WEIGHT_LO
    weight_hi: float = WEIGHT_HI

    def __post_init__(self):
        if self.design_bins < 1 or self.weight_bins < 1:
            raise ValueError("grids need at least one bin")
        if self.design_lo > self.design_hi or self.weight_lo > self.weight_hi:
            raise ValueError("grid bounds are reversed")

    @classmethod
    def desk(cls):
        return cls()

    @classmethod
    def paper(cls):
        return cls(design_bins=9, weight_bins=121)

    def design_values(self):
        return np.linspace(self.design_lo, self.design_hi, self.design_bins)

    def weight_values(self):
        return np.linspace(self.weight_lo, self.weight_hi, self.weight_bins)


@dataclass
class SuccessMatrix:
    values: np.ndarray
    env_index: int


@dataclass
class DesignMetrics:
    design: Design
    m_l: float
    m_ci: float
    counts: tuple


def design_grid(spec):
    """Every design on the grid, ordered (l1x, l1y, l2x, l2y) with l2y fastest."""
    v = spec.design_values()
    return [Design((a, b), (c, d)) for a, b, c, d in itertools.product(v, v, v, v)]


def weight_grid(spec):
    """Every policy on the grid, w2 fastest; reshapes to (n, n) as (w1, w2)."""
    v = spec.weight_values()
    return [Policy(a, b) for a, b in itertools.product(v, v)]


def success_tensor(design, envs, spec, cfg):
    """(K, n, n) uint8 array; entry [k, i, j] is 1 iff policy (w_i, w_j) solves env k."""
    w = spec.weight_values()
    out, diverged = _kernels.success_grid(
        design.ell1[0], design.ell1[1], design.ell2[0], design.ell2[1], w, w,
        envs.as_array(), cfg.dt, cfg.max_steps, cfg.light_radius, cfg.distance_floor)
    if diverged:
        raise DivergedStateError(f"non-finite pose while sweeping {design}")
    return out


def success_matrix(design, env_k, spec, cfg, env_index=0):
    values = success_tensor(design, EnvironmentSet((env_k,)), spec, cfg)[0]
    return SuccessMatrix(values, env_index)


def overlap(matrices):
    """Element-wise sum of binary success matrices."""
    arrays = [np.asarray(getattr(m, "values", m)) for m in matrices]
    if not arrays:
        raise ValueError("need at least one success matrix")
    shape = arrays[0].shape
    for a in arrays[1:]:
        if a.shape != shape:
            raise ShapeMismatchError(f"success matrices differ in shape: {shape} vs {a.shape}")
    return np.sum(np.stack(arrays).astype(np.int64), axis=0)


def level_counts(o, K):
    """(g_1, ..., g_K): number of cells equal to each k."""
    o = np.asarray(o)
    return tuple(int(np.count_nonzero(o == k)) for k in range(1, K + 1))


def learnability(o, K):
    o = np.asarray(o)
    return np.count_nonzero(o == K) / o.size


def ci_resistance(o, K):
    g = level_counts(o, K)
    solved_any = sum(g)
    if solved_any == 0:
        return 0.0
    return g[-1] / solved_any


def metrics_from_tensor(design, S):
    K = S.shape[0]
    o = overlap(S)
    return DesignMetrics(design, learnability(o, K), ci_resistance(o, K), level_counts(o, K))


def design_metrics(design, envs, spec, cfg):
    return metrics_from_tensor(design, success_tensor(design, envs, spec, cfg))


# -- checkpoint --------------------------------------------------------------

_MAGIC = b"PLSW"
_VERSION = 1
_HEAD = struct.Struct("<4sH32s")
_REC = struct.Struct("<IHH")
_CRC = struct.Struct("<I")


def config_hash(spec, envs, cfg, designs=None):
    designs = design_grid(spec) if designs is None else designs
    payload = {
        "version": _VERSION,
        "grid": asdict(spec),
        "designs": [list(d.as_vector()) for d in designs],
        "envs": envs.as_array().tolist(),
        "sim": {k: getattr(cfg, k) for k in ("dt", "max_steps", "light_radius", "distance_floor")},
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).digest()


class ShardLog:
    """Append-only binary log of per-design success tensors.

    Layout: header ``magic, version, sha256(config)`` followed by records
    ``design_index u32, K u16, n u16, packed bits, crc32``.  A record cut
    short by a crash is dropped on reopen.
    """

    def __init__(self, path, digest):
        self.path = Path(path)
        self.digest = digest

    def _record_size(self, K, n):
        return _REC.size + (K * n * n + 7) // 8 + _CRC.size

    def load(self):
        """Yield (design_index, tensor) pairs, truncating any torn trailing record."""
        if not self.path.exists():
            return
        data = self.path.read_bytes()
        if len(data) < _HEAD.size:
            raise CheckpointCorruptError(f"{self.path}: truncated header")
        magic, version, digest = _HEAD.unpack_from(data, 0)
        if magic != _MAGIC or version != _VERSION:
            raise CheckpointCorruptError(f"{self.path}: not a sweep checkpoint")
        if digest != self.digest:
            raise CheckpointMismatchError(f"{self.path} was written for a different configuration")
        pos = _HEAD.size
        while pos < len(data):
            if len(data) - pos < _REC.size:
                break
            idx, K, n = _REC.unpack_from(data, pos)
            size = self._record_size(K, n)
            if len(data) - pos < size:
                break
            body = data[pos:pos + size - _CRC.size]
            (crc,) = _CRC.unpack_from(data, pos + size - _CRC.size)
            if zlib.crc32(body) != crc:
                raise CheckpointCorruptError(f"{self.path}: bad checksum at offset {pos}")
            bits = np.frombuffer(body, dtype=np.uint8, offset=_REC.size)
            yield idx, np.unpackbits(bits, count=K * n * n).reshape(K, n, n)
            pos += size
        if pos < len(data):
            log.warning("dropping %d trailing bytes of a torn record in %s", len(data) - pos, self.path)
            with open(self.path, "r+b") as fh:
                fh.truncate(pos)

    def start(self):
        if not self.path.exists() or self.path.stat().st_size == 0:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "wb") as fh:
                fh.write(_HEAD.pack(_MAGIC, _VERSION, self.digest))

    def append(self, idx, S):
        K, n, _ = S.shape
        body = _REC.pack(idx, K, n) + np.packbits(S.ravel()).tobytes()
        with open(self.path, "ab") as fh:
            fh.write(body + _CRC.pack(zlib.crc32(body)))
            fh.flush()
            os.fsync(fh.fileno())


# -- sweep -------------------------------------------------------------------

def _shard(args):
    idx, design, envs, spec, cfg = args
    return idx, success_tensor(design, envs, spec, cfg)


def sweep(spec, envs, cfg, workers=1, checkpoint=None, resume=False, designs=None):
    """Metrics for every design on the grid (or the given subset), in grid order.

    With ``checkpoint`` set, each finished design's success tensor is logged so
    an interrupted sweep restarts where it stopped (``resume=True``).
    """
    designs = design_grid(spec) if designs is None else list(designs)
    metrics = {}
    shard_log = None
    if checkpoint is not None:
        shard_log = ShardLog(checkpoint, config_hash(spec, envs, cfg, designs))
        if resume:
            for idx, S in shard_log.load():
                metrics[idx] = metrics_from_tensor(designs[idx], S)
        elif Path(checkpoint).exists():
            Path(checkpoint).unlink()
        shard_log.start()
    todo = [(i, d, envs, spec, cfg) for i, d in enumerate(designs) if i not in metrics]
    if todo:
        log.info("sweeping %d of %d designs on %d worker(s)", len(todo), len(designs), workers)
    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = pool.map(_shard, todo, chunksize=1)
            for idx, S in results:
                metrics[idx] = metrics_from_tensor(designs[idx], S)
                if shard_log:
                    shard_log.append(idx, S)
    else:
        for args in todo:
            idx, S = _shard(args)
            metrics[idx] = metrics_from_tensor(designs[idx], S)
            if shard_log:
                shard_log.append(idx, S)
    return [metrics[i] for i in range(len(designs))]

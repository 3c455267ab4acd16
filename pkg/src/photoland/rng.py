"""Counter-based random streams keyed by (study seed, unit id).

Every independent unit of work (one training run, one co-optimization run,
one design sample) draws from its own Philox stream, so the order in which a
worker pool executes units can never change the numbers a unit sees.
"""

import hashlib

import numpy as np


def stream_key(study_seed, *unit):
    """128-bit Philox key from the study seed and a tuple of unit labels."""
    text = "\x1f".join([str(int(study_seed))] + [str(u) for u in unit])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:16], "little")


def make_rng(study_seed, *unit):
    return np.random.Generator(np.random.Philox(key=stream_key(study_seed, *unit)))

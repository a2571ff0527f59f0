"""Deterministic RNG fan-out from one master seed.

Every stochastic component (splits, weight init, dropout, share generation,
tuner proposals) pulls its generator from ``derive_rng(master, *path)`` with a
stable path, so a run is reproducible from a single integer.
"""

from __future__ import annotations

import zlib

import numpy as np


def _path_entropy(part: int | str) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part) & 0xFFFFFFFF


def derive_rng(master_seed: int, *path: int | str) -> np.random.Generator:
    """Return a Generator keyed by (master_seed, path).

    Distinct paths give statistically independent streams; the mapping is
    stable across runs and platforms (crc32 for string parts, SeedSequence
    for mixing).
    """
    entropy = [int(master_seed) & 0xFFFFFFFF] + [_path_entropy(p) for p in path]
    return np.random.default_rng(np.random.SeedSequence(entropy))

"""Seed derivation.

Every random quantity in the package is drawn from a numpy ``Generator``
(PCG64) whose seed sequence is keyed by a base seed plus a tuple of stream
labels.  Two different label tuples give statistically independent streams,
and a stream never depends on how many numbers other streams consumed.
"""
from __future__ import annotations

import zlib

import numpy as np

MASK64 = (1 << 64) - 1


def _label(x) -> int:
    if isinstance(x, str):
        return zlib.crc32(x.encode())
    return int(x) & MASK64


def stream(seed: int, *labels) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & MASK64, spawn_key=tuple(_label(x) for x in labels))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *labels) -> int:
    """A new 64-bit seed determined by ``seed`` and ``labels``."""
    ss = np.random.SeedSequence(int(seed) & MASK64, spawn_key=tuple(_label(x) for x in labels))
    return int(ss.generate_state(1, np.uint64)[0])

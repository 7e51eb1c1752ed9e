"""Deterministic random streams.

All randomness flows through Philox, a counter-based 64-bit generator,
so that identical seeds give identical streams on every platform.
Stream splitting is by key derivation: the stream for run ``k`` of a
seed sweep uses key ``seed ^ k``, so runs are independent and each one
is reproducible in isolation.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator for the given 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=int(seed) & _MASK64))


def split(seed: int, index: int) -> int:
    """Seed of the ``index``-th derived stream (seed XOR run index)."""
    return (int(seed) ^ int(index)) & _MASK64

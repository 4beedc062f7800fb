"""Keyed random streams.

Every random draw in the package comes from ``stream(seed, purpose, *index)``:
a PCG64 generator seeded by ``SeedSequence(seed, spawn_key=(purpose, *index))``.
Streams for different keys are statistically independent, and a stream's
output depends only on its key, never on scheduling or on how many other
streams were drawn first.
"""
from __future__ import annotations

import numpy as np

# purpose tags
DATA = 1
BOOTSTRAP = 2
REPLICATION = 3


def stream(seed: int, purpose: int, *index: int) -> np.random.Generator:
    if seed < 0:
        raise ValueError("seed must be a nonnegative integer")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(purpose),) + tuple(int(i) for i in index))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *index: int) -> int:
    """A 63-bit child seed, for handing a sub-task its own root seed."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(REPLICATION,) + tuple(int(i) for i in index))
    lo, hi = (int(v) for v in ss.generate_state(2, dtype=np.uint32))
    return (lo | (hi << 32)) >> 1

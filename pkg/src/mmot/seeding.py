"""Named random streams derived from one integer seed.

Each subsystem asks for its own stream (``make_rng(seed, "batches", epoch)``)
so that adding or removing draws in one place never shifts the numbers seen
by another.  Philox is counter based, which makes these streams cheap to
create on demand.
"""

from __future__ import annotations

import zlib

import numpy as np


def _word(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part) & 0xFFFFFFFF


def make_rng(seed: int, *stream) -> np.random.Generator:
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    key = [seed & 0xFFFFFFFF, seed >> 32, *(_word(p) for p in stream)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))

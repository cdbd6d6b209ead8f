"""Named, reproducible random streams derived from one master seed."""

from __future__ import annotations

import zlib

import numpy as np


def _key(k) -> int:
    if isinstance(k, (int, np.integer)):
        if k < 0:
            raise ValueError("stream keys must be non-negative")
        return int(k)
    return zlib.crc32(str(k).encode())


def derive_rng(seed: int, *keys) -> np.random.Generator:
    """Generator for the sub-stream ``(seed, *keys)``; strings are hashed stably."""
    if seed is None:
        raise ValueError("a seed is required")
    return np.random.default_rng(np.random.SeedSequence([_key(seed), *map(_key, keys)]))


def derive_seed(seed: int, *keys) -> int:
    return int(derive_rng(seed, *keys).integers(0, 2**31 - 1))

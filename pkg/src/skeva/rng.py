"""Seed plumbing: every random draw derives from (master seed, integer path).

A draw's sub-stream depends only on the master seed and its spawn key, never
on how many other streams were consumed before it, so draws can run in any
order (or in parallel) and still reproduce bit-identically.
"""
from __future__ import annotations

from typing import Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence]


def spawn(seed: SeedLike, *key: int) -> np.random.SeedSequence:
    """Child SeedSequence of `seed` at integer path `key`."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + key)
    return np.random.SeedSequence(seed, spawn_key=key)


def rng_from(seed: SeedLike, *key: int) -> np.random.Generator:
    """Generator seeded at the child stream `key` of `seed`."""
    return np.random.default_rng(spawn(seed, *key))

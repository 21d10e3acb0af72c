"""Seed derivation.

Every random stream is a pure function of a master seed plus a tuple of
keys (replicate id, stage name, grid index, ...). Keys are mixed into a
``numpy.random.SeedSequence`` spawn key, so the stream a stage sees does
not depend on the order in which stages or replicates are executed.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["derive_rng", "derive_seed", "as_rng"]


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError("seed keys must be nonnegative")
        return int(key)
    # crc32 is stable across processes, unlike hash()
    return zlib.crc32(str(key).encode("utf-8"))


def derive_seed(master, *keys) -> np.random.SeedSequence:
    """Child seed of ``master`` (an int or a SeedSequence) for ``keys``.

    Unlike ``SeedSequence.spawn`` this is stateless: the same inputs always
    give the same child.
    """
    extra = tuple(_key_to_int(k) for k in keys)
    if isinstance(master, np.random.SeedSequence):
        return np.random.SeedSequence(master.entropy, spawn_key=tuple(master.spawn_key) + extra)
    return np.random.SeedSequence(int(master), spawn_key=extra)


def derive_rng(master, *keys) -> np.random.Generator:
    """Independent generator for ``(master, *keys)``."""
    return np.random.Generator(np.random.PCG64(derive_seed(master, *keys)))


def as_rng(seed) -> np.random.Generator:
    """Accept an int, a SeedSequence or a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    if seed is None:
        raise ValueError("an explicit seed is required")
    return derive_rng(int(seed))

"""Deterministic, splittable random streams.

Every stochastic component derives its generator from a root seed plus a
path of labels, e.g. ``derive(seed, "subject", 3)`` or
``derive(seed, "fold", k, "train")``.  The underlying bit generator is
Philox (counter-based), so streams with different paths are independent
and a given (seed, path) pair is bit-reproducible across runs and
platforms.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _key_word(part) -> int:
    if isinstance(part, (bool, np.bool_)):
        return int(part)
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError(f"stream path ints must be non-negative, got {part}")
        return int(part) & 0xFFFFFFFF
    if isinstance(part, str):
        digest = hashlib.sha256(part.encode("utf-8")).digest()
        return int.from_bytes(digest[:4], "little")
    raise TypeError(f"unsupported stream path element: {part!r}")


def derive(seed: int, *path) -> np.random.Generator:
    """Return an independent generator for (seed, path)."""
    key = tuple(_key_word(p) for p in path)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))

"""Seeded, splittable random streams.

Every random draw in the package goes through :func:`make_rng` so that a
(seed, stream key) pair fully determines the numbers produced, regardless of
which process or in which order the stream is consumed.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for stream ``key`` under ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))

"""Counter-based random streams keyed by (master seed, purpose, index)."""
from __future__ import annotations

import numpy as np

INSTANCE = 0
RUN = 1


def stream(seed: int, index: int = 0, purpose: int = RUN) -> np.random.Generator:
    """Independent Philox generator; the same key gives the same stream in any order."""
    ss = np.random.SeedSequence(int(seed) % 2**64, spawn_key=(purpose, index))
    return np.random.Generator(np.random.Philox(ss))

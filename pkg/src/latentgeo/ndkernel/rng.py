from __future__ import annotations

import numpy as np


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator from an int, a SeedSequence, or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(master: int, *keys: int) -> int:
    """Stable 63-bit child seed for ``(master, *keys)``."""
    ss = np.random.SeedSequence([int(master), *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint64)[0]) >> 1


def split_rng(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(int(seed)).spawn(n)]

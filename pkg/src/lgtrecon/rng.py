"""Seeded random streams.

Every stochastic step draws from a generator keyed by integers such as
(seed, trial, gene), so results never depend on call order or scheduling.
"""

import numpy as np


def derive_rng(seed, *keys) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        if keys:
            raise TypeError("keys cannot be combined with an existing Generator")
        return seed
    entropy = [int(seed), *(int(k) for k in keys)]
    if any(x < 0 for x in entropy):
        raise ValueError("seeds and stream keys must be nonnegative")
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(seed, *keys) -> int:
    """A 63-bit integer seed for a sub-stream, for APIs that take plain ints."""
    entropy = [int(seed), *(int(k) for k in keys)]
    return int(np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint64)[0] >> np.uint64(1))

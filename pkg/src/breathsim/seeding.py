"""Deterministic seed derivation shared by every stochastic stage."""

import numpy as np


def derive_seed(*keys: int) -> int:
    """Hash a tuple of non-negative integers into a 64-bit seed.

    The mapping only depends on the keys, so work units can be scheduled in
    any order (or in parallel) and still draw identical random streams.
    """
    words = [int(k) for k in keys]
    if any(w < 0 for w in words):
        raise ValueError(f"seed keys must be non-negative, got {words}")
    return int(np.random.SeedSequence(words).generate_state(1, dtype=np.uint64)[0])


def rng_for(*keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))

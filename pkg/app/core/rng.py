"""Seeded random sources.

All stochastic code takes a ``numpy.random.Generator`` built here. The bit
generator is PCG64 seeded through ``SeedSequence``; independent streams for
parallel runs come from ``SeedSequence.spawn`` so sweeps stay reproducible
regardless of worker count.
"""

import numpy as np

RNG_ALGORITHM = "numpy.PCG64/SeedSequence"
RNG_VERSION = "1"


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def spawn_seeds(seed: int, count: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(int(seed)).spawn(count)


def choice_index(rng: np.random.Generator, weights: np.ndarray) -> int:
    """Draw one index with probability proportional to ``weights``."""
    cdf = np.cumsum(weights, dtype=float)
    total = cdf[-1]
    idx = int(np.searchsorted(cdf, rng.random() * total, side="right"))
    return min(idx, len(cdf) - 1)


def rng_info() -> dict:
    return {"algorithm": RNG_ALGORITHM, "version": RNG_VERSION}

"""Reproducible random streams.

Ensembles are generated in fixed-size blocks. Block ``i`` always draws from
child ``i`` of the run seed, so a larger ensemble contains every path of a
smaller one generated from the same seed.
"""

from __future__ import annotations

import numpy as np

from src.utils.errors import InvalidArgumentError


def _seed_sequence(seed: int | np.random.SeedSequence) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if seed is None or int(seed) < 0:
        raise InvalidArgumentError(f"seed must be a non-negative integer, got {seed!r}")
    return np.random.SeedSequence(int(seed))


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    """Counter-based generator for ``seed``."""
    return np.random.Generator(np.random.Philox(_seed_sequence(seed)))


def child_rng(seed: int, index: int) -> np.random.Generator:
    """Generator for child ``index`` of ``seed``; independent of how many siblings exist."""
    if index < 0:
        raise InvalidArgumentError("child index must be non-negative")
    child = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(child))


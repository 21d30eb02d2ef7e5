"""Deterministic RNG stream derivation.

One named 64-bit generator (PCG64) everywhere. Independent streams for
experiment cells are derived by hashing the master seed together with the
cell coordinates through ``numpy.random.SeedSequence``, so results never
depend on evaluation order or thread schedule.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Generator for a single run."""
    return np.random.default_rng(np.random.SeedSequence(seed))


def cell_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Generator for one (experiment cell, seed index) combination.

    The entropy tuple (master_seed, *key) fully determines the stream;
    permuting evaluation order of cells leaves every stream unchanged.
    """
    return np.random.default_rng(np.random.SeedSequence((master_seed,) + tuple(key)))

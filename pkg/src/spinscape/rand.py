"""Seeded randomness.

Every random choice in the package flows from a user-facing integer seed
through a counter-based Philox generator; there is no global RNG state.
Distinct logical streams (instance sampling, set sampling, Monte Carlo, ...)
use distinct ``stream`` tags so adding draws to one consumer never perturbs
another.
"""

from __future__ import annotations

import numpy as np


def rng_from(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, stream])))

"""Shared test utilities: seeded random instances and tiny oracles."""

from __future__ import annotations

from itertools import combinations

import numpy as np

from spinscape.instance import Assignment, IsingInstance


def rng_for(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, stream])))


def random_instance(
    seed: int,
    n: int | None = None,
    density: float | None = None,
    wmax: int = 5,
    allow_zero_field: bool = True,
) -> IsingInstance:
    """Random integer instance; J weights are nonzero, h may contain zeros."""
    rng = rng_for(seed)
    if n is None:
        n = int(rng.integers(2, 13))
    if density is None:
        density = float(rng.choice([0.1, 0.3, 0.7]))
    lo = -wmax if allow_zero_field else 1
    h = rng.integers(-wmax, wmax + 1, size=n)
    if not allow_zero_field:
        signs = rng.choice([-1, 1], size=n)
        h = signs * rng.integers(1, wmax + 1, size=n)
    triples = []
    for i, j in combinations(range(n), 2):
        if rng.random() < density:
            w = int(rng.integers(1, wmax + 1)) * int(rng.choice([-1, 1]))
            triples.append((i, j, w))
    c0 = int(rng.integers(-3, 4))
    return IsingInstance(n, [int(x) for x in h], triples, c0=c0)


def exhaustive_min(inst: IsingInstance) -> tuple[int, Assignment]:
    """Reference optimum: plain loop over ranks, first minimum wins (lex order)."""
    best_e = None
    best = None
    for r in range(1 << inst.n):
        a = Assignment.from_rank(r, inst.n)
        e = inst.energy(a)
        if best_e is None or e < best_e:
            best_e, best = e, a
    return best_e, best


def exhaustive_minima(inst: IsingInstance) -> list[Assignment]:
    """Reference strict single-flip minima via direct definition."""
    out = []
    for r in range(1 << inst.n):
        a = Assignment.from_rank(r, inst.n)
        if all(inst.flip_delta(a, i) > 0 for i in range(inst.n)):
            out.append(a)
    return out

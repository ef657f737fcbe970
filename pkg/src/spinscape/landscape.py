"""Strict k-minima enumeration and basin structure under k-flip moves.

An assignment is a strict k-minimum when every change of 1..k variables
strictly increases the energy.  The energy change of flipping a set U is

    delta(U) = -2 * (sum_{i in U} S_i L_i  -  2 * sum_{i<j in U} J_ij S_i S_j)

with L the local fields, so all checks run on exact integers.  Enumeration
scans the full assignment space in rank blocks, computing local fields for a
whole block with one matrix product, and only the (rare) survivors of the
single-flip test pay for the larger subset checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from spinscape.instance import (
    Assignment,
    EnumerationLimitError,
    IsingInstance,
    block_local_fields,
    iter_rank_blocks,
    spin_block,
)

# vertex-count * neighborhood budget for basin construction
DEFAULT_BASIN_WORK_LIMIT = 1 << 22


@dataclass(frozen=True)
class LandscapeReport:
    """Result of a minima enumeration or basin decomposition."""

    k: int
    minima: Tuple[Assignment, ...]
    basin_count: int | None = None
    basin_sizes: Tuple[int, ...] | None = None
    vertex_count: int | None = None

    @property
    def minima_count(self) -> int:
        return len(self.minima)


def _subset_deltas_ok(
    inst: IsingInstance,
    spins: np.ndarray,
    fields: np.ndarray,
    k: int,
    strict: bool,
    flipped: bool = False,
    sizes_from: int = 1,
) -> bool:
    """Check delta(U) against 0 for every variable set U with sizes_from <= |U| <= k.

    strict=True demands improvement-free strictly (delta > 0 everywhere),
    strict=False allows ties (delta >= 0).  flipped=True inverts the
    comparison direction (no change may increase the energy).
    """
    n = inst.n
    sl = (spins.astype(np.int64)) * fields
    jm = inst.full_coupling_matrix()
    q = jm * np.outer(spins, spins).astype(np.int64)

    def ok(deltas: np.ndarray) -> bool:
        if flipped:
            deltas = -deltas
        return bool((deltas > 0).all() if strict else (deltas >= 0).all())

    if sizes_from <= 1 <= k:
        if not ok(-2 * sl):
            return False
    if sizes_from <= 2 <= k and n >= 2:
        d2 = -2 * (sl[:, None] + sl[None, :] - 2 * q)
        iu = np.triu_indices(n, 1)
        if not ok(d2[iu]):
            return False
    if sizes_from <= 3 <= k and n >= 3:
        a1 = sl[:, None, None] + sl[None, :, None] + sl[None, None, :]
        b = q[:, :, None] + q[:, None, :] + q[None, :, :]
        d3 = -2 * (a1 - 2 * b)
        i, j, l = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
        mask = (i < j) & (j < l)
        if not ok(d3[mask]):
            return False
    for size in range(max(4, sizes_from), k + 1):
        if size > n:
            break
        for subset in combinations(range(n), size):
            idx = list(subset)
            inner = 0
            for a_i, b_i in combinations(idx, 2):
                inner += q[a_i, b_i]
            delta = -2 * (int(sl[idx].sum()) - 2 * int(inner))
            if flipped:
                delta = -delta
            if strict and delta <= 0:
                return False
            if not strict and delta < 0:
                return False
    return True


def is_k_minimum(inst: IsingInstance, a: Assignment, k: int) -> bool:
    """True when every change of 1..k variables strictly raises the energy."""
    if k < 1:
        raise ValueError("need k >= 1")
    if a.n != inst.n:
        raise ValueError("assignment does not match instance size")
    spins = a.spins()
    fields = np.array([inst.local_field(a, i) for i in range(inst.n)], dtype=np.int64)
    return _subset_deltas_ok(inst, spins, fields, k, strict=True)


def _scan_candidates(
    inst: IsingInstance, strict: bool, flipped: bool, block_bits: int
) -> Iterable[Tuple[int, np.ndarray, np.ndarray]]:
    """Yield (rank, spins_row, fields_row) for survivors of the single-flip test."""
    n = inst.n
    for start, count in iter_rank_blocks(n, block_bits):
        spins = spin_block(n, start, count)
        fields = block_local_fields(inst, spins)
        sl = spins * fields
        if flipped:
            sl = -sl
        hits = (sl < 0).all(axis=1) if strict else (sl <= 0).all(axis=1)
        for r in np.nonzero(hits)[0]:
            yield start + int(r), spins[r], fields[r]


def enumerate_k_minima(
    inst: IsingInstance, k: int = 1, block_bits: int = 16
) -> LandscapeReport:
    """Exhaustively list all strict k-minima in lexicographic order."""
    if k < 1:
        raise ValueError("need k >= 1")
    minima: List[Assignment] = []
    for rank, spins, fields in _scan_candidates(inst, strict=True, flipped=False,
                                                block_bits=block_bits):
        if k == 1 or _subset_deltas_ok(inst, spins, fields, k, strict=True, sizes_from=2):
            minima.append(Assignment.from_rank(rank, inst.n))
    return LandscapeReport(k=k, minima=tuple(minima))


class _UnionFind:
    def __init__(self, size: int) -> None:
        self.parent = list(range(size))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _flip_masks(n: int, k: int) -> List[int]:
    masks = []
    for size in range(1, min(k, n) + 1):
        for subset in combinations(range(n), size):
            m = 0
            for i in subset:
                m |= 1 << i
            masks.append(m)
    return masks


def k_basins(
    inst: IsingInstance,
    k: int = 1,
    flipped_rule: bool = False,
    block_bits: int = 16,
    work_limit: int = DEFAULT_BASIN_WORK_LIMIT,
) -> LandscapeReport:
    """Group weak k-minima into components under moves of Hamming width <= k.

    Vertices are assignments no change of <= k variables strictly improves
    (``flipped_rule=True`` instead keeps assignments no such change strictly
    worsens); edges join vertices within Hamming distance k.  Every strict
    k-minimum is necessarily an isolated vertex: any other vertex within
    distance k would see a strictly downhill move back to the minimum and
    lose its own vertex status.
    """
    if k < 1:
        raise ValueError("need k >= 1")
    n = inst.n
    vertices: List[int] = []  # bit masks
    for rank, spins, fields in _scan_candidates(inst, strict=False, flipped=flipped_rule,
                                                block_bits=block_bits):
        if k == 1 or _subset_deltas_ok(inst, spins, fields, k, strict=False,
                                       flipped=flipped_rule, sizes_from=2):
            vertices.append(Assignment.from_rank(rank, n).bits)
    masks = _flip_masks(n, k)
    if len(vertices) * max(1, len(masks)) > work_limit:
        raise EnumerationLimitError(
            "basin construction over %d vertices x %d moves exceeds the work limit"
            % (len(vertices), len(masks))
        )
    index: Dict[int, int] = {bits: pos for pos, bits in enumerate(vertices)}
    uf = _UnionFind(len(vertices))
    for pos, bits in enumerate(vertices):
        for m in masks:
            other = index.get(bits ^ m)
            if other is not None and other != pos:
                uf.union(pos, other)
    sizes: Dict[int, int] = {}
    for pos in range(len(vertices)):
        root = uf.find(pos)
        sizes[root] = sizes.get(root, 0) + 1
    strict = tuple(
        a for a in (Assignment(n, bits) for bits in vertices)
        if is_k_minimum(inst, a, k)
    ) if not flipped_rule else tuple()
    return LandscapeReport(
        k=k,
        minima=strict,
        basin_count=len(sizes),
        basin_sizes=tuple(sorted(sizes.values(), reverse=True)),
        vertex_count=len(vertices),
    )


def min_pairwise_hamming(assignments: Sequence[Assignment]) -> int:
    """Minimum Hamming distance over all pairs; n+1 when fewer than two items."""
    if not assignments:
        raise ValueError("need at least one assignment")
    if len(assignments) == 1:
        return assignments[0].n + 1
    return min(a.hamming(b) for a, b in combinations(assignments, 2))

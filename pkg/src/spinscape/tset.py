"""Sparse "anchor set" construction and certification.

A T-set is a subset of variables whose internal couplings are weak enough,
relative to their couplings into the rest of the graph, that conditioning on
the outside assignment pins most T variables by a sign test.  The quality
conditions checked here (all parametrized by a reference degree d and a
sampling rate epsilon, with conservative constant 99):

1. every member has at most 99*epsilon*d neighbors inside T;
2. every member has at least d_out = max(1, floor((1/99)/epsilon)) outside
   partners whose coupling magnitude at least matches the member's strongest
   internal coupling (members with no internal neighbors are exempt);
3. summed over a member's outside neighbors, the number of such "strong
   edges" attached to those neighbors stays below 99*d.

At bench scales the floor in d_out underflows to 0, so it is clamped to 1;
the conditions are then easy to meet but remain exactly checkable.

The constrained variant (used when two coupling-free side sets T1, T2 have
been carved out first) drops the exemption in condition 2, requires strong
partners to have nonzero coupling, and adds

4. every member's total coupling magnitude into T1 and T2 is at most
   99 * j_max * (|T1| + |T2|) / |V0|,

checked in exact integer arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Dict, Iterable, List, Sequence, Tuple

from spinscape.instance import DegreeGraph, IsingInstance
from spinscape.rand import rng_from

_STREAM_TSET = 21
_STREAM_T1T2 = 22
_STREAM_NONSPARSE = 23

MAX_DETERMINISTIC_N = 24
MAX_DETERMINISTIC_SUBSETS = 200_000


@dataclass(frozen=True)
class TParams:
    """Reference degree, sampling rate and the threshold constants."""

    d: int
    epsilon: float
    c_internal: int = 99
    c_strong: int = 99
    c_load: int = 99
    c_cross: int = 99
    target_fraction: float = 0.5

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError("reference degree must be >= 1")
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in (0, 1]")

    @classmethod
    def for_instance(cls, inst: IsingInstance, **overrides) -> "TParams":
        d = inst.degree_graph().max_degree
        if d < 2:
            raise ValueError("instance graph needs max degree >= 2 for default params")
        eps = overrides.pop("epsilon", math.log2(d) / d)
        return cls(d=d, epsilon=eps, **overrides)

    @property
    def internal_degree_cap(self) -> float:
        return self.c_internal * self.epsilon * self.d

    @property
    def strong_edge_quota(self) -> int:
        raw = math.floor((1.0 / self.epsilon) / self.c_strong)
        return max(1, raw)

    @property
    def load_cap(self) -> int:
        return self.c_load * self.d


@dataclass(frozen=True)
class ConstrainedContext:
    """Side sets and coupling bound for the constrained certificate check."""

    t1: Tuple[int, ...]
    t2: Tuple[int, ...]
    j_max: int


@dataclass(frozen=True)
class TSetCertificate:
    t: Tuple[int, ...]
    strong_edges: Tuple[Tuple[int, Tuple[int, ...]], ...]
    params: TParams
    checks: Tuple[Tuple[str, bool], ...]
    method: str = "manual"
    constrained: bool = False
    attempts: int = 1
    target_size: int | None = None

    @property
    def checks_dict(self) -> Dict[str, bool]:
        return dict(self.checks)

    @property
    def strong_edges_dict(self) -> Dict[int, Tuple[int, ...]]:
        return dict(self.strong_edges)

    @property
    def conditions_ok(self) -> bool:
        return all(v for _, v in self.checks)

    @property
    def ok(self) -> bool:
        if not self.t or not self.conditions_ok:
            return False
        if self.target_size is not None and len(self.t) < self.target_size:
            return False
        return True

    def to_json_dict(self) -> dict:
        return {
            "t": list(self.t),
            "strong_edges": {str(i): list(js) for i, js in self.strong_edges},
            "checks": dict(self.checks),
            "method": self.method,
            "constrained": self.constrained,
            "attempts": self.attempts,
            "target_size": self.target_size,
            "ok": self.ok,
            "params": {
                "d": self.params.d,
                "epsilon": self.params.epsilon,
                "internal_degree_cap": self.params.internal_degree_cap,
                "strong_edge_quota": self.params.strong_edge_quota,
                "load_cap": self.params.load_cap,
            },
        }


def _strong_candidates(
    inst: IsingInstance,
    graph: DegreeGraph,
    i: int,
    inside: Iterable[int],
    outside_excluded: set,
) -> Tuple[int, List[int]]:
    """Strongest internal magnitude and qualifying outside partners for i."""
    inside_set = set(inside)
    a_min = 0
    for k in graph.neighbors[i]:
        if k in inside_set:
            a_min = max(a_min, abs(inst.coupling(i, k)))
    # Candidates are drawn from true neighbors, so their couplings are
    # nonzero by construction.  (Unconstrained members without internal
    # neighbors never reach this helper: they are exempt.  Constrained
    # members with a_min == 0 get all their neighbors as candidates.)
    cands = [
        j
        for j in graph.neighbors[i]
        if j not in outside_excluded and abs(inst.coupling(i, j)) >= a_min
    ]
    return a_min, cands


def _greedy_select(inst: IsingInstance, i: int, cands: Sequence[int], quota: int) -> Tuple[int, ...]:
    ordered = sorted(cands, key=lambda j: (-abs(inst.coupling(i, j)), j))
    return tuple(ordered[:quota])


def check_T(
    inst: IsingInstance,
    t: Iterable[int],
    params: TParams,
    constrained: ConstrainedContext | None = None,
) -> TSetCertificate:
    """Evaluate all certificate conditions for an explicit candidate set.

    Strong-edge selection is deterministic here (largest |J| first, ties to
    the lower index), so re-checking a returned certificate's set always
    reproduces the same verdict.
    """
    t_sorted = tuple(sorted(set(t)))
    for i in t_sorted:
        if not 0 <= i < inst.n:
            raise ValueError("T member %d out of range" % i)
    side = set()
    if constrained is not None:
        side = set(constrained.t1) | set(constrained.t2)
        if side & set(t_sorted):
            raise ValueError("T must be disjoint from the side sets")
    graph = inst.degree_graph()
    t_set = set(t_sorted)
    quota = params.strong_edge_quota

    internal_ok = True
    count_ok = True
    strong: Dict[int, Tuple[int, ...]] = {}
    exempt: set = set()
    for i in t_sorted:
        internal = [k for k in graph.neighbors[i] if k in t_set]
        if len(internal) > params.internal_degree_cap:
            internal_ok = False
        if constrained is None and not internal:
            exempt.add(i)
            continue
        a_min, cands = _strong_candidates(inst, graph, i, internal, t_set | {i})
        if len(cands) < quota:
            count_ok = False
        strong[i] = _greedy_select(inst, i, cands, quota)

    strong_count: Dict[int, int] = {}
    for js in strong.values():
        for j in js:
            strong_count[j] = strong_count.get(j, 0) + 1
    load_ok = True
    for i in t_sorted:
        if i in exempt:
            continue
        load = sum(strong_count.get(j, 0) for j in graph.neighbors[i] if j not in t_set)
        if load > params.load_cap:
            load_ok = False
            break

    checks: List[Tuple[str, bool]] = [
        ("internal_degree", internal_ok),
        ("strong_edge_count", count_ok),
        ("strong_edge_load", load_ok),
    ]
    if constrained is not None:
        v0_size = inst.n - len(side)
        rhs = params.c_cross * constrained.j_max * (len(constrained.t1) + len(constrained.t2))
        cross_ok = all(
            v0_size * sum(abs(inst.coupling(i, j)) for j in side) <= rhs
            for i in t_sorted
        )
        checks.append(("cross_coupling_bound", cross_ok))
    return TSetCertificate(
        t=t_sorted,
        strong_edges=tuple(sorted((i, js) for i, js in strong.items())),
        params=params,
        checks=tuple(checks),
        constrained=constrained is not None,
    )


def _label_good(
    inst: IsingInstance,
    t0: List[int],
    params: TParams,
    constrained: ConstrainedContext | None,
    rng,
    strong_edge_rule: str,
) -> List[int]:
    """One labeling round: drop members violating any condition."""
    graph = inst.degree_graph()
    t0_set = set(t0)
    side = set() if constrained is None else set(constrained.t1) | set(constrained.t2)
    quota = params.strong_edge_quota
    passed12: Dict[int, Tuple[int, ...]] = {}
    exempt: set = set()
    bad: set = set()
    for i in t0:
        internal = [k for k in graph.neighbors[i] if k in t0_set]
        if constrained is None and not internal:
            exempt.add(i)
            continue
        if len(internal) > params.internal_degree_cap:
            bad.add(i)
            continue
        a_min, cands = _strong_candidates(inst, graph, i, internal, t0_set | {i})
        if len(cands) < quota:
            bad.add(i)
            continue
        if strong_edge_rule == "random":
            picked = tuple(sorted(int(x) for x in rng.choice(cands, size=quota, replace=False)))
        else:
            picked = _greedy_select(inst, i, cands, quota)
        passed12[i] = picked
    strong_count: Dict[int, int] = {}
    for js in passed12.values():
        for j in js:
            strong_count[j] = strong_count.get(j, 0) + 1
    for i in t0:
        if i in bad or i in exempt:
            continue
        load = sum(strong_count.get(j, 0) for j in graph.neighbors[i] if j not in t0_set)
        if load > params.load_cap:
            bad.add(i)
    if constrained is not None:
        v0_size = inst.n - len(side)
        rhs = params.c_cross * constrained.j_max * (len(constrained.t1) + len(constrained.t2))
        for i in t0:
            if i in bad:
                continue
            if v0_size * sum(abs(inst.coupling(i, j)) for j in side) > rhs:
                bad.add(i)
    return [i for i in t0 if i not in bad]


def find_T_randomized(
    inst: IsingInstance,
    params: TParams | None = None,
    seed: int = 0,
    max_retries: int = 20,
    within: Sequence[int] | None = None,
    constrained: ConstrainedContext | None = None,
    strong_edge_rule: str = "greedy",
) -> TSetCertificate:
    """Sample members at rate epsilon, drop rule violators, re-certify.

    Retries with fresh samples until the surviving set passes ``check_T``
    and reaches ``target_fraction * epsilon * pool`` members; otherwise the
    best attempt is returned with ``ok`` False.
    """
    if params is None:
        params = TParams.for_instance(inst)
    if strong_edge_rule not in ("greedy", "random"):
        raise ValueError("strong_edge_rule must be 'greedy' or 'random'")
    pool = list(range(inst.n)) if within is None else sorted(set(within))
    if constrained is not None:
        side = set(constrained.t1) | set(constrained.t2)
        pool = [i for i in pool if i not in side]
    target = max(1, math.ceil(params.target_fraction * params.epsilon * len(pool) - 1e-9))
    rng = rng_from(seed, _STREAM_TSET)
    best: TSetCertificate | None = None
    for attempt in range(1, max_retries + 1):
        draws = rng.random(len(pool))
        t0 = [i for i, u in zip(pool, draws) if u < params.epsilon]
        good = _label_good(inst, t0, params, constrained, rng, strong_edge_rule)
        cert = check_T(inst, good, params, constrained=constrained)
        cert = replace(
            cert,
            method="randomized(seed=%d,rule=%s)" % (seed, strong_edge_rule),
            attempts=attempt,
            target_size=target,
        )
        if cert.ok:
            return cert
        if best is None or (cert.conditions_ok, len(cert.t)) > (
            best.conditions_ok,
            len(best.t),
        ):
            best = cert
    return best if best is not None else check_T(inst, (), params, constrained)


def find_T_deterministic(
    inst: IsingInstance,
    size: int,
    params: TParams | None = None,
    max_subsets: int = MAX_DETERMINISTIC_SUBSETS,
) -> TSetCertificate:
    """Lexicographic scan over all size-``size`` subsets; first pass wins."""
    if params is None:
        params = TParams.for_instance(inst)
    if inst.n > MAX_DETERMINISTIC_N:
        raise ValueError(
            "deterministic search is gated to n <= %d" % MAX_DETERMINISTIC_N
        )
    empty = replace(
        check_T(inst, (), params),
        method="deterministic",
        target_size=max(size, 1),
    )
    if size < 1 or size > inst.n:
        return empty
    seen = 0
    for combo in combinations(range(inst.n), size):
        seen += 1
        if seen > max_subsets:
            break
        cert = check_T(inst, combo, params)
        if cert.conditions_ok:
            return replace(cert, method="deterministic", attempts=seen, target_size=size)
    return replace(empty, attempts=min(seen, max_subsets))


@dataclass(frozen=True)
class T1T2Result:
    t1: Tuple[int, ...]
    t2: Tuple[int, ...]
    target: int
    ok: bool
    method: str = "greedy"
    attempts: int = 1


def _t2_candidates(graph: DegreeGraph, t1: Sequence[int]) -> List[int]:
    t1_set = set(t1)
    out = []
    for j in range(graph.n):
        if j in t1_set:
            continue
        if any(nb in t1_set for nb in graph.neighbors[j]):
            continue
        out.append(j)
    return out


def find_T1T2(
    graph: DegreeGraph,
    alpha: float = 0.5,
    target: int | None = None,
    seed: int = 0,
    max_retries: int = 50,
    max_subsets: int = MAX_DETERMINISTIC_SUBSETS,
) -> T1T2Result:
    """Two equal-size sets with no coupling edges between them.

    The default target size is floor(alpha * n * ln(d) / d) with d the
    average degree.  Tries the lexicographically first candidate, then
    seeded random subsets, then (n <= 24) exhaustive subset enumeration;
    returns ``ok=False`` when every strategy fails (e.g. complete graphs).
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    n = graph.n
    if target is None:
        d = graph.average_degree
        if d < 2:
            raise ValueError("need average degree >= 2 to derive a target size")
        target = math.floor(alpha * n * math.log(d) / d)
    if target < 1:
        raise ValueError("target size must be >= 1")
    if 2 * target > n:
        return T1T2Result((), (), target, False, method="exhausted", attempts=0)

    def attempt(t1: Tuple[int, ...], method: str, tries: int) -> T1T2Result | None:
        cands = _t2_candidates(graph, t1)
        if len(cands) >= target:
            return T1T2Result(t1, tuple(cands[:target]), target, True, method, tries)
        return None

    res = attempt(tuple(range(target)), "greedy", 1)
    if res:
        return res
    rng = rng_from(seed, _STREAM_T1T2)
    for k in range(1, max_retries + 1):
        t1 = tuple(sorted(int(x) for x in rng.choice(n, size=target, replace=False)))
        res = attempt(t1, "randomized(seed=%d)" % seed, k)
        if res:
            return res
    tries = 0
    if n <= MAX_DETERMINISTIC_N:
        for combo in combinations(range(n), target):
            tries += 1
            if tries > max_subsets:
                break
            res = attempt(combo, "deterministic", tries)
            if res:
                return res
    return T1T2Result((), (), target, False, method="exhausted", attempts=tries)


@dataclass(frozen=True)
class GoodSetResult:
    t: Tuple[int, ...]
    t0: Tuple[int, ...]
    epsilon: float
    threshold_doubled: int  # good needs 2 * count >= floor(1/epsilon)
    ok: bool
    attempts: int


def good_set_nonsparse(
    inst: IsingInstance,
    epsilon: float | None = None,
    seed: int = 0,
    max_retries: int = 20,
) -> GoodSetResult:
    """Dense-graph variant: sample floor(epsilon*n) members, keep the "good" ones.

    A member is good when at least half of floor(1/epsilon) outside vertices
    carry a coupling magnitude at least matching the member's strongest
    coupling into the sample (vertices with no sampled neighbor match
    trivially).  Success means keeping at least half the sample.
    """
    n = inst.n
    if n < 2:
        raise ValueError("need n >= 2")
    if epsilon is None:
        epsilon = math.log2(n) / n
    if not 0.0 < epsilon <= 1.0:
        raise ValueError("epsilon must lie in (0, 1]")
    size0 = math.floor(epsilon * n)
    if size0 < 1:
        raise ValueError("epsilon * n too small: empty sample")
    inv = math.floor(1.0 / epsilon)
    graph = inst.degree_graph()
    rng = rng_from(seed, _STREAM_NONSPARSE)
    best: GoodSetResult | None = None
    for attempt in range(1, max_retries + 1):
        t0 = sorted(int(x) for x in rng.choice(n, size=size0, replace=False))
        t0_set = set(t0)
        good = []
        for i in t0:
            a_min = 0
            for k in graph.neighbors[i]:
                if k in t0_set:
                    a_min = max(a_min, abs(inst.coupling(i, k)))
            if a_min == 0:
                count = n - size0
            else:
                count = sum(
                    1
                    for j in graph.neighbors[i]
                    if j not in t0_set and abs(inst.coupling(i, j)) >= a_min
                )
            if 2 * count >= inv:
                good.append(i)
        ok = 2 * len(good) >= size0
        res = GoodSetResult(tuple(good), tuple(t0), epsilon, inv, ok, attempt)
        if ok:
            return res
        if best is None or len(res.t) > len(best.t):
            best = res
    return best  # type: ignore[return-value]

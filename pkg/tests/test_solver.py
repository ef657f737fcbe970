from itertools import combinations

import numpy as np
import pytest

from spinscape.generators import gen_csse, gen_multicopy, gen_regular
from spinscape.instance import Assignment, EnumerationLimitError, IsingInstance
from spinscape.solver import (
    _solve_with_T,
    compute_Z,
    effective_view,
    greedy_coloring,
    solve_avg_degree,
    solve_brute,
    solve_coloring_baseline,
    solve_combined,
    solve_effective,
)
from spinscape.tset import TParams, check_T, find_T_randomized

from helpers import exhaustive_min, random_instance


def assert_same_optimum(res, inst):
    energy, best = exhaustive_min(inst)
    assert res.energy == energy
    assert res.best == best
    assert inst.energy(res.best) == energy


class TestBrute:
    def test_matches_scalar_oracle(self):
        for seed in range(8):
            inst = random_instance(seed, n=7, density=0.5)
            assert_same_optimum(solve_brute(inst), inst)

    def test_lex_tie_break(self):
        # all-pairs instances have many optima; first rank wins
        res = solve_brute(gen_csse(6))
        assert res.best.bitstring() == "000111"

    def test_counts(self):
        res = solve_brute(gen_csse(4))
        assert res.leaves_explored == 16
        assert res.outer_assignments == 16

    def test_enumeration_guard(self):
        with pytest.raises(EnumerationLimitError):
            solve_brute(IsingInstance(30, [1] * 30))


class TestComputeZ:
    def test_edgeless_counts_outer_assignments(self):
        inst = IsingInstance(6, [1] * 6)
        assert compute_Z(inst, (0, 1, 2)) == 8

    def test_weak_fields_leave_all_members_free(self):
        # internal coupling weight 5 dominates cross fields of size 1
        inst = IsingInstance(4, [0] * 4, [(0, 1, 5), (0, 2, 1), (1, 3, 1)])
        assert compute_Z(inst, (0, 1)) == 16

    def test_empty_t(self):
        inst = IsingInstance(5, [1] * 5, [(0, 1, 2)])
        assert compute_Z(inst, ()) == 32

    def test_strong_fields_fix_everything(self):
        inst = IsingInstance(4, [10, 10, 0, 0], [(0, 1, 1), (0, 2, 3), (1, 3, 3)])
        # members 0, 1 have |field| >= 10 - 3 > h_max = 1 for every outer row
        assert compute_Z(inst, (0, 1)) == 4

    def test_all_pairs_single_member(self):
        # a lone member has no internal couplings, so it is fixed for every
        # one of the 8 outer assignments
        assert compute_Z(gen_csse(4), (0,)) == 8


class TestEffectiveView:
    def test_isolated_member_is_fixed(self):
        inst = IsingInstance(3, [0, 0, 0], [(0, 2, 1), (1, 2, 1)])
        view = effective_view(inst, (2,), Assignment.from_spins([1, 1]))
        assert view.h_eff[2] == 2
        assert view.h_max[2] == 0
        assert view.fixed == frozenset({2})
        assert view.forced[2] == -1

    def test_internal_weight_keeps_members_free(self):
        inst = IsingInstance(4, [0] * 4, [(0, 1, 5), (0, 2, 1), (1, 3, 1)])
        view = effective_view(inst, (0, 1), Assignment.from_spins([1, 1]))
        assert view.h_eff == {0: 1, 1: 1}
        assert view.h_max == {0: 5, 1: 5}
        assert view.free == frozenset({0, 1})
        assert view.fixed == frozenset()

    def test_whole_set_view(self):
        inst = IsingInstance(3, [2, -1, 0], [(0, 1, 3), (1, 2, -4)])
        view = effective_view(inst, (0, 1, 2), Assignment(0, 0))
        assert view.h_eff == {0: 2, 1: -1, 2: 0}
        assert view.h_max == {0: 3, 1: 7, 2: 4}

    def test_zero_field_fixed_defaults_to_plus_one(self):
        inst = IsingInstance(2, [0, 0], [(0, 1, 2)])
        view = effective_view(inst, (0,), Assignment.from_spins([1]))
        # field 2 from the outer spin cancels nothing; pick h to cancel it
        inst2 = IsingInstance(2, [-2, 0], [(0, 1, 2)])
        view2 = effective_view(inst2, (0,), Assignment.from_spins([1]))
        assert view2.h_eff[0] == 0
        assert view2.h_max[0] == 0
        assert view2.forced[0] == 1
        assert view.fixed == frozenset({0})

    def test_domain_mismatch(self):
        inst = IsingInstance(4, [0] * 4)
        with pytest.raises(ValueError):
            effective_view(inst, (0, 1), Assignment.from_spins([1]))


class TestEngineExactness:
    def test_boundary_tie_returns_lex_min(self):
        # |field| equals h_max on variable 0: both spins appear in optima and
        # the smaller bit pattern (spin -1) must win
        inst = IsingInstance(2, [-1, -3], [(0, 1, 1)])
        res = _solve_with_T(inst, (0, 1), "effective-field")
        assert res.energy == -3
        assert res.best.bitstring() == "01"
        assert_same_optimum(res, inst)

    def test_zero_field_members_prefer_minus_one(self):
        inst = IsingInstance(3, [0, 0, 0])
        res = _solve_with_T(inst, (0, 1, 2), "effective-field")
        assert res.best.bits == 0
        assert res.energy == 0

    def test_matches_brute_for_arbitrary_t(self):
        for seed in range(24):
            n = 6 + (seed % 5)
            inst = random_instance(seed, n=n, density=(0.15, 0.45, 0.8)[seed % 3])
            for pick in range(3):
                sel = [i for i in range(n) if (i * 7 + seed + pick) % 3 != 0]
                res = _solve_with_T(inst, sel, "effective-field")
                assert_same_optimum(res, inst)
                assert res.leaves_explored == compute_Z(inst, sel)

    def test_t_covering_all_variables(self):
        inst = random_instance(3, n=8, density=0.4)
        res = _solve_with_T(inst, range(8), "effective-field")
        assert_same_optimum(res, inst)
        assert res.outer_assignments == 1
        assert res.leaves_explored == compute_Z(inst, range(8))

    def test_empty_t_equals_brute(self):
        inst = random_instance(4, n=9, density=0.3)
        res = _solve_with_T(inst, (), "effective-field")
        assert_same_optimum(res, inst)
        assert res.leaves_explored == 1 << 9

    def test_degenerate_all_pairs_lex_min(self):
        inst = gen_csse(8)
        res = _solve_with_T(inst, (0, 2, 4, 6), "effective-field")
        oracle = solve_brute(inst)
        assert res.energy == oracle.energy
        assert res.best == oracle.best

    def test_tie_cap_triggers_rescan(self):
        inst = IsingInstance(8, [0] * 8)  # every assignment is optimal
        res = _solve_with_T(inst, (0, 1, 2, 3), "effective-field", tie_row_cap=3)
        assert res.counters["repair_rescan"] == 1
        assert res.best.bits == 0
        assert res.energy == 0

    def test_workers_do_not_change_anything(self):
        inst = random_instance(11, n=14, density=0.3)
        one = _solve_with_T(inst, range(5), "effective-field", block_bits=6, workers=1)
        four = _solve_with_T(inst, range(5), "effective-field", block_bits=6, workers=4)
        assert one == four

    def test_outer_guard(self):
        inst = IsingInstance(30, [1] * 30)
        with pytest.raises(EnumerationLimitError):
            _solve_with_T(inst, (0, 1), "effective-field")

    def test_strictly_dominated_members_agree_with_oracle_optima(self):
        # every optimum of the full instance must respect a strict domination
        inst = random_instance(7, n=8, density=0.5, allow_zero_field=False)
        t = (2, 3, 4)
        res = _solve_with_T(inst, t, "effective-field")
        jf = inst.full_coupling_matrix()
        h_max = np.abs(jf[np.ix_(t, t)]).sum(axis=1)
        e_star = res.energy
        for rank in range(1 << 8):
            a = Assignment.from_rank(rank, 8)
            if inst.energy(a) != e_star:
                continue
            spins = a.spins()
            for pos, i in enumerate(t):
                heff = inst.h[i] + sum(
                    inst.coupling(i, j) * int(spins[j])
                    for j in range(8)
                    if j not in t and inst.coupling(i, j)
                )
                if abs(heff) > int(h_max[pos]):
                    assert int(spins[i]) == (-1 if heff > 0 else 1)


class TestColoringBaseline:
    def test_greedy_coloring_is_proper(self):
        g = gen_multicopy(3, 4).degree_graph()
        colors = greedy_coloring(g)
        for i in range(g.n):
            for j in g.neighbors[i]:
                assert colors[i] != colors[j]

    def test_block_instances_leaf_count(self):
        inst = gen_multicopy(3, 4)
        res = solve_coloring_baseline(inst)
        assert res.counters["colors"] == 4
        assert res.counters["t_size"] == 3
        assert res.leaves_explored == 1 << 9  # 2 ** (3 * copies)
        assert_same_optimum(res, inst)

    def test_independent_t_means_leaves_equal_outers(self):
        inst = random_instance(5, n=10, density=0.4)
        res = solve_coloring_baseline(inst)
        assert res.leaves_explored == res.outer_assignments
        assert_same_optimum(res, inst)


class TestSolveEffective:
    def test_explicit_certificate_runs_the_scan(self):
        inst = gen_multicopy(4, 4)
        cert = find_T_randomized(inst, seed=1)
        assert cert.ok
        res = solve_effective(inst, cert=cert)
        assert res.method == "effective-field"
        assert_same_optimum(res, inst)
        assert res.leaves_explored == compute_Z(inst, cert.t)

    def test_rejects_failed_certificate(self):
        inst = gen_csse(6)
        bad = check_T(inst, range(6), TParams.for_instance(inst))
        assert not bad.ok
        with pytest.raises(ValueError):
            solve_effective(inst, cert=bad)

    def test_auto_high_degree_uses_found_set(self):
        inst = gen_csse(18)  # degree 17 reaches the gate
        res = solve_effective(inst, seed=2)
        assert res.method == "effective-field"
        oracle = solve_brute(inst)
        assert res.energy == oracle.energy
        assert res.best == oracle.best

    def test_auto_low_degree_falls_back_to_coloring(self):
        inst = gen_multicopy(3, 4)
        res = solve_effective(inst)
        assert res.method == "effective-field:coloring-fallback"
        assert_same_optimum(res, inst)

    def test_auto_edgeless_one_color_class(self):
        inst = IsingInstance(6, [2, -1, 0, 3, -2, 1])
        res = solve_effective(inst)
        assert res.method == "effective-field:coloring-fallback"
        assert res.leaves_explored == 1  # every member is fixed by its field
        assert_same_optimum(res, inst)

    def test_random_suite(self):
        for seed in range(12):
            inst = random_instance(100 + seed, n=10, density=0.35)
            assert_same_optimum(solve_effective(inst, seed=seed), inst)


class TestAvgDegree:
    def star(self, n=9):
        triples = [(0, i, 2) for i in range(1, n)]
        h = [(i % 5) - 2 for i in range(n)]
        return IsingInstance(n, h, triples)

    def test_star_enumerates_only_the_hub(self):
        inst = self.star()
        res = solve_avg_degree(inst)
        assert res.counters["enumerated_vars"] == 1
        assert res.counters["branches"] == 2
        assert res.method.startswith("avg-degree:")
        assert_same_optimum(res, inst)

    def test_regular_graph_has_no_outliers(self):
        inst = gen_regular(12, 3, seed=2)
        res = solve_avg_degree(inst)
        assert res.counters["enumerated_vars"] == 0
        assert_same_optimum(res, inst)

    def test_random_suite(self):
        for seed in range(10):
            inst = random_instance(200 + seed, n=11, density=0.3)
            assert_same_optimum(solve_avg_degree(inst, seed=seed), inst)

    def test_leaves_accumulate_over_branches(self):
        inst = self.star(8)
        res = solve_avg_degree(inst)
        # two hub branches; the conditioned remainder is edgeless, so the
        # coloring strategy fixes every variable and each branch costs one leaf
        assert res.leaves_explored == 2
        assert res.outer_assignments == 2
        assert_same_optimum(res, inst)


class TestCombined:
    def test_block_instance_main_path(self):
        inst = gen_multicopy(5, 4)
        res = solve_combined(inst, seed=0)
        assert res.method == "combined"
        assert res.counters["t1_size"] == 3
        assert res.counters["t2_size"] == 3
        side_width = (1 << 3) + (1 << 3)
        assert res.leaves_explored % side_width == 0
        oracle = solve_brute(inst)
        assert res.energy == oracle.energy
        assert res.best == oracle.best

    def test_low_degree_fallback(self):
        inst = IsingInstance(6, [1, -2, 3, 0, 1, -1], [(0, 1, 2)])
        res = solve_combined(inst)
        assert res.method == "combined:effective-fallback"
        assert_same_optimum(res, inst)

    def test_complete_graph_fallback(self):
        triples = [(i, j, 1) for i, j in combinations(range(8), 2)]
        inst = IsingInstance(8, [0] * 8, triples)
        res = solve_combined(inst)
        assert res.method == "combined:effective-fallback"
        oracle = solve_brute(inst)
        assert res.energy == oracle.energy
        assert res.best == oracle.best

    def test_outlier_split(self):
        # hub plus one clique: the hub's degree is far above average
        triples = [(i, j, 1) for i, j in combinations(range(1, 5), 2)]
        triples += [(0, i, 3) for i in range(1, 9)]
        inst = IsingInstance(9, [1] * 9, triples)
        res = solve_combined(inst, degree_dichotomy_factor=1.5)
        assert res.method == "combined:outlier-split"
        assert_same_optimum(res, inst)

    def test_j_max_validation(self):
        inst = gen_multicopy(5, 4)
        with pytest.raises(ValueError):
            solve_combined(inst, j_max=1)  # every coupling row weighs at least 2

    def test_random_suite(self):
        for seed in range(8):
            inst = random_instance(300 + seed, n=12, density=0.4)
            res = solve_combined(inst, seed=seed)
            oracle = solve_brute(inst)
            assert res.energy == oracle.energy
            assert res.best == oracle.best

    def test_workers_deterministic(self):
        inst = gen_multicopy(5, 4)
        one = solve_combined(inst, workers=1, block_bits=8)
        four = solve_combined(inst, workers=4, block_bits=8)
        assert one == four


class TestResultInvariants:
    SOLVERS = (
        solve_brute,
        solve_coloring_baseline,
        lambda inst: solve_effective(inst, seed=5),
        lambda inst: solve_avg_degree(inst, seed=5),
        lambda inst: solve_combined(inst, seed=5),
    )

    def test_leaves_at_least_outer_assignments(self):
        for seed in range(4):
            inst = random_instance(700 + seed, n=10, density=0.5)
            for solver in self.SOLVERS:
                res = solver(inst)
                assert res.leaves_explored >= res.outer_assignments

    def test_no_flip_improves_reported_best(self):
        for seed in range(4):
            inst = random_instance(710 + seed, n=10, density=0.5)
            for solver in self.SOLVERS:
                res = solver(inst)
                for i in range(inst.n):
                    assert inst.flip_delta(res.best, i) >= 0

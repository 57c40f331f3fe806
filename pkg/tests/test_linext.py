"""Extension counting versus the permutation oracle, plus efficiency math."""

import random
from fractions import Fraction

import pytest

from sortbounds.posets import Poset, add_comparison, dual
from sortbounds.linext import (
    DownSetBoundExceeded,
    Efficiency,
    LinExtWorkspace,
    count_all_children,
    count_down_sets,
    count_linear_extensions,
    down_set_bound,
    efficiency,
    enumerate_down_sets,
    is_prunable,
    total_efficiency,
)
from sortbounds.oracle import brute_extensions

from conftest import all_posets_upto, bench7, random_poset


class TestKnownCounts:
    def test_unordered_is_factorial(self):
        for n in range(1, 7):
            assert count_linear_extensions(Poset.antichain(n)) == _fact(n)

    def test_total_order_is_one(self):
        for n in range(1, 8):
            assert count_linear_extensions(Poset.chain(n)) == 1

    def test_two_disjoint_chains(self):
        p = Poset.from_edges(4, [(0, 1), (2, 3)])
        assert count_linear_extensions(p) == 6

    def test_chain_plus_singleton(self):
        p = Poset.from_edges(3, [(0, 1)])
        assert count_linear_extensions(p) == 3

    def test_bench7(self):
        p = bench7()
        assert count_linear_extensions(p) == brute_extensions(p)


class TestOracleAgreement:
    def test_all_n4(self, posets_n4):
        for p in posets_n4:
            assert count_linear_extensions(p) == brute_extensions(p)

    def test_all_n5(self, posets_n5):
        ws = LinExtWorkspace(5)
        for p in posets_n5:
            assert count_linear_extensions(p, ws) == brute_extensions(p)

    def test_random_n6_n7(self):
        rng = random.Random(0xE0)
        for n in (6, 7):
            for _ in range(60):
                p = random_poset(n, rng)
                assert count_linear_extensions(p) == brute_extensions(p)

    def test_dual_preserves_count(self):
        rng = random.Random(0xE1)
        for _ in range(40):
            p = random_poset(6, rng)
            assert count_linear_extensions(dual(p)) == count_linear_extensions(p)


class TestChildren:
    def test_unordered_children(self):
        kids = count_all_children(Poset.antichain(3))
        assert set(kids.values()) == {3}
        assert len(kids) == 6

    def test_chain_plus_singleton_children(self):
        p = Poset.from_edges(3, [(0, 1)])
        kids = count_all_children(p)
        assert kids[(2, 0)] == 1
        assert kids[(0, 2)] == 2
        assert kids[(1, 2)] == 1
        assert kids[(2, 1)] == 2

    def test_matches_recount(self):
        rng = random.Random(0xE2)
        for n in (5, 6, 7):
            for _ in range(25):
                p = random_poset(n, rng)
                kids = count_all_children(p)
                assert set(kids) == {(u, v) for a, b in p.incomparable_pairs()
                                     for u, v in ((a, b), (b, a))}
                for (u, v), e_child in kids.items():
                    assert e_child == count_linear_extensions(add_comparison(p, u, v))

    def test_matches_recount_many_singletons(self):
        # Exercise the singleton-reduction patch-back on every pair kind:
        # single/single, single/other, other/other.
        rng = random.Random(0xE3)
        for _ in range(30):
            n = rng.randint(5, 8)
            p = random_poset(n, rng, comparisons=rng.randint(1, 3))
            if len(p.singletons()) < 2:
                continue
            for (u, v), e_child in count_all_children(p).items():
                assert e_child == count_linear_extensions(add_comparison(p, u, v))

    def test_conservation(self):
        rng = random.Random(0xE4)
        for _ in range(30):
            p = random_poset(6, rng)
            e = count_linear_extensions(p)
            kids = count_all_children(p)
            for u, v in p.incomparable_pairs():
                assert kids[(u, v)] + kids[(v, u)] == e

    def test_worst_child_at_least_half(self):
        rng = random.Random(0xE5)
        for _ in range(30):
            p = random_poset(6, rng)
            e = count_linear_extensions(p)
            kids = count_all_children(p)
            for u, v in p.incomparable_pairs():
                assert max(kids[(u, v)], kids[(v, u)]) * 2 >= e

    def test_total_order_has_no_children(self):
        assert count_all_children(Poset.chain(5)) == {}


class TestWorkspaceModes:
    def test_dense_equals_compact(self):
        rng = random.Random(0xE6)
        dense = LinExtWorkspace(7, mode="dense")
        compact = LinExtWorkspace(7, mode="compact")
        for _ in range(25):
            p = random_poset(7, rng)
            assert (count_linear_extensions(p, dense)
                    == count_linear_extensions(p, compact))
            assert count_all_children(p, dense) == count_all_children(p, compact)

    def test_workspace_reuse_is_clean(self):
        # A wide poset then a narrow one: stale table entries must not leak.
        ws = LinExtWorkspace(6)
        assert count_linear_extensions(Poset.antichain(6), ws) == 720
        assert count_linear_extensions(Poset.chain(6), ws) == 1
        assert count_linear_extensions(Poset.antichain(6), ws) == 720

    def test_max_down_sets_tracking(self):
        ws = LinExtWorkspace(6)
        count_linear_extensions(Poset.chain(6), ws)
        assert ws.max_down_sets == 7
        # Three disjoint 2-chains: 27 ideals, and the mark only moves up.
        pairs = Poset.from_edges(6, [(0, 1), (2, 3), (4, 5)])
        count_linear_extensions(pairs, ws)
        assert ws.max_down_sets == 27
        count_linear_extensions(Poset.chain(6), ws)
        assert ws.max_down_sets == 27

    def test_tracking_covers_reduced_posets(self):
        # Singleton reduction shrinks the poset below the workspace capacity;
        # the call must still reuse the workspace and record its ideal count.
        ws = LinExtWorkspace(6)
        assert count_linear_extensions(Poset.antichain(6), ws) == 720
        assert ws.max_down_sets == 2

    def test_dense_workspace_too_small(self):
        with pytest.raises(ValueError):
            count_linear_extensions(Poset.chain(5), LinExtWorkspace(3, mode="dense"))

    def test_rejects_unknown_mode(self):
        with pytest.raises(ValueError):
            LinExtWorkspace(5, mode="huge")


class TestDownSets:
    def test_unordered(self):
        for n in range(1, 8):
            assert count_down_sets(Poset.antichain(n)) == 1 << n

    def test_single_two_chain(self):
        assert count_down_sets(Poset.from_edges(2, [(0, 1)])) == 3

    def test_disjoint_two_chains(self):
        for k in (1, 2, 3):
            edges = [(2 * i, 2 * i + 1) for i in range(k)]
            p = Poset.from_edges(2 * k, edges)
            assert count_down_sets(p) == 3 ** k

    def test_chain(self):
        for n in range(1, 8):
            assert count_down_sets(Poset.chain(n)) == n + 1

    def test_masks_are_ideals(self):
        rng = random.Random(0xE7)
        for _ in range(20):
            p = random_poset(6, rng)
            pred = p.pred_rows()
            seen = set()
            for d in enumerate_down_sets(p):
                assert d not in seen
                seen.add(d)
                for u in range(p.n):
                    if (d >> u) & 1:
                        assert pred[u] & ~d == 0

    def test_bound_guard(self):
        with pytest.raises(DownSetBoundExceeded):
            enumerate_down_sets(Poset.antichain(6), bound=10)
        # floor(sqrt(3)^(n+2)); raw antichains outgrow this from n=8 on,
        # which is why counting always singleton-reduces first.
        assert down_set_bound(1) == 5
        assert down_set_bound(6) == 81
        assert down_set_bound(13) == 3787
        assert 1 << 8 > down_set_bound(8)

    def test_bound_propagates(self):
        # Three disjoint 2-chains: no singletons to reduce, 27 ideals.
        pairs = Poset.from_edges(6, [(0, 1), (2, 3), (4, 5)])
        with pytest.raises(DownSetBoundExceeded):
            count_linear_extensions(pairs, bound=20)
        with pytest.raises(DownSetBoundExceeded):
            count_all_children(pairs, bound=20)


class TestEfficiency:
    def test_start_state_is_one(self):
        eff = efficiency(Poset.antichain(5), 0, 7)
        assert eff.value == 1
        assert eff.extensions == 120

    def test_known_totals(self):
        assert round(float(total_efficiency(13, 33)), 2) == 0.72
        assert round(float(total_efficiency(12, 29)), 2) == 0.89
        assert total_efficiency(4, 5) == Fraction(24, 32)

    def test_exact_value(self):
        p = Poset.from_edges(4, [(0, 1), (2, 3)])
        eff = efficiency(p, 2, 5)
        assert eff.value == Fraction(24, 4 * 6)
        assert eff.as_float == 1.0
        assert not eff.exceeds(Fraction(1))
        assert eff.exceeds(Fraction(99, 100))

    def test_precomputed_extensions(self):
        eff = efficiency(None, 3, 10, n=5, extensions=7)
        assert eff.value == Fraction(120, 8 * 7)

    def test_requires_inputs(self):
        with pytest.raises(ValueError):
            efficiency(None, 0, 5)
        with pytest.raises(ValueError):
            efficiency(None, 0, 5, n=4)
        with pytest.raises(ValueError):
            efficiency(Poset.antichain(4), 6, 5)

    def test_prune_boundary(self):
        # With budget - c = 3 remaining, 8 extensions survive but 9 cannot.
        assert not is_prunable(8, 2, 5)
        assert is_prunable(9, 2, 5)

    def test_prunable_iff_below_total_efficiency(self):
        # e > 2^(budget-c) rearranges to E(P) < n!/2^budget.
        rng = random.Random(0xE8)
        for _ in range(50):
            n = rng.randint(4, 7)
            budget = rng.randint(5, 12)
            c = rng.randint(0, budget)
            e = rng.randint(1, _fact(n))
            eff = efficiency(None, c, budget, n=n, extensions=e)
            assert is_prunable(e, c, budget) == (eff.value < total_efficiency(n, budget))


def _fact(n: int) -> int:
    out = 1
    for k in range(2, n + 1):
        out *= k
    return out

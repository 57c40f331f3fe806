"""Poset representation, mutation, and serialization tests."""

import random

import pytest

from sortbounds.posets import (
    FLAG_CANONICAL,
    FLAG_SORTABLE,
    FLAG_UNKNOWN,
    Poset,
    Relation,
    add_comparison,
    dual,
    hasse_reduce,
    serialized_size,
    transitive_closure,
)
from conftest import BENCH7_EDGES, bench7, random_poset


class TestClosure:
    def test_antichain_closure_is_identity(self):
        r = transitive_closure(Poset.antichain(3))
        assert r.rows == (0b001, 0b010, 0b100)

    def test_chain_closure_adds_transitive_edge(self):
        p = Poset.from_edges(3, [(0, 1), (1, 2)])
        r = transitive_closure(p)
        assert r.contains(0, 2)
        assert r.strict_rows() == (0b110, 0b100, 0)

    def test_bench7_closure_contains_all_implied_edges(self):
        p = bench7()
        clos = p.closure_rows()
        implied = [(0, 3), (0, 4), (0, 5), (0, 6), (1, 3), (1, 4), (1, 5),
                   (1, 6), (2, 4), (2, 5), (2, 6)]
        for u, v in implied:
            assert (clos[u] >> v) & 1
        assert sum(c.bit_count() for c in clos) == 19


class TestHasseReduce:
    def test_chain_closure_reduces_to_two_edges(self):
        r = Relation(3, (0b111, 0b110, 0b100))
        p = hasse_reduce(r)
        assert sorted(p.hasse_edges()) == [(0, 1), (1, 2)]

    def test_identity_relation_reduces_to_empty(self):
        r = Relation(5, tuple(1 << i for i in range(5)))
        assert hasse_reduce(r).is_unordered()

    def test_rejects_cycle(self):
        r = Relation(2, (0b11, 0b11))
        with pytest.raises(ValueError):
            hasse_reduce(r)

    def test_rejects_missing_reflexivity(self):
        with pytest.raises(ValueError):
            hasse_reduce(Relation(2, (0b10, 0b10)))

    def test_round_trip_on_random_posets(self):
        rng = random.Random(0xC0DE)
        for _ in range(300):
            p = random_poset(rng.randrange(2, 8), rng)
            r = transitive_closure(p)
            q = hasse_reduce(r)
            assert q == p
            assert transitive_closure(q) == r


class TestAddComparison:
    def test_antichain_pair_becomes_chain(self):
        p = add_comparison(Poset.antichain(2), 0, 1)
        assert p.hasse == (0b10, 0)
        assert p.is_total_order()

    def test_joining_two_pairs_gives_four_chain(self):
        p = Poset.from_edges(4, [(0, 1), (2, 3)])
        q = add_comparison(p, 1, 2)
        assert q.is_total_order()
        assert q.edge_count() == 3

    def test_rejects_comparable_elements(self):
        p = Poset.from_edges(3, [(0, 1), (1, 2)])
        with pytest.raises(ValueError):
            add_comparison(p, 0, 2)
        with pytest.raises(ValueError):
            add_comparison(p, 1, 1)

    def test_new_edge_is_hasse_edge_of_result(self):
        rng = random.Random(7)
        for _ in range(200):
            p = random_poset(rng.randrange(2, 8), rng)
            free = [(u, v) for u, v in p.incomparable_pairs()]
            if not free:
                continue
            u, v = rng.choice(free)
            q = add_comparison(p, u, v)
            # u < v keeps labels stable, so the edge is directly visible
            assert (q.hasse[u] >> v) & 1

    def test_closure_matches_manual_recomputation(self):
        rng = random.Random(99)
        for _ in range(300):
            p = random_poset(rng.randrange(2, 8), rng)
            free = p.incomparable_pairs()
            if not free:
                continue
            u, v = rng.choice(free)
            q = add_comparison(p, u, v)
            clos = list(p.closure_rows())
            down = clos[v] | (1 << v)
            ups = [x for x in range(p.n) if (clos[x] >> u) & 1] + [u]
            for x in ups:
                clos[x] |= down
            assert tuple(clos) == q.closure_rows()

    def test_edge_growth_bound(self):
        rng = random.Random(1234)
        for _ in range(400):
            p = random_poset(rng.randrange(2, 9), rng)
            free = p.incomparable_pairs()
            if not free:
                continue
            u, v = rng.choice(free)
            if rng.random() < 0.5:
                u, v = v, u
            q = add_comparison(p, u, v)
            assert q.edge_count() <= p.edge_count() + 1
            assert q.relation_count() > p.relation_count()


class TestDual:
    def test_chain_is_self_dual(self):
        p = Poset.from_edges(3, [(0, 1), (1, 2)])
        assert dual(p) == p

    def test_v_poset_dual(self):
        v = Poset.from_edges(3, [(0, 2), (1, 2)])
        lam = dual(v)
        assert sorted(lam.hasse_edges()) == [(0, 1), (0, 2)]
        assert dual(lam) == v

    def test_dual_preserves_counts(self):
        rng = random.Random(5)
        for _ in range(300):
            p = random_poset(rng.randrange(2, 9), rng)
            d = dual(p)
            assert d.edge_count() == p.edge_count()
            assert d.relation_count() == p.relation_count()
            assert dual(d).edge_count() == p.edge_count()


class TestShapeQueries:
    def test_chain_is_total_order(self):
        assert Poset.chain(6).is_total_order()
        assert not Poset.antichain(6).is_total_order()

    def test_antichain_singletons(self):
        p = Poset.antichain(5)
        assert p.singletons() == [0, 1, 2, 3, 4]
        assert p.pairs() == []

    def test_pair_plus_singletons(self):
        p = Poset.from_edges(4, [(0, 1)])
        assert p.singletons() == [2, 3]
        assert p.pairs() == [(0, 1)]

    def test_two_pairs(self):
        p = Poset.from_edges(4, [(0, 1), (2, 3)])
        assert p.pairs() == [(0, 1), (2, 3)]
        assert p.singletons() == []

    def test_larger_component_is_not_a_pair(self):
        p = Poset.from_edges(4, [(0, 2), (1, 2)])
        assert p.pairs() == []
        assert p.singletons() == [3]

    def test_single_element_is_total_order(self):
        assert Poset.antichain(1).is_total_order()


class TestSerialization:
    def test_size_formula(self):
        for n in range(1, 32):
            expected = (n * (n - 1) // 2 + 5 + 7) // 8
            assert serialized_size(n) == expected
            assert len(Poset.antichain(n).serialize()) == expected

    def test_n5_fits_two_bytes(self):
        assert serialized_size(5) == 2

    def test_round_trip(self):
        rng = random.Random(42)
        for _ in range(300):
            n = rng.randrange(1, 12)
            p = random_poset(n, rng)
            flags = rng.randrange(32)
            p = p.with_flags(flags)
            q = Poset.deserialize(n, p.serialize())
            assert q.hasse == p.hasse
            assert q.flags == flags

    def test_key_bytes_mask_status_only(self):
        p = bench7().with_flags(FLAG_CANONICAL | FLAG_SORTABLE | FLAG_UNKNOWN)
        q = p.with_flags(FLAG_CANONICAL)
        assert p.key_bytes() == q.key_bytes()
        assert p.serialize() != q.serialize()
        r = p.with_flags(0)
        assert r.key_bytes() != p.key_bytes()

    def test_rejects_dirty_padding(self):
        # n=4 stores 6 + 5 = 11 bits in 2 bytes, leaving 5 padding bits
        data = bytearray(Poset.antichain(4).serialize())
        data[-1] |= 0x80
        with pytest.raises(ValueError):
            Poset.deserialize(4, bytes(data))

    def test_rejects_wrong_length(self):
        with pytest.raises(ValueError):
            Poset.deserialize(5, b"\x00")


class TestIdentity:
    def test_status_flags_excluded(self):
        p = bench7()
        assert p.with_flags(FLAG_SORTABLE) == p.with_flags(FLAG_UNKNOWN)
        assert hash(p.with_flags(FLAG_SORTABLE)) == hash(p.with_flags(0))

    def test_canonical_flags_included(self):
        p = bench7()
        assert p.with_flags(FLAG_CANONICAL) != p.with_flags(0)

    def test_validation_rejects_transitive_edge(self):
        with pytest.raises(ValueError):
            Poset(3, (0b110, 0b100, 0))

    def test_validation_rejects_lower_triangle(self):
        with pytest.raises(ValueError):
            Poset(3, (0, 0b001, 0))

    def test_relabel_requires_topological_perm(self):
        p = Poset.from_edges(3, [(0, 1)])
        q = p.relabeled([1, 2, 0])
        assert sorted(q.hasse_edges()) == [(1, 2)]
        with pytest.raises(ValueError):
            p.relabeled([1, 0, 2])

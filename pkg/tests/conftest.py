"""Shared fixtures and random-poset helpers for the test suite."""

import random

import pytest

from sortbounds.posets import Poset, add_comparison


def random_poset(n: int, rng: random.Random, comparisons: int | None = None) -> Poset:
    """Build a poset by adding random comparisons to the antichain."""
    p = Poset.antichain(n)
    if comparisons is None:
        comparisons = rng.randrange(0, n * (n - 1) // 2 + 1)
    for _ in range(comparisons):
        free = p.incomparable_pairs()
        if not free:
            break
        u, v = rng.choice(free)
        if rng.random() < 0.5:
            u, v = v, u
        p = add_comparison(p, u, v)
    return p


def all_posets_upto(n: int) -> list[Poset]:
    """Every poset on exactly n labeled elements, deduplicated by rows.

    Enumerates closures reachable by repeatedly adding comparisons; since
    every poset arises from its Hasse edges one at a time, this is complete.
    """
    seen: set[tuple[int, ...]] = set()
    out: list[Poset] = []
    stack = [Poset.antichain(n)]
    while stack:
        p = stack.pop()
        if p.hasse in seen:
            continue
        seen.add(p.hasse)
        out.append(p)
        for u, v in p.incomparable_pairs():
            stack.append(add_comparison(p, u, v))
            stack.append(add_comparison(p, v, u))
    return out


@pytest.fixture(scope="session")
def posets_n4() -> list[Poset]:
    return all_posets_upto(4)


@pytest.fixture(scope="session")
def posets_n5() -> list[Poset]:
    return all_posets_upto(5)


# 7-element benchmark poset used across modules: a diamond-like DAG whose
# only nontrivial automorphisms swap 0 with 1 and 4 with 5.
BENCH7_EDGES = [(0, 2), (1, 2), (2, 3), (3, 4), (3, 5), (4, 6), (5, 6)]


def bench7() -> Poset:
    return Poset.from_edges(7, BENCH7_EDGES)

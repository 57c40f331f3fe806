"""Independent reference implementations used to validate the fast paths.

Everything here favors directness over speed: permutation enumeration for
extension counts, subset enumeration for predecessors, and a plain minimax
game evaluation for sortability, memoized only by the exact relation.
These share nothing with the optimized modules beyond the Poset type, so
agreement between the two routes is evidence rather than tautology.
"""

from itertools import permutations

import numpy as np
from numba import njit
from numba.core import types
from numba.typed import Dict

from .posets import Poset

SMALL_S = {1: 0, 2: 1, 3: 3, 4: 5, 5: 7, 6: 10, 7: 13}


def info_lower_bound(n: int) -> int:
    """ceil(log2(n!)), the information-theoretic comparison bound."""
    if not 1 <= n <= 47:
        raise ValueError("n must be in 1..47")
    fact = 1
    for k in range(2, n + 1):
        fact *= k
    return (fact - 1).bit_length()


def ford_johnson_count(n: int) -> int:
    """Comparisons used by merge insertion: sum of ceil(log2(3k/4))."""
    if not 1 <= n <= 47:
        raise ValueError("n must be in 1..47")
    return sum((3 * k - 1).bit_length() - 2 for k in range(1, n + 1))


def brute_extensions(p: Poset) -> int:
    """e(P) by checking all n! orderings."""
    if p.n > 8:
        raise ValueError("brute force is limited to n <= 8")
    edges = p.hasse_edges()
    count = 0
    for perm in permutations(range(p.n)):
        pos = [0] * p.n
        for idx, v in enumerate(perm):
            pos[v] = idx
        if all(pos[a] < pos[b] for a, b in edges):
            count += 1
    return count


def brute_predecessors(p: Poset, u: int, v: int) -> set[frozenset[tuple[int, int]]]:
    """Hasse diagrams Q, with u and v incomparable, whose closure plus
    (u, v) closes back to p's relation.

    Candidates are formed by deleting (u, v) and any subset of
    S = {(x, y) : x <= u, v <= y, (x, y) != (u, v)} from the closure, then
    keeping those that are transitively closed and restore the relation
    when (u, v) is added back.
    """
    if p.n > 7:
        raise ValueError("brute force is limited to n <= 7")
    if not (p.hasse[u] >> v) & 1:
        raise ValueError(f"({u}, {v}) is not a Hasse edge")
    n = p.n
    clos = p.closure_rows()
    pred = p.pred_rows()
    base = {(a, b) for a in range(n) for b in range(n) if (clos[a] >> b) & 1}
    base.discard((u, v))
    anc_u = [x for x in range(n) if (pred[u] >> x) & 1] + [u]
    desc_v = [y for y in range(n) if (clos[v] >> y) & 1] + [v]
    implied = [(x, y) for x in anc_u for y in desc_v if (x, y) != (u, v)]
    out: set[frozenset[tuple[int, int]]] = set()
    for bits in range(1 << len(implied)):
        removed = {implied[i] for i in range(len(implied)) if (bits >> i) & 1}
        rel = base - removed
        if not _closed(n, rel):
            continue
        with_uv = set(rel)
        with_uv.add((u, v))
        if _transitive_closure_set(n, with_uv) != _full_set(clos, n):
            continue
        out.add(_hasse_of(n, rel))
    return out


def _full_set(clos: tuple[int, ...], n: int) -> frozenset[tuple[int, int]]:
    return frozenset((a, b) for a in range(n) for b in range(n) if (clos[a] >> b) & 1)


def _closed(n: int, rel: set[tuple[int, int]]) -> bool:
    return all((a, d) in rel for a, b in rel for c, d in rel if b == c)


def _transitive_closure_set(n: int, rel: set[tuple[int, int]]) -> frozenset[tuple[int, int]]:
    cur = set(rel)
    while True:
        new = {(a, d) for a, b in cur for c, d in cur if b == c} - cur
        if not new:
            return frozenset(cur)
        cur |= new


def _hasse_of(n: int, rel: set[tuple[int, int]]) -> frozenset[tuple[int, int]]:
    return frozenset((a, b) for a, b in rel
                     if not any((a, c) in rel and (c, b) in rel for c in range(n)))


# -- minimax sortability ---------------------------------------------------
#
# States are strict closures packed into one 64-bit word (bit u*n + v for
# u < v in the order), which limits this oracle to n <= 8.  The memo stores
# the exact optimal worst-case comparison count per state.

_memo_cache: dict[int, Dict] = {}


@njit(cache=True)
def _popcount64(x):
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (x * np.uint64(0x0101010101010101)) >> np.uint64(56)


@njit(cache=True)
def _add_packed(clos, n, u, v):
    """Closure after learning u < v, in packed form."""
    one = np.uint64(1)
    row_mask = (one << np.uint64(n)) - one
    row_v = (clos >> np.uint64(v * n)) & row_mask
    gain = row_v | (one << np.uint64(v))
    out = clos
    for x in range(n):
        if x == u or (clos >> np.uint64(x * n + u)) & one:
            out |= gain << np.uint64(x * n)
    return out


@njit(cache=True)
def _cost_packed(clos, n, memo):
    """Exact optimal worst-case comparisons to sort from this state."""
    if clos in memo:
        return memo[clos]
    one = np.uint64(1)
    total = n * (n - 1) // 2
    if _popcount64(clos) == total:
        memo[clos] = 0
        return 0
    best = np.int64(127)
    for u in range(n):
        for v in range(u + 1, n):
            if (clos >> np.uint64(u * n + v)) & one:
                continue
            if (clos >> np.uint64(v * n + u)) & one:
                continue
            a = _cost_packed(_add_packed(clos, n, u, v), n, memo)
            b = _cost_packed(_add_packed(clos, n, v, u), n, memo)
            worst = a if a > b else b
            if worst + 1 < best:
                best = worst + 1
    memo[clos] = best
    return best


def _pack_closure(p: Poset) -> int:
    clos = p.closure_rows()
    acc = 0
    for i in range(p.n):
        acc |= clos[i] << (i * p.n)
    return acc


def _memo_for(n: int) -> Dict:
    memo = _memo_cache.get(n)
    if memo is None:
        memo = Dict.empty(key_type=types.uint64, value_type=types.int64)
        _memo_cache[n] = memo
    return memo


def minimax_cost(p: Poset) -> int:
    """Optimal worst-case comparisons to sort p."""
    if p.n > 8:
        raise ValueError("minimax oracle is limited to n <= 8")
    if p.n == 1:
        return 0
    memo = _memo_for(p.n)
    return int(_cost_packed(np.uint64(_pack_closure(p)), p.n, memo))


def minimax_sortable(p: Poset, r: int) -> bool:
    """True iff p can always be sorted within r more comparisons."""
    return minimax_cost(p) <= r


def oracle_s_value(n: int) -> int:
    """S(n) by direct game evaluation."""
    return minimax_cost(Poset.antichain(n))

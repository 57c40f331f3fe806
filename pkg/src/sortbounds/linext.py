"""Exact linear-extension counting via the down-set dynamic program.

e(P) is computed by peeling maximal elements over the lattice of down-sets
(order ideals); per-comparison child counts e(P[u<v]) come from one shared
pass that combines down-set counts with up-set counts.  Posets with more
than one isolated vertex are first reduced to a single representative
singleton and the count is scaled by the exact interleaving factor.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .posets import Poset

DENSE_LIMIT = 18


class DownSetBoundExceeded(RuntimeError):
    """A search poset produced more down-sets than the allocation bound."""


def down_set_bound(n: int) -> int:
    """Largest count allowed by the sqrt(3)^(n+2) allocation rule."""
    return math.isqrt(3 ** (n + 2))


@dataclass
class LinExtWorkspace:
    """Reusable counting state; one instance per thread.

    down_table maps a down-set mask to the extension count of the induced
    sub-poset; up_table maps the same mask to the extension count of the
    complement (an up-set).  In dense mode both are flat lists indexed by
    mask; in compact mode they are dicts holding only reachable down-sets.

    n is a capacity: a dense workspace serves any poset with at most n
    vertices, which matters because singleton reduction shrinks inputs.
    """

    n: int
    mode: str = "auto"
    down_table: list | dict = field(default_factory=dict)
    up_table: list | dict = field(default_factory=dict)
    max_down_sets: int = 0

    def __post_init__(self) -> None:
        if self.mode == "auto":
            self.mode = "dense" if self.n <= DENSE_LIMIT else "compact"
        if self.mode not in ("dense", "compact"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "dense":
            self.down_table = [0] * (1 << self.n)
            self.up_table = [0] * (1 << self.n)

    def reset(self, ideals: list[int]) -> None:
        if self.mode == "dense":
            for m in ideals:
                self.down_table[m] = 0
                self.up_table[m] = 0
        else:
            self.down_table = {}
            self.up_table = {}


def enumerate_down_sets(p: Poset, bound: int | None = None) -> list[int]:
    """All order ideals of p as bit masks, ascending cardinality.

    A set D is extended by any u outside D whose predecessors all lie in D.
    When bound is given, exceeding it raises DownSetBoundExceeded.
    """
    n = p.n
    pred = p.pred_rows()
    full = (1 << n) - 1
    out = [0]
    seen = {0}
    head = 0
    while head < len(out):
        d = out[head]
        head += 1
        free = full & ~d
        m = free
        while m:
            u = (m & -m).bit_length() - 1
            m &= m - 1
            if pred[u] & ~d:
                continue
            nd = d | (1 << u)
            if nd not in seen:
                seen.add(nd)
                out.append(nd)
                if bound is not None and len(out) > bound:
                    raise DownSetBoundExceeded(
                        f"{len(out)} down-sets exceeds bound {bound} at n={n}"
                    )
    out.sort(key=lambda mask: mask.bit_count())
    return out


def count_down_sets(p: Poset) -> int:
    return len(enumerate_down_sets(p))


def _reduce_singletons(p: Poset) -> tuple[Poset, int]:
    """Drop all but one isolated vertex; return sub-poset and multiplier.

    Removed singletons interleave freely into any extension of the reduced
    poset, contributing n!/(n-s+1)! orderings.
    """
    singles = p.singletons()
    if len(singles) <= 1:
        return p, 1
    drop = set(singles[1:])
    keep = [v for v in range(p.n) if v not in drop]
    remap = {old: new for new, old in enumerate(keep)}
    rows = []
    for old in keep:
        m = p.hasse[old]
        acc = 0
        while m:
            j = (m & -m).bit_length() - 1
            m &= m - 1
            acc |= 1 << remap[j]
        rows.append(acc)
    reduced = Poset(len(keep), tuple(rows), 0, validate=False)
    mult = math.factorial(p.n) // math.factorial(len(keep))
    return reduced, mult


def _fill_down_table(p: Poset, ideals: list[int], ws: LinExtWorkspace) -> None:
    clos = p.closure_rows()
    table = ws.down_table
    table[0] = 1
    for d in ideals[1:]:
        total = 0
        m = d
        while m:
            u = (m & -m).bit_length() - 1
            m &= m - 1
            if not (clos[u] & d):
                total += table[d & ~(1 << u)]
        table[d] = total


def _fill_up_table(p: Poset, ideals: list[int], ws: LinExtWorkspace) -> None:
    # up_table[d] counts extensions of the up-set complementing ideal d.
    pred = p.pred_rows()
    full = (1 << p.n) - 1
    table = ws.up_table
    table[full] = 1
    for d in reversed(ideals[:-1]):
        total = 0
        m = full & ~d
        while m:
            u = (m & -m).bit_length() - 1
            m &= m - 1
            if not (pred[u] & ~d):
                total += table[d | (1 << u)]
        table[d] = total


def _ready(ws: LinExtWorkspace | None, m: int,
           ideals: list[int]) -> LinExtWorkspace:
    if ws is None:
        ws = LinExtWorkspace(m)
    elif ws.mode == "dense" and ws.n < m:
        raise ValueError(f"dense workspace for {ws.n} cannot hold {m} vertices")
    else:
        ws.reset(ideals)
    ws.max_down_sets = max(ws.max_down_sets, len(ideals))
    return ws


def count_linear_extensions(p: Poset, ws: LinExtWorkspace | None = None,
                            bound: int | None = None) -> int:
    """Exact e(P)."""
    reduced, mult = _reduce_singletons(p)
    ideals = enumerate_down_sets(reduced, bound)
    ws = _ready(ws, reduced.n, ideals)
    _fill_down_table(reduced, ideals, ws)
    return ws.down_table[(1 << reduced.n) - 1] * mult


def count_all_children(p: Poset, ws: LinExtWorkspace | None = None,
                       bound: int | None = None) -> dict[tuple[int, int], int]:
    """e(P[u<v]) for every ordered incomparable pair (u, v).

    Both tables are filled once; each (down-set W, maximal u in W) pair
    contributes f(W without u) * g(complement of W) to every child count
    whose target v lies outside W.  Since every extension places u after
    exactly one such prefix, the per-u total is e(P) itself and only the
    "v inside W" part needs accumulating.
    """
    reduced, mult = _reduce_singletons(p)
    result: dict[tuple[int, int], int] = {}

    singles = p.singletons()
    single_set = set(singles)
    kept: list[int] = []
    if len(singles) > 1:
        drop = set(singles[1:])
        kept = [v for v in range(p.n) if v not in drop]

    m = reduced.n
    ideals = enumerate_down_sets(reduced, bound)
    ws = _ready(ws, m, ideals)
    _fill_down_table(reduced, ideals, ws)
    _fill_up_table(reduced, ideals, ws)
    e_red = ws.down_table[(1 << m) - 1]
    e_total = e_red * mult

    clos = reduced.closure_rows()
    acc_in = [[0] * m for _ in range(m)]
    f = ws.down_table
    g = ws.up_table
    for w in ideals[1:]:
        mm = w
        while mm:
            u = (mm & -mm).bit_length() - 1
            mm &= mm - 1
            if clos[u] & w:
                continue
            t = f[w & ~(1 << u)] * g[w]
            row = acc_in[u]
            vv = w
            while vv:
                v = (vv & -vv).bit_length() - 1
                vv &= vv - 1
                row[v] += t

    red_children: dict[tuple[int, int], int] = {}
    for u, v in reduced.incomparable_pairs():
        red_children[(u, v)] = e_red - acc_in[u][v]
        red_children[(v, u)] = e_red - acc_in[v][u]

    if len(singles) <= 1:
        return red_children

    # Map reduced-child counts back to the full poset.
    remap = {old: new for new, old in enumerate(kept)}
    kept_single = singles[0]
    for u, v in p.incomparable_pairs():
        for a, b in ((u, v), (v, u)):
            if a in single_set and b in single_set:
                result[(a, b)] = e_total // 2
            else:
                ra = remap[a if a not in single_set else kept_single]
                rb = remap[b if b not in single_set else kept_single]
                result[(a, b)] = red_children[(ra, rb)] * mult
    return result


@dataclass(frozen=True)
class Efficiency:
    """Exact efficiency E(P) = n!/(2^c * e(P)) with a float view."""

    value: Fraction
    n: int
    comparisons: int
    extensions: int

    @property
    def as_float(self) -> float:
        return float(self.value)

    def exceeds(self, threshold: Fraction) -> bool:
        return self.value > threshold


def efficiency(p: Poset | None, c: int, budget: int, n: int | None = None,
               extensions: int | None = None) -> Efficiency:
    """Efficiency of p after c of budget comparisons.

    extensions may be supplied to avoid recounting.  The prune predicate
    e(P) > 2^(budget - c) is available as is_prunable.
    """
    if n is None:
        if p is None:
            raise ValueError("need either a poset or n")
        n = p.n
    if extensions is None:
        if p is None:
            raise ValueError("need either a poset or extensions")
        extensions = count_linear_extensions(p)
    if not 0 <= c <= budget:
        raise ValueError("comparison count must lie within the budget")
    value = Fraction(math.factorial(n), (1 << c) * extensions)
    return Efficiency(value, n, c, extensions)


def is_prunable(extensions: int, c: int, budget: int) -> bool:
    """True iff a poset with this count cannot be sorted in budget - c more."""
    return extensions > (1 << (budget - c))


def total_efficiency(n: int, budget: int) -> Fraction:
    return Fraction(math.factorial(n), 1 << budget)

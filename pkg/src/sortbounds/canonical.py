"""Canonical labeling, congruence testing, and hashing of posets.

Vertices are colored by iterated neighborhood hashing, then re-indexed
level by level: within one (level, color) block the order is refined by
the bit mask of already-placed predecessors, with the original index as
the last resort.  Vertices still tied after that are candidates for real
automorphisms; a block is certified by permuting its members (one swap,
and one k-cycle for blocks larger than two) and checking that re-running
the ordering reproduces the matrix bit for bit.  Only a fully certified
poset is flagged canonical, which enables the bitwise fast paths for
equality and hashing.  The representative is chosen across the poset and
its dual so one congruence class maps to one matrix.
"""

from dataclasses import dataclass

from .posets import (
    FLAG_CANONICAL,
    FLAG_DUAL_CANONICAL,
    Poset,
    dual,
)

MASK64 = (1 << 64) - 1

# Fixed mixing constants; layer files depend on these never changing.
_PHI64 = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def hash_pair(a: int, b: int) -> int:
    """Deterministic 64-bit mix of two words."""
    x = (a * _PHI64 + b + _MIX2) & MASK64
    x = ((x ^ (x >> 30)) * _MIX1) & MASK64
    x = ((x ^ (x >> 27)) * _MIX2) & MASK64
    return x ^ (x >> 31)


def hash_bytes(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & MASK64
    x = ((h ^ (h >> 30)) * _MIX1) & MASK64
    x = ((x ^ (x >> 27)) * _MIX2) & MASK64
    return x ^ (x >> 31)


@dataclass(frozen=True)
class ColorAssignment:
    colors: tuple[int, ...]
    rounds: int


def color_refine(p: Poset, rounds: int | None = None) -> ColorAssignment:
    """Hash-based color refinement over the Hasse neighborhoods.

    Initial color is a hash of (in-degree, out-degree); every round each
    vertex sums its own and all neighbor colors and rehashes the sum with
    its degree hash.
    """
    n = p.n
    if rounds is None:
        rounds = n
    indeg = [0] * n
    outdeg = [0] * n
    preds: list[list[int]] = [[] for _ in range(n)]
    succs: list[list[int]] = [[] for _ in range(n)]
    for i, row in enumerate(p.hasse):
        m = row
        while m:
            j = (m & -m).bit_length() - 1
            m &= m - 1
            outdeg[i] += 1
            indeg[j] += 1
            succs[i].append(j)
            preds[j].append(i)
    deg_hash = [hash_pair(indeg[v], outdeg[v]) for v in range(n)]
    colors = deg_hash[:]
    for _ in range(rounds):
        sums = [0] * n
        for v in range(n):
            s = colors[v]
            for u in preds[v]:
                s += colors[u]
            for u in succs[v]:
                s += colors[u]
            sums[v] = s & MASK64
        colors = [hash_pair(sums[v], deg_hash[v]) for v in range(n)]
    return ColorAssignment(tuple(colors), rounds)


def topo_levels(p: Poset) -> tuple[int, ...]:
    """Longest-path depth per vertex; strictly increases along edges."""
    n = p.n
    level = [0] * n
    for i in range(n):
        m = p.hasse[i]
        while m:
            j = (m & -m).bit_length() - 1
            m &= m - 1
            if level[j] < level[i] + 1:
                level[j] = level[i] + 1
    return tuple(level)


def _hasse_pred_masks(p: Poset) -> list[int]:
    pred = [0] * p.n
    for i, row in enumerate(p.hasse):
        m = row
        while m:
            j = (m & -m).bit_length() - 1
            m &= m - 1
            pred[j] |= 1 << i
    return pred


def _order_once(
    p: Poset,
    colors: tuple[int, ...],
    levels: tuple[int, ...],
    priority: list[int],
) -> tuple[tuple[int, ...], list[list[int]]]:
    """One pass of the ordering pipeline.

    Returns the re-indexed Hasse rows and the groups of vertices (original
    labels, in priority order) that even the predecessor masks left tied.
    """
    n = p.n
    pred = _hasse_pred_masks(p)
    blocks = sorted(range(n), key=lambda v: (levels[v], colors[v], priority[v]))
    final = [0] * n
    tied: list[list[int]] = []
    pos = 0
    i = 0
    while i < n:
        j = i + 1
        while (j < n and levels[blocks[j]] == levels[blocks[i]]
               and colors[blocks[j]] == colors[blocks[i]]):
            j += 1
        block = blocks[i:j]
        if len(block) > 1:
            # Predecessors live on strictly lower levels, so their final
            # positions are already assigned.
            def key(v: int) -> tuple[int, int]:
                m = pred[v]
                acc = 0
                while m:
                    u = (m & -m).bit_length() - 1
                    m &= m - 1
                    acc |= 1 << final[u]
                return (acc, priority[v])

            block.sort(key=lambda v: key(v))
            run = [block[0]]
            prev = key(block[0])[0]
            for v in block[1:]:
                cur = key(v)[0]
                if cur == prev:
                    run.append(v)
                else:
                    if len(run) > 1:
                        tied.append(run)
                    run = [v]
                    prev = cur
            if len(run) > 1:
                tied.append(run)
        for v in block:
            final[v] = pos
            pos += 1
        i = j
    rows = [0] * n
    for a in range(n):
        m = p.hasse[a]
        acc = 0
        while m:
            b = (m & -m).bit_length() - 1
            m &= m - 1
            acc |= 1 << final[b]
        rows[final[a]] = acc
    return tuple(rows), tied


def _candidate(p: Poset) -> tuple[tuple[int, ...], bool]:
    """Ordered rows plus whether the ordering is certified unique."""
    n = p.n
    colors = color_refine(p).colors
    levels = topo_levels(p)
    base_priority = list(range(n))
    rows, tied = _order_once(p, colors, levels, base_priority)
    for group in tied:
        k = len(group)
        moves = []
        swap = base_priority[:]
        swap[group[0]], swap[group[1]] = swap[group[1]], swap[group[0]]
        moves.append(swap)
        if k > 2:
            cyc = base_priority[:]
            for t in range(k):
                cyc[group[t]] = base_priority[group[(t + 1) % k]]
            moves.append(cyc)
        for pr in moves:
            rows2, _ = _order_once(p, colors, levels, pr)
            if rows2 != rows:
                return rows, False
    return rows, True


def canonicalize(p: Poset) -> Poset:
    """Canonical representative of p's congruence class with flags set.

    flag_canonical marks that the returned matrix is the same for every
    relabeling of every member of the class (poset or its dual);
    flag_dual_canonical additionally marks that both the poset's and the
    dual's orderings were certified independently.  Status bits are cleared.
    """
    rows, cert = _candidate(p)
    drows, dcert = _candidate(dual(p))
    if cert and dcert:
        rep = rows if _packed(p.n, rows) <= _packed(p.n, drows) else drows
        flags = FLAG_CANONICAL | FLAG_DUAL_CANONICAL
    elif cert:
        rep, flags = rows, FLAG_CANONICAL
    elif dcert:
        rep, flags = drows, FLAG_CANONICAL
    else:
        rep, flags = rows, 0
    return Poset(p.n, rep, flags, validate=False)


def _packed(n: int, rows: tuple[int, ...]) -> int:
    acc = 0
    shift = 0
    for i in range(n):
        width = n - 1 - i
        acc |= (rows[i] >> (i + 1)) << shift
        shift += width
    return acc


def _class_keys(p: Poset) -> list[tuple[int, int]]:
    colors = color_refine(p).colors
    levels = topo_levels(p)
    return [(levels[v], colors[v]) for v in range(p.n)]


def _isomorphic(p: Poset, q: Poset) -> bool:
    """Exact isomorphism by color-class-guided backtracking."""
    n = p.n
    if n != q.n or p.edge_count() != q.edge_count():
        return False
    if p.relation_count() != q.relation_count():
        return False
    kp = _class_keys(p)
    kq = _class_keys(q)
    if sorted(kp) != sorted(kq):
        return False
    cands = [[w for w in range(n) if kq[w] == kp[v]] for v in range(n)]
    order = sorted(range(n), key=lambda v: len(cands[v]))
    mapping = [-1] * n
    used = [False] * n

    def extend(idx: int) -> bool:
        if idx == n:
            return True
        v = order[idx]
        for w in cands[v]:
            if used[w]:
                continue
            ok = True
            for u in order[:idx]:
                mu = mapping[u]
                if ((p.hasse[v] >> u) & 1) != ((q.hasse[w] >> mu) & 1):
                    ok = False
                    break
                if ((p.hasse[u] >> v) & 1) != ((q.hasse[mu] >> w) & 1):
                    ok = False
                    break
            if not ok:
                continue
            mapping[v] = w
            used[w] = True
            if extend(idx + 1):
                return True
            used[w] = False
            mapping[v] = -1
        return False

    return extend(0)


def congruent(p: Poset, q: Poset) -> bool:
    """True iff p is isomorphic to q or to q's dual.  Both canonicalized."""
    if p.n != q.n:
        return False
    if (p.flags & FLAG_CANONICAL) and (q.flags & FLAG_CANONICAL):
        return p == q
    if (p.flags & FLAG_CANONICAL) != (q.flags & FLAG_CANONICAL):
        # The flag is an invariant of the congruence class.
        return False
    if p.hasse == q.hasse:
        return True
    return _isomorphic(p, q) or _isomorphic(p, dual(q))


def poset_hash(p: Poset) -> int:
    """64-bit congruence-invariant hash of a canonicalized poset."""
    if p.flags & FLAG_CANONICAL:
        return hash_bytes(p.key_bytes())
    s1 = sum(color_refine(p).colors) & MASK64
    s2 = sum(color_refine(dual(p)).colors) & MASK64
    return hash_pair((s1 + s2) & MASK64, s1 ^ s2)

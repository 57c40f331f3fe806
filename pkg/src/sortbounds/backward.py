"""Reverse search from the sorted outcome.

Walks comparison counts downward from the total order, reconstructing at
each count the posets for which some comparison leaves both outcomes
sortable within the remaining budget.  The per-count tables double as
advice for a forward search: membership certifies sortability, absence
inside the stored efficiency band certifies the opposite, and entries
carrying the unknown flag are the ones whose reversed outcome could not
be decided because it fell outside the band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import kernels
from .canonical import canonicalize
from .config import SearchConfig
from .linext import DownSetBoundExceeded, count_linear_extensions, down_set_bound
from .posets import Poset, reduce_rows, serialized_size
from .store import SORTABLE, UNKNOWN, LayerFile, LayerStore

Edge = tuple[int, int]

SORTABLE_VERDICT = "sortable"
NOT_SORTABLE_VERDICT = "not_sortable"
UNKNOWN_VERDICT = "unknown"

LEVEL_FILE_FMT = "level_{:02d}.sbl"


# -- reference predecessor enumeration ---------------------------------------


def _closure_rows(n: int, edges) -> list[int]:
    rows = [0] * n
    for a, b in edges:
        rows[a] |= 1 << b
    changed = True
    while changed:
        changed = False
        for a in range(n):
            acc = rows[a]
            m = acc
            while m:
                b = (m & -m).bit_length() - 1
                m &= m - 1
                acc |= rows[b]
            if acc != rows[a]:
                rows[a] = acc
                changed = True
    return rows


def _is_hasse(n: int, edges) -> bool:
    want = [0] * n
    for a, b in edges:
        want[a] |= 1 << b
    return reduce_rows(n, _closure_rows(n, edges)) == want


def enumerate_predecessors(pending, diagram, n: int,
                           validate: bool = False) -> set[frozenset[Edge]]:
    """All Hasse diagrams Q with (R - E)* <= Q* <= R* (E = pending, R = diagram).

    One pending edge (u, v) is decided at a time: either it stays, or it is
    deleted and every relation that held only through it is re-added as a
    pending edge of its own.  With no pending edges left the diagram itself
    is the single answer.
    """
    root_E = set(pending)
    root_R = set(diagram)
    if not root_E <= root_R:
        raise ValueError("pending edges must lie inside the diagram")
    out: set[frozenset[Edge]] = set()

    def rec(E: set[Edge], R: set[Edge]) -> None:
        if not E:
            out.add(frozenset(R))
            return
        E = set(E)
        u, v = E.pop()
        rec(E, R)
        R1 = R - {(u, v)}
        clos = _closure_rows(n, R1)
        repair = {(x, v) for (x, y) in R if y == u and not (clos[x] >> v) & 1}
        repair |= {(u, y) for (x, y) in R if x == v and not (clos[u] >> y) & 1}
        R2 = R1 | repair
        if validate:
            if not _is_hasse(n, R2):
                raise AssertionError(f"repair of {(u, v)} is not a diagram")
            c2 = _closure_rows(n, R2)
            cr = _closure_rows(n, R)
            cr[u] &= ~(1 << v)
            if c2 != cr:
                raise AssertionError(f"repair of {(u, v)} changed the relation")
        rec(E | repair, R2)

    rec(root_E, root_R)
    return out


def potential_predecessors(p: Poset, validate: bool = False
                           ) -> list[tuple[Poset, Edge]]:
    """(Q, (u, v)) pairs where adding u < v to Q closes back to p.

    One enumeration per Hasse edge; the survivor still containing the edge
    (p itself) is dropped.  Labels are kept, so (u, v) refers to p's own
    vertices.  The unordered poset has no entries.
    """
    diagram = p.hasse_edges()
    out: list[tuple[Poset, Edge]] = []
    for (u, v) in diagram:
        for q_edges in enumerate_predecessors([(u, v)], diagram, p.n, validate):
            if (u, v) in q_edges:
                continue
            rows = [0] * p.n
            for a, b in q_edges:
                rows[a] |= 1 << b
            out.append((Poset(p.n, rows, 0, validate=validate), (u, v)))
    return out


# -- advice tables ------------------------------------------------------------


def _min_extension_table(n: int, budget: int, bandwidth: Fraction) -> list[int]:
    thr = Fraction(math.factorial(n), 1 << budget) + bandwidth
    return [-(-(math.factorial(n) * thr.denominator)
              // ((1 << lvl) * thr.numerator))
            for lvl in range(budget + 1)]


@dataclass
class BackwardAdvice:
    """Sortability tables indexed by comparison count, plus their band."""

    n: int
    budget: int
    first_full: int
    bandwidth: Fraction
    levels: list[LayerStore]
    counts: list[int]
    paths: list[Path | None]
    min_extensions: list[int]

    @property
    def threshold(self) -> Fraction:
        return Fraction(math.factorial(self.n), 1 << self.budget) + self.bandwidth

    @property
    def total_stored(self) -> int:
        return sum(self.counts)

    def lookup(self, p: Poset, c: int) -> str:
        return advice_lookup(self, p, c)

    def close(self) -> None:
        for st in self.levels:
            st.close()


def advice_lookup(advice: BackwardAdvice, p: Poset, c: int) -> str:
    """Sortability of p in advice.budget - c further comparisons.

    Only meaningful inside the stored band: below the first full level a
    poset whose extension count falls short of the level minimum was never
    a candidate for storage, so asking about it is an error rather than a
    verdict.  Absence inside the band means not sortable; presence means
    sortable, weakened to unknown when the entry carries the unknown flag.
    """
    if not 0 <= c <= advice.budget:
        raise ValueError(f"comparison count {c} outside 0..{advice.budget}")
    q = canonicalize(p)
    if c < advice.first_full:
        e = count_linear_extensions(q)
        if e < advice.min_extensions[c]:
            raise ValueError(
                f"extension count {e} below the level-{c} band minimum "
                f"{advice.min_extensions[c]}; verdict undefined here")
    status = advice.levels[c].lookup(q)
    if status is None:
        return NOT_SORTABLE_VERDICT
    if status == UNKNOWN:
        return UNKNOWN_VERDICT
    return SORTABLE_VERDICT


def load_advice(directory: str | Path) -> BackwardAdvice:
    """Rebuild advice tables from the per-level files in a directory."""
    directory = Path(directory)
    files = sorted(directory.glob("level_*.sbl"))
    if not files:
        raise FileNotFoundError(f"no level files under {directory}")
    layers = [LayerFile(str(f)) for f in files]
    n, budget = layers[0].n, layers[0].budget
    first_full = layers[0].first_full
    bandwidth = layers[0].bandwidth
    for lf in layers:
        if (lf.n, lf.budget, lf.first_full) != (n, budget, first_full):
            raise ValueError(f"{lf.path}: header disagrees with siblings")
    levels = [LayerStore(n, evictable=False) for _ in range(budget + 1)]
    counts = [0] * (budget + 1)
    paths: list[Path | None] = [None] * (budget + 1)
    for lf in layers:
        if not 0 <= lf.level <= budget:
            raise ValueError(f"{lf.path}: level {lf.level} outside 0..{budget}")
        levels[lf.level].attach(lf)
        counts[lf.level] = lf.count
        paths[lf.level] = Path(lf.path)
    return BackwardAdvice(
        n=n, budget=budget, first_full=first_full, bandwidth=bandwidth,
        levels=levels, counts=counts, paths=paths,
        min_extensions=_min_extension_table(n, budget, bandwidth))


# -- search engine ------------------------------------------------------------


class _Buffers:
    """Preallocated batch arrays, grown on demand."""

    def __init__(self, n: int, cap: int):
        self.n = n
        self.cap = 0
        self.grow(cap)

    def grow(self, cap: int) -> None:
        n = self.n
        width = serialized_size(n)
        self.cap = cap
        self.cand_rows = np.zeros((cap, n), dtype=np.int64)
        self.cand_meta = np.zeros((cap, 3), dtype=np.int64)
        self.ec = np.zeros(cap, dtype=np.int64)
        self.lo = np.zeros(cap, dtype=np.int64)
        self.hi = np.zeros(cap, dtype=np.int64)
        self.e = np.zeros(cap, dtype=np.int64)
        self.ideals = np.zeros(cap, dtype=np.int64)
        self.sib_rows = np.zeros((cap, n), dtype=np.int64)
        self.triples = np.zeros((cap, 3), dtype=np.int64)
        self.crows = np.zeros((cap, n), dtype=np.int64)
        self.cflags = np.zeros(cap, dtype=np.uint8)
        self.ckeys = np.zeros((cap, width), dtype=np.uint8)
        self.sib_crows = np.zeros((cap, n), dtype=np.int64)
        self.sib_cflags = np.zeros(cap, dtype=np.uint8)
        self.sib_ckeys = np.zeros((cap, width), dtype=np.uint8)


def _rows_of_level(store: LayerStore, n: int, tri: np.ndarray
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Materialize a finished level as (rows, statuses)."""
    width = serialized_size(n)
    entries = list(store.items())
    count = len(entries)
    rows = np.zeros((count, n), dtype=np.int64)
    statuses = np.zeros(count, dtype=np.uint8)
    if count == 0:
        return rows, statuses
    blob = b"".join(key for key, _, _ in entries)
    keys = np.frombuffer(blob, dtype=np.uint8).reshape(count, width)
    flags = np.zeros(count, dtype=np.uint8)
    kernels.unpack_batch(keys, n, tri, rows, flags)
    for i, (_, st, _) in enumerate(entries):
        statuses[i] = st
    return rows, statuses


def backward_search(cfg: SearchConfig) -> BackwardAdvice:
    """Build the per-count sortability tables for cfg.budget comparisons.

    The top count holds the total order.  Each pass reconstructs the
    preceding count: a candidate survives when the reversed outcome of its
    defining comparison is found sortable at any count it could occupy,
    is dropped when that outcome is provably absent, and is kept flagged
    unknown when the outcome sits outside the band and cannot be decided.
    Counts below the first full level also require candidates to sit inside
    the efficiency band.  A pass that keeps nothing ends the walk; running
    out of store room is fatal rather than degraded.
    """
    n, C = cfg.n, cfg.budget
    if n > kernels.DP_N_LIMIT:
        raise ValueError(f"batch tables stop at n = {kernels.DP_N_LIMIT}")
    C_f = cfg.first_full_level()
    min_ext = [cfg.min_extensions_at(lvl) for lvl in range(C + 1)]
    nfact = math.factorial(n)
    tri = kernels.tri_offsets_array(n)
    bound = down_set_bound(n) + 1
    shards = cfg.shard_count()

    out_dir: Path | None = None
    if cfg.advice_out:
        out_dir = Path(cfg.advice_out)
    elif cfg.spill_dir:
        out_dir = Path(cfg.spill_dir) / f"backward_n{n}_b{C}"
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    stores: list[LayerStore | None] = [None] * (C + 1)
    counts = [0] * (C + 1)
    paths: list[Path | None] = [None] * (C + 1)
    spilled = [False] * (C + 1)

    seed = canonicalize(Poset.chain(n))
    top = LayerStore(n, shards=shards, evictable=False)
    top.insert_or_get(seed, SORTABLE)
    stores[C] = top
    counts[C] = 1

    def put_cold(level: int) -> None:
        # A finished level only ever serves lookups from here on.
        st = stores[level]
        if st is None or spilled[level]:
            return
        if out_dir is not None:
            path = out_dir / LEVEL_FILE_FMT.format(level)
            st.spill(str(path), budget=C, level=level, first_full=C_f,
                     bandwidth=cfg.bandwidth_at(level))
            paths[level] = path
            spilled[level] = True
        else:
            st.freeze()

    buf = _Buffers(n, 1 << 18)

    def probe_span(key: bytes, lo: int) -> tuple[int | None, int | None]:
        """(strongest status in counts lo..C, status at count lo itself).

        Count lo is where a sibling of a count-(lo-1) candidate lands, so
        nearly every hit is immediate; a sortable hit higher up still
        certifies, since a larger count means a smaller remaining budget.
        """
        at_lo = stores[lo].lookup_key(key)
        if at_lo == SORTABLE:
            return SORTABLE, at_lo
        strongest = at_lo
        for q in range(lo + 1, C + 1):
            got = stores[q].lookup_key(key)
            if got == SORTABLE:
                return SORTABLE, at_lo
            if got is not None:
                strongest = UNKNOWN
        return strongest, at_lo

    def probe_span_odd(p: Poset, lo: int) -> tuple[int | None, int | None]:
        at_lo = stores[lo].lookup(p)
        if at_lo == SORTABLE:
            return SORTABLE, at_lo
        strongest = at_lo
        for q in range(lo + 1, C + 1):
            got = stores[q].lookup(p)
            if got == SORTABLE:
                return SORTABLE, at_lo
            if got is not None:
                strongest = UNKNOWN
        return strongest, at_lo

    def flush(dst: LayerStore, c: int, cnt: int, base: int,
              parent_e: np.ndarray, parent_status: np.ndarray) -> None:
        lvl = c - 1
        rows = buf.cand_rows[:cnt]
        meta = buf.cand_meta[:cnt]
        ec = buf.ec[:cnt]
        kernels.edge_counts(rows, ec)
        hi = min(1 << (C - lvl), nfact)
        need = min_ext[lvl] if lvl < C_f else 1
        # A poset c comparisons deep never needs more than c edges, and cheap
        # extension bounds rule most candidates out of the band without the
        # exact count.
        kernels.extension_bounds_batch(rows, nfact, buf.lo[:cnt], buf.hi[:cnt])
        keep = np.nonzero((ec <= lvl) & (buf.lo[:cnt] <= hi)
                          & (buf.hi[:cnt] >= need))[0]
        m = len(keep)
        if m == 0:
            return
        rows = np.ascontiguousarray(rows[keep])
        meta = meta[keep]
        mi, fail = kernels.count_batch(rows, bound, buf.e[:m], buf.ideals[:m])
        if fail >= 0:
            raise DownSetBoundExceeded(
                f"down-set count left its proven bound at n={n}")
        e = buf.e[:m]
        ok = e <= hi
        if lvl < C_f:
            ok &= e >= min_ext[lvl]
        sel = np.nonzero(ok)[0]
        m = len(sel)
        if m == 0:
            return
        rows = np.ascontiguousarray(rows[sel])
        meta = meta[sel]
        e_cand = e[sel].copy()
        kernels.canonicalize_batch(rows, tri, buf.crows[:m], buf.cflags[:m],
                                   buf.ckeys[:m])
        ckeys = buf.ckeys[:m]
        cflags = buf.cflags[:m]
        crows = buf.crows[:m]
        # Reversed outcome of the defining comparison; extension counts of
        # the two outcomes add up to the candidate's own.
        triples = buf.triples[:m]
        triples[:, 0] = np.arange(m)
        triples[:, 1] = meta[:, 2]
        triples[:, 2] = meta[:, 1]
        sib = buf.sib_rows[:m]
        kernels.add_batch(rows, triples, sib)
        kernels.canonicalize_batch(sib, tri, buf.sib_crows[:m],
                                   buf.sib_cflags[:m], buf.sib_ckeys[:m])
        e_par = parent_e[base + meta[:, 0]]
        st_par = parent_status[base + meta[:, 0]]
        for s in range(m):
            e_sib = int(e_cand[s]) - int(e_par[s])
            if buf.sib_cflags[s] & 1:
                strongest, at_c = probe_span(buf.sib_ckeys[s].tobytes(), c)
            else:
                strongest, at_c = probe_span_odd(
                    kernels.poset_from_row(buf.sib_crows[s],
                                           int(buf.sib_cflags[s])), c)
            if strongest == SORTABLE:
                # Certain only when the stored outcome is certain too.
                status = SORTABLE if st_par[s] == SORTABLE else UNKNOWN
            elif at_c is None and (c >= C_f or e_sib >= min_ext[c]):
                continue  # conclusive absence: this comparison cannot work
            else:
                status = UNKNOWN
            if cflags[s] & 1:
                dst.insert_key(ckeys[s].tobytes(), status)
            else:
                dst.insert_or_get(
                    kernels.poset_from_row(crows[s], int(cflags[s])), status)

    stop = 0
    for c in range(C, 0, -1):
        lvl = c - 1
        if lvl < C_f and min_ext[lvl] > nfact:
            # Even the unordered poset falls short of the band minimum.
            stop = c
            break
        src = stores[c]
        parent_rows, parent_status = _rows_of_level(src, n, tri)
        pcount = len(parent_rows)
        parent_e = np.zeros(pcount, dtype=np.int64)
        if pcount:
            mi, fail = kernels.count_batch(parent_rows, bound, parent_e,
                                           buf.ideals[:pcount]
                                           if pcount <= buf.cap else
                                           np.zeros(pcount, dtype=np.int64))
            if fail >= 0:
                raise DownSetBoundExceeded(
                    f"down-set count left its proven bound at n={n}")
        mask = np.empty_like(parent_rows)
        if cfg.pair_heuristic:
            kernels.pair_edge_mask(parent_rows, mask)
        else:
            mask[:] = parent_rows
        dst = LayerStore(n, shards=shards, evictable=False)
        # The total order is sortable at every count, but it never shows up
        # as a reconstruction (its defining comparison is the one being
        # removed), so plant it wherever it is reachable and inside the band.
        if lvl >= n - 1 and (lvl >= C_f or min_ext[lvl] <= 1):
            dst.insert_key(seed.serialize(), SORTABLE)
        chunk = 256
        i = 0
        while i < pcount:
            j = min(pcount, i + chunk)
            cnt = kernels.predecessors_batch(
                parent_rows[i:j], mask[i:j], lvl, buf.cand_rows,
                buf.cand_meta, buf.cap)
            if cnt == -2:
                raise RuntimeError("predecessor stack overflow")
            if cnt == -1:
                if j - i == 1:
                    buf.grow(buf.cap * 2)
                else:
                    chunk = max(1, chunk // 2)
                continue
            flush(dst, c, cnt, i, parent_e, parent_status)
            i = j
            if cnt < buf.cap // 2 and chunk < 8192:
                chunk *= 2
            if dst.resident() + src.resident() > cfg.store_cap:
                raise MemoryError(
                    f"level {lvl} store passed {cfg.store_cap} resident "
                    "entries; raise store_cap or widen spill")
        stores[lvl] = dst
        counts[lvl] = len(dst)
        dst.freeze()
        put_cold(c)
        if counts[lvl] == 0:
            stop = lvl
            break

    for lvl in range(stop):
        if stores[lvl] is None:
            stores[lvl] = LayerStore(n, evictable=False)
    for lvl in range(C + 1):
        put_cold(lvl)

    return BackwardAdvice(
        n=n, budget=C, first_full=C_f, bandwidth=cfg.bandwidth,
        levels=stores, counts=counts, paths=paths,
        min_extensions=min_ext)

"""Compiled batch engines mirroring the scalar poset operations.

Each kernel is a bit-exact transcription of the pure Python code in
posets/canonical/linext: same mixing constants, same tie-breaking, same
reduction order.  Parity suites in the tests compare both routes on the
same inputs; the searches use these kernels for bulk work and fall back
to the scalar code for anything the kernels do not cover (n > 18 DP).

Row convention: one poset is int64[n] with bit j of row i set for a Hasse
edge (i, j), i < j, so indices are a topological order.  Hash state is
uint64 throughout; int64/uint64 never mix inside an expression.
"""

import math

import numpy as np
from numba import njit

from .posets import FLAG_CANONICAL, FLAG_DUAL_CANONICAL

U64 = np.uint64

_PHI64 = U64(0x9E3779B97F4A7C15)
_MIX1 = U64(0xBF58476D1CE4E5B9)
_MIX2 = U64(0x94D049BB133111EB)
_SH30 = U64(30)
_SH27 = U64(27)
_SH31 = U64(31)

DP_N_LIMIT = 18


def tri_offsets_array(n: int) -> np.ndarray:
    off = np.zeros(n + 1, dtype=np.int64)
    k = 0
    for i in range(n):
        off[i] = k
        k += n - 1 - i
    off[n] = k
    return off


@njit(cache=True, inline="always")
def _mix(a, b):
    x = a * _PHI64 + b + _MIX2
    x = (x ^ (x >> _SH30)) * _MIX1
    x = (x ^ (x >> _SH27)) * _MIX2
    return x ^ (x >> _SH31)


@njit(cache=True)
def mix_array(a, b, out):
    for i in range(a.shape[0]):
        out[i] = _mix(a[i], b[i])


@njit(cache=True, inline="always")
def _closure_topo(rows, n, clos):
    # Indices are topological, so successors of u live above u.
    for u in range(n - 1, -1, -1):
        acc = rows[u]
        for j in range(u + 1, n):
            if (acc >> j) & 1:
                acc |= clos[j]
        clos[u] = acc


@njit(cache=True, inline="always")
def _pred_masks(rows, n, pred):
    for j in range(n):
        pred[j] = 0
    for i in range(n):
        r = rows[i]
        for j in range(i + 1, n):
            if (r >> j) & 1:
                pred[j] |= 1 << i


@njit(cache=True)
def _color_refine(rows, n, pred, colors, deg_hash, sums):
    for v in range(n):
        indeg = 0
        m = pred[v]
        while m:
            m &= m - 1
            indeg += 1
        outdeg = 0
        m = rows[v]
        while m:
            m &= m - 1
            outdeg += 1
        deg_hash[v] = _mix(U64(indeg), U64(outdeg))
        colors[v] = deg_hash[v]
    for _ in range(n):
        for v in range(n):
            s = colors[v]
            m = pred[v]
            for u in range(v):
                if (m >> u) & 1:
                    s = s + colors[u]
            r = rows[v]
            for u in range(v + 1, n):
                if (r >> u) & 1:
                    s = s + colors[u]
            sums[v] = s
        for v in range(n):
            colors[v] = _mix(sums[v], deg_hash[v])


@njit(cache=True, inline="always")
def _topo_levels(rows, n, level):
    for v in range(n):
        level[v] = 0
    for i in range(n):
        r = rows[i]
        for j in range(i + 1, n):
            if (r >> j) & 1 and level[j] < level[i] + 1:
                level[j] = level[i] + 1


@njit(cache=True)
def _order_once(rows, n, pred, colors, levels, priority,
                blocks, keyacc, final, out_rows, tied_flat, tied_off):
    """One ordering pass; returns the number of tied groups recorded."""
    for i in range(n):
        blocks[i] = i
    # Insertion sort by (level, color, priority); priority is a permutation
    # so keys are total.
    for i in range(1, n):
        x = blocks[i]
        j = i - 1
        while j >= 0:
            y = blocks[j]
            if (levels[y] > levels[x]
                    or (levels[y] == levels[x] and colors[y] > colors[x])
                    or (levels[y] == levels[x] and colors[y] == colors[x]
                        and priority[y] > priority[x])):
                blocks[j + 1] = y
                j -= 1
            else:
                break
        blocks[j + 1] = x
    n_tied = 0
    tied_pos = 0
    pos = 0
    i = 0
    while i < n:
        j = i + 1
        while (j < n and levels[blocks[j]] == levels[blocks[i]]
               and colors[blocks[j]] == colors[blocks[i]]):
            j += 1
        if j - i > 1:
            for t in range(i, j):
                v = blocks[t]
                acc = 0
                m = pred[v]
                for u in range(n):
                    if (m >> u) & 1:
                        acc |= 1 << final[u]
                keyacc[v] = acc
            for t in range(i + 1, j):
                x = blocks[t]
                s = t - 1
                while s >= i:
                    y = blocks[s]
                    if (keyacc[y] > keyacc[x]
                            or (keyacc[y] == keyacc[x]
                                and priority[y] > priority[x])):
                        blocks[s + 1] = y
                        s -= 1
                    else:
                        break
                blocks[s + 1] = x
            run_start = i
            for t in range(i + 1, j + 1):
                if t == j or keyacc[blocks[t]] != keyacc[blocks[run_start]]:
                    if t - run_start > 1:
                        tied_off[n_tied] = tied_pos
                        for s in range(run_start, t):
                            tied_flat[tied_pos] = blocks[s]
                            tied_pos += 1
                        n_tied += 1
                    run_start = t
            tied_off[n_tied] = tied_pos
        for t in range(i, j):
            final[blocks[t]] = pos
            pos += 1
        i = j
    if n_tied == 0:
        tied_off[0] = 0
    for v in range(n):
        out_rows[v] = 0
    for a in range(n):
        r = rows[a]
        acc = 0
        for b in range(a + 1, n):
            if (r >> b) & 1:
                acc |= 1 << final[b]
        out_rows[final[a]] = acc
    return n_tied


@njit(cache=True)
def _candidate(rows, n, pred, colors, deg_hash, sums, levels, priority,
               blocks, keyacc, final, out_rows, tied_flat, tied_off,
               pr2, rows2, final2):
    """Fill out_rows with the ordered matrix; return 1 if certified."""
    _pred_masks(rows, n, pred)
    _color_refine(rows, n, pred, colors, deg_hash, sums)
    _topo_levels(rows, n, levels)
    for v in range(n):
        priority[v] = v
    n_tied = _order_once(rows, n, pred, colors, levels, priority,
                         blocks, keyacc, final, out_rows, tied_flat, tied_off)
    for g in range(n_tied):
        lo = tied_off[g]
        hi = tied_off[g + 1]
        k = hi - lo
        for move in range(2):
            if move == 1 and k <= 2:
                continue
            for v in range(n):
                pr2[v] = v
            if move == 0:
                a = tied_flat[lo]
                b = tied_flat[lo + 1]
                pr2[a] = b
                pr2[b] = a
            else:
                for t in range(k):
                    pr2[tied_flat[lo + t]] = tied_flat[lo + (t + 1) % k]
            _order_once(rows, n, pred, colors, levels, pr2,
                        blocks, keyacc, final2, rows2, tied_flat[n:], tied_off[n + 1:])
            for v in range(n):
                if rows2[v] != out_rows[v]:
                    return 0
    return 1


@njit(cache=True)
def _stable_kahn(succ, n, indeg, used, perm):
    for v in range(n):
        indeg[v] = 0
        used[v] = 0
    for i in range(n):
        r = succ[i]
        for j in range(n):
            if (r >> j) & 1:
                indeg[j] += 1
    for pos in range(n):
        for i in range(n):
            if used[i] == 0 and indeg[i] == 0:
                used[i] = 1
                perm[i] = pos
                r = succ[i]
                for j in range(n):
                    if (r >> j) & 1:
                        indeg[j] -= 1
                break
    return 0


@njit(cache=True)
def _dual_rows(rows, n, rev, indeg, used, perm, out):
    for v in range(n):
        rev[v] = 0
    for i in range(n):
        r = rows[i]
        for j in range(i + 1, n):
            if (r >> j) & 1:
                rev[j] |= 1 << i
    _stable_kahn(rev, n, indeg, used, perm)
    for v in range(n):
        out[v] = 0
    for i in range(n):
        r = rev[i]
        acc = 0
        for j in range(n):
            if (r >> j) & 1:
                acc |= 1 << perm[j]
        out[perm[i]] = acc


@njit(cache=True, inline="always")
def _cmp_rows(a, b, n):
    # Mirrors comparing the packed triangular integers: later rows own the
    # higher bits, and within a row higher columns own higher bits.
    for i in range(n - 2, -1, -1):
        va = a[i] >> (i + 1)
        vb = b[i] >> (i + 1)
        if va != vb:
            if va < vb:
                return -1
            return 1
    return 0


@njit(cache=True)
def _canon_one(rows, n, scr, colors, deg_hash, sums, out_rows):
    """Canonicalize one poset; returns identity flags."""
    # Scratch layout (int64): 14 vectors of length n plus tied buffers.
    pred = scr[0]
    levels = scr[1]
    priority = scr[2]
    blocks = scr[3]
    keyacc = scr[4]
    final = scr[5]
    pr2 = scr[6]
    rows2 = scr[7]
    final2 = scr[8]
    prows = scr[9]
    drows = scr[10]
    din = scr[11]
    indeg = scr[12]
    used = scr[13]
    perm = scr[14]
    tied_flat = scr[15]
    tied_off = scr[16]
    pcert = _candidate(rows, n, pred, colors, deg_hash, sums, levels, priority,
                       blocks, keyacc, final, prows, tied_flat, tied_off,
                       pr2, rows2, final2)
    _dual_rows(rows, n, rows2, indeg, used, perm, din)
    dcert = _candidate(din, n, pred, colors, deg_hash, sums, levels, priority,
                       blocks, keyacc, final, drows, tied_flat, tied_off,
                       pr2, rows2, final2)
    if pcert == 1 and dcert == 1:
        if _cmp_rows(prows, drows, n) <= 0:
            for v in range(n):
                out_rows[v] = prows[v]
        else:
            for v in range(n):
                out_rows[v] = drows[v]
        return FLAG_CANONICAL | FLAG_DUAL_CANONICAL
    if pcert == 1:
        for v in range(n):
            out_rows[v] = prows[v]
        return FLAG_CANONICAL
    if dcert == 1:
        for v in range(n):
            out_rows[v] = drows[v]
        return FLAG_CANONICAL
    for v in range(n):
        out_rows[v] = prows[v]
    return 0


@njit(cache=True, inline="always")
def _pack_key(rows, n, flags, tri_off, out):
    for k in range(out.shape[0]):
        out[k] = 0
    out[0] = flags
    for i in range(n):
        r = rows[i]
        base = 5 + tri_off[i] - (i + 1)
        for j in range(i + 1, n):
            if (r >> j) & 1:
                bit = base + j
                out[bit >> 3] |= 1 << (bit & 7)


@njit(cache=True, nogil=True)
def canonicalize_batch(rows, tri_off, out_rows, out_flags, out_keys):
    b = rows.shape[0]
    n = rows.shape[1]
    scr = np.zeros((17, 2 * n + 2), dtype=np.int64)
    colors = np.zeros(n, dtype=np.uint64)
    deg_hash = np.zeros(n, dtype=np.uint64)
    sums = np.zeros(n, dtype=np.uint64)
    for t in range(b):
        flags = _canon_one(rows[t], n, scr, colors, deg_hash, sums, out_rows[t])
        out_flags[t] = flags
        _pack_key(out_rows[t], n, flags, tri_off, out_keys[t])


@njit(cache=True, nogil=True)
def pack_batch(rows, flags, tri_off, out_keys):
    b = rows.shape[0]
    n = rows.shape[1]
    for t in range(b):
        _pack_key(rows[t], n, flags[t], tri_off, out_keys[t])


@njit(cache=True, nogil=True)
def unpack_batch(keys, n, tri_off, out_rows, out_flags):
    b = keys.shape[0]
    for t in range(b):
        out_flags[t] = keys[t, 0] & 31
        for i in range(n):
            out_rows[t, i] = 0
            base = 5 + tri_off[i] - (i + 1)
            for j in range(i + 1, n):
                bit = base + j
                if (keys[t, bit >> 3] >> (bit & 7)) & 1:
                    out_rows[t, i] |= 1 << j


# -- extension counting ------------------------------------------------------


@njit(cache=True, inline="always")
def _popcount(m):
    c = 0
    while m:
        m &= m - 1
        c += 1
    return c


@njit(cache=True)
def _reduce_one(rows, n, pred, red_rows, remap):
    """Drop all isolated vertices but the first; fill remap old->new.

    Returns (m, mult, kept_single): reduced size, interleaving multiplier,
    index of the kept singleton in reduced labels (or -1 if none existed).
    """
    _pred_masks(rows, n, pred)
    n_single = 0
    first_single = -1
    for v in range(n):
        if rows[v] == 0 and pred[v] == 0:
            n_single += 1
            if first_single < 0:
                first_single = v
    if n_single <= 1:
        for v in range(n):
            red_rows[v] = rows[v]
            remap[v] = v
        kept = first_single
        return n, np.int64(1), kept
    m = 0
    for v in range(n):
        if rows[v] == 0 and pred[v] == 0 and v != first_single:
            remap[v] = -1
        else:
            remap[v] = m
            m += 1
    for v in range(n):
        if remap[v] < 0:
            continue
        acc = 0
        r = rows[v]
        for j in range(v + 1, n):
            if (r >> j) & 1:
                acc |= 1 << remap[j]
        red_rows[remap[v]] = acc
    mult = np.int64(1)
    for k in range(m + 1, n + 1):
        mult *= k
    return m, mult, remap[first_single]


@njit(cache=True)
def _ideals_one(red_rows, m, pred, ideals, visited, bound):
    """BFS enumeration of down-sets, then counting sort by popcount.

    Returns the ideal count, or -1 if it exceeded bound.  visited is
    cleared before returning on both paths.
    """
    full = (1 << m) - 1
    ideals[0] = 0
    visited[0] = 1
    count = 1
    head = 0
    ok = True
    while head < count and ok:
        d = ideals[head]
        head += 1
        free = full & ~d
        for u in range(m):
            if not (free >> u) & 1:
                continue
            if pred[u] & ~d:
                continue
            nd = d | (1 << u)
            if visited[nd] == 0:
                if count > bound - 1:
                    ok = False
                    break
                visited[nd] = 1
                ideals[count] = nd
                count += 1
    for t in range(count):
        visited[ideals[t]] = 0
    if not ok:
        return -1
    # Counting sort by popcount keeps the DP order valid (subsets first).
    off = np.zeros(m + 2, dtype=np.int64)
    for t in range(count):
        off[_popcount(ideals[t]) + 1] += 1
    for k in range(1, m + 2):
        off[k] += off[k - 1]
    tmp = np.empty(count, dtype=np.int64)
    for t in range(count):
        p = _popcount(ideals[t])
        tmp[off[p]] = ideals[t]
        off[p] += 1
    for t in range(count):
        ideals[t] = tmp[t]
    return count


@njit(cache=True, inline="always")
def _fill_down(clos, ideals, count, f):
    f[0] = 1
    for t in range(1, count):
        d = ideals[t]
        total = np.int64(0)
        md = d
        while md:
            low = md & -md
            u = 0
            while not (low >> u) & 1:
                u += 1
            md &= md - 1
            if not clos[u] & d:
                total += f[d & ~(1 << u)]
        f[d] = total


@njit(cache=True, inline="always")
def _fill_up(pred, m, ideals, count, g):
    full = (1 << m) - 1
    g[full] = 1
    for t in range(count - 2, -1, -1):
        d = ideals[t]
        total = np.int64(0)
        free = full & ~d
        for u in range(m):
            if (free >> u) & 1 and not (pred[u] & ~d):
                total += g[d | (1 << u)]
        g[d] = total


@njit(cache=True, nogil=True)
def count_batch(rows, bound, out_e, out_ideals):
    """e(P) per poset after singleton reduction.

    Returns (max_ideals, fail_index): fail_index >= 0 flags the first
    poset whose reduced ideal count exceeded bound.
    """
    b = rows.shape[0]
    n = rows.shape[1]
    pred = np.zeros(n, dtype=np.int64)
    red = np.zeros(n, dtype=np.int64)
    remap = np.zeros(n, dtype=np.int64)
    clos = np.zeros(n, dtype=np.int64)
    ideals = np.zeros(bound, dtype=np.int64)
    visited = np.zeros(1 << n, dtype=np.uint8)
    f = np.zeros(1 << n, dtype=np.int64)
    max_ideals = 0
    for t in range(b):
        m, mult, _ = _reduce_one(rows[t], n, pred, red, remap)
        _pred_masks(red, m, pred)
        count = _ideals_one(red, m, pred, ideals, visited, bound)
        if count < 0:
            return max_ideals, t
        if count > max_ideals:
            max_ideals = count
        _closure_topo(red, m, clos)
        _fill_down(clos, ideals, count, f)
        out_e[t] = f[(1 << m) - 1] * mult
        out_ideals[t] = count
    return max_ideals, -1


@njit(cache=True, nogil=True)
def children_batch(rows, bound, out_counts, out_e):
    """e(child) for every ordered incomparable pair of every poset.

    out_counts[t, u, v] = e(P_t[u<v]), or -1 when (u, v) is not an
    incomparable pair.  Returns (max_ideals, fail_index) like count_batch.
    """
    b = rows.shape[0]
    n = rows.shape[1]
    pred = np.zeros(n, dtype=np.int64)
    red = np.zeros(n, dtype=np.int64)
    remap = np.zeros(n, dtype=np.int64)
    clos = np.zeros(n, dtype=np.int64)
    rclos = np.zeros(n, dtype=np.int64)
    ideals = np.zeros(bound, dtype=np.int64)
    visited = np.zeros(1 << n, dtype=np.uint8)
    f = np.zeros(1 << n, dtype=np.int64)
    g = np.zeros(1 << n, dtype=np.int64)
    acc = np.zeros((n, n), dtype=np.int64)
    max_ideals = 0
    for t in range(b):
        m, mult, kept = _reduce_one(rows[t], n, pred, red, remap)
        _pred_masks(red, m, pred)
        count = _ideals_one(red, m, pred, ideals, visited, bound)
        if count < 0:
            return max_ideals, t
        if count > max_ideals:
            max_ideals = count
        _closure_topo(red, m, rclos)
        _fill_down(rclos, ideals, count, f)
        _fill_up(pred, m, ideals, count, g)
        e_red = f[(1 << m) - 1]
        e_total = e_red * mult
        out_e[t] = e_total
        for u in range(m):
            for v in range(m):
                acc[u, v] = 0
        for s in range(1, count):
            w = ideals[s]
            mw = w
            while mw:
                low = mw & -mw
                u = 0
                while not (low >> u) & 1:
                    u += 1
                mw &= mw - 1
                if rclos[u] & w:
                    continue
                contrib = f[w & ~(1 << u)] * g[w]
                vv = w
                while vv:
                    lv = vv & -vv
                    v = 0
                    while not (lv >> v) & 1:
                        v += 1
                    vv &= vv - 1
                    acc[u, v] += contrib
        for u in range(n):
            for v in range(n):
                out_counts[t, u, v] = -1
        _closure_topo(rows[t], n, clos)
        _pred_masks(rows[t], n, pred)
        smask = 0
        for u in range(n):
            if rows[t, u] == 0 and pred[u] == 0:
                smask |= 1 << u
        for u in range(n):
            for v in range(u + 1, n):
                if (clos[u] >> v) & 1 or (clos[v] >> u) & 1:
                    continue
                if (smask >> u) & 1 and (smask >> v) & 1:
                    half = e_total >> 1
                    out_counts[t, u, v] = half
                    out_counts[t, v, u] = half
                else:
                    ru = remap[u]
                    rv = remap[v]
                    if ru < 0:
                        ru = kept
                    if rv < 0:
                        rv = kept
                    out_counts[t, u, v] = (e_red - acc[ru, rv]) * mult
                    out_counts[t, v, u] = (e_red - acc[rv, ru]) * mult
    return max_ideals, -1


# -- child materialization ---------------------------------------------------


@njit(cache=True)
def _add_one(rows, n, u, v, clos, pred_clos, hasse, perm, indeg, used, out):
    """add_comparison mirror: closure update, reduction, stable re-Kahn."""
    _closure_topo(rows, n, clos)
    for j in range(n):
        pred_clos[j] = 0
    for i in range(n):
        c = clos[i]
        for j in range(n):
            if (c >> j) & 1:
                pred_clos[j] |= 1 << i
    down = clos[v] | (1 << v)
    anc = pred_clos[u] | (1 << u)
    for x in range(n):
        if (anc >> x) & 1:
            clos[x] |= down
    for i in range(n):
        implied = 0
        c = clos[i]
        for j in range(n):
            if (c >> j) & 1:
                implied |= clos[j]
        hasse[i] = clos[i] & ~implied
    _stable_kahn(hasse, n, indeg, used, perm)
    for i in range(n):
        out[i] = 0
    for i in range(n):
        r = hasse[i]
        acc = 0
        for j in range(n):
            if (r >> j) & 1:
                acc |= 1 << perm[j]
        out[perm[i]] = acc


@njit(cache=True, nogil=True)
def add_batch(rows, triples, out_rows):
    n = rows.shape[1]
    clos = np.zeros(n, dtype=np.int64)
    pred_clos = np.zeros(n, dtype=np.int64)
    hasse = np.zeros(n, dtype=np.int64)
    perm = np.zeros(n, dtype=np.int64)
    indeg = np.zeros(n, dtype=np.int64)
    used = np.zeros(n, dtype=np.int64)
    for t in range(triples.shape[0]):
        b = triples[t, 0]
        _add_one(rows[b], n, triples[t, 1], triples[t, 2],
                 clos, pred_clos, hasse, perm, indeg, used, out_rows[t])


# -- predecessor enumeration -------------------------------------------------


@njit(cache=True)
def _pred_edge(n, rows_t, u0, v0, max_ec, out_rows, meta, src, cnt, cap,
               R_cur, E_cur, clos, stack_R, stack_E, stack_len, stack_slack):
    """Sandwich enumeration for one missing relation (u0, v0).

    Explicit depth-first walk over keep/drop decisions: dropping a pending
    pair (u, v) pushes the repaired frame (R without the pair plus the
    bypass edges S') and the walk keeps going on the kept side in place.
    Emits every poset whose closure sits between R* minus the pair and R*,
    except those bound to end up with more than max_ec edges: edges outside
    the pending set are permanent, keeping a pending pair adds one, and a
    drop trades the pair for its repairs one for one, so the final count is
    at least edges(R) - len(E) and only keep decisions raise that floor.
    Returns the new count, -1 when out_rows is full, -2 on stack overflow.
    """
    ec0 = 0
    for i in range(n):
        R_cur[i] = rows_t[i]
        ec0 += _popcount(rows_t[i])
    E_cur[0] = (u0 << 5) | v0
    elen = 1
    slack = max_ec - ec0 + 1
    if slack < 0:
        return cnt
    depth = 0
    maxdepth = stack_len.shape[0]
    while True:
        if elen == 0:
            if cnt >= cap:
                return -1
            for i in range(n):
                out_rows[cnt, i] = R_cur[i]
            meta[cnt, 0] = src
            meta[cnt, 1] = u0
            meta[cnt, 2] = v0
            cnt += 1
            if depth == 0:
                return cnt
            depth -= 1
            elen = stack_len[depth]
            slack = stack_slack[depth]
            for i in range(n):
                R_cur[i] = stack_R[depth, i]
            for i in range(elen):
                E_cur[i] = stack_E[depth, i]
            continue
        elen -= 1
        packed = E_cur[elen]
        u = packed >> 5
        v = packed & 31
        if depth >= maxdepth:
            return -2
        # Drop branch: remove (u, v); reinstate any cover (x, u) or (v, y)
        # paths it carried that the remaining closure lost.
        for i in range(n):
            stack_R[depth, i] = R_cur[i]
        stack_R[depth, u] &= ~(1 << v)
        _closure_topo(stack_R[depth], n, clos)
        for i in range(elen):
            stack_E[depth, i] = E_cur[i]
        w = elen
        for x in range(u):
            if (R_cur[x] >> u) & 1 and not (clos[x] >> v) & 1:
                stack_E[depth, w] = (x << 5) | v
                stack_R[depth, x] |= 1 << v
                w += 1
        rv = R_cur[v]
        for y in range(v + 1, n):
            if (rv >> y) & 1 and not (clos[u] >> y) & 1:
                stack_E[depth, w] = (u << 5) | y
                stack_R[depth, u] |= 1 << y
                w += 1
        stack_len[depth] = w
        stack_slack[depth] = slack
        depth += 1
        # Keep branch continues in place with the pair consumed.
        slack -= 1
        if slack < 0:
            depth -= 1
            elen = stack_len[depth]
            slack = stack_slack[depth]
            for i in range(n):
                R_cur[i] = stack_R[depth, i]
            for i in range(elen):
                E_cur[i] = stack_E[depth, i]


@njit(cache=True, nogil=True)
def predecessors_batch(rows, mask, max_ec, out_rows, meta, cap):
    """Potential predecessors for the masked Hasse edges of every poset.

    mask[t] selects which Hasse edges of rows[t] to expand (pass rows itself
    for all of them); predecessors with more than max_ec edges are skipped.
    Emits (rows, meta=(source index, u, v)) per predecessor, excluding the
    poset itself (the one candidate still containing (u, v)).  Returns the
    emitted count, or -1 if cap was too small, or -2 on internal overflow.
    """
    b = rows.shape[0]
    n = rows.shape[1]
    width = n * (n - 1) // 2 + 1
    depth_cap = 4096
    R_cur = np.zeros(n, dtype=np.int64)
    E_cur = np.zeros(width, dtype=np.int64)
    clos = np.zeros(n, dtype=np.int64)
    stack_R = np.zeros((depth_cap, n), dtype=np.int64)
    stack_E = np.zeros((depth_cap, width), dtype=np.int64)
    stack_len = np.zeros(depth_cap, dtype=np.int64)
    stack_slack = np.zeros(depth_cap, dtype=np.int64)
    cnt = 0
    for t in range(b):
        for u in range(n):
            r = rows[t, u] & mask[t, u]
            for v in range(u + 1, n):
                if not (r >> v) & 1:
                    continue
                start = cnt
                cnt = _pred_edge(n, rows[t], u, v, max_ec, out_rows, meta,
                                 t, cnt, cap, R_cur, E_cur, clos,
                                 stack_R, stack_E, stack_len, stack_slack)
                if cnt < 0:
                    return cnt
                # Drop the keep-all survivor that still has the edge.
                w = start
                for s in range(start, cnt):
                    if (out_rows[s, u] >> v) & 1:
                        continue
                    if w != s:
                        for i in range(n):
                            out_rows[w, i] = out_rows[s, i]
                        meta[w, 0] = meta[s, 0]
                        meta[w, 1] = meta[s, 1]
                        meta[w, 2] = meta[s, 2]
                    w += 1
                cnt = w
    return cnt


@njit(cache=True, nogil=True)
def edge_counts(rows, out):
    b = rows.shape[0]
    n = rows.shape[1]
    for t in range(b):
        c = 0
        for i in range(n):
            c += _popcount(rows[t, i])
        out[t] = c


@njit(cache=True, nogil=True)
def extension_bounds_batch(rows, nfact, out_lo, out_hi):
    """Cheap sandwich bounds on e(P) per poset, both exact on chain unions.

    out_hi: vertex-disjoint chains C_1..C_k are independent constraints on
    a random permutation, so e <= n! / prod |C_i|!.  Chains are peeled
    greedily longest-first from the Hasse diagram.
    out_lo: building an extension by repeatedly removing a minimal element
    gives e >= n! / prod |down(v) + v|.
    """
    b = rows.shape[0]
    n = rows.shape[1]
    fact = np.zeros(n + 1, dtype=np.int64)
    fact[0] = 1
    for k in range(1, n + 1):
        fact[k] = fact[k - 1] * k
    clos = np.zeros(n, dtype=np.int64)
    length = np.zeros(n, dtype=np.int64)
    back = np.zeros(n, dtype=np.int64)
    for t in range(b):
        # rows are upper triangular, so index order is a topological order
        for u in range(n - 1, -1, -1):
            acc = rows[t, u]
            m = rows[t, u]
            while m:
                low = m & -m
                v = 0
                while not (low >> v) & 1:
                    v += 1
                m &= m - 1
                acc |= clos[v]
            clos[u] = acc
        d_lo = np.int64(1)
        for v in range(n):
            d = 1
            for u in range(v):
                if (clos[u] >> v) & 1:
                    d += 1
            if d_lo > nfact // d:
                d_lo = nfact
            else:
                d_lo *= d
        avail = (np.int64(1) << n) - 1
        d_up = np.int64(1)
        while avail:
            best = -1
            blen = 0
            for u in range(n):
                if not (avail >> u) & 1:
                    continue
                length[u] = 1
                back[u] = -1
                for p in range(u):
                    if (avail >> p) & 1 and (rows[t, p] >> u) & 1:
                        if length[p] + 1 > length[u]:
                            length[u] = length[p] + 1
                            back[u] = p
                if length[u] > blen:
                    blen = length[u]
                    best = u
            d_up *= fact[blen]
            while best >= 0:
                avail &= ~(np.int64(1) << best)
                best = back[best]
        out_lo[t] = -(-nfact // d_lo)
        out_hi[t] = nfact // d_up


@njit(cache=True, nogil=True)
def pair_edge_mask(rows, out):
    """Edge mask for posets holding an isolated comparable pair.

    out[t] equals rows[t] when no two-vertex component exists, otherwise a
    single edge: the first such pair in row order.  Expanding only that edge
    is enough because a pair-creating comparison commutes with every
    comparison not touching the pair, so some comparison sequence reaching
    rows[t] ends by creating exactly this pair.
    """
    b = rows.shape[0]
    n = rows.shape[1]
    pred = np.zeros(n, dtype=np.int64)
    for t in range(b):
        for v in range(n):
            pred[v] = 0
            out[t, v] = rows[t, v]
        for u in range(n):
            r = rows[t, u]
            for v in range(u + 1, n):
                if (r >> v) & 1:
                    pred[v] |= 1 << u
        for u in range(n):
            r = rows[t, u]
            if r == 0 or (r & (r - 1)) != 0 or pred[u] != 0:
                continue
            v = 0
            while not (r >> v) & 1:
                v += 1
            if rows[t, v] == 0 and pred[v] == (1 << u):
                for w in range(n):
                    out[t, w] = 0
                out[t, u] |= 1 << v
                break


@njit(cache=True, nogil=True)
def admit_children(rows, e_par, counts, cap_child, heuristic,
                   out_first, out_sib, out_meta, out_state, out_open):
    """Classify each parent's admissible comparisons against the child cap.

    counts is the children_batch table.  With heuristic nonzero, a poset
    holding one two-vertex component admits only comparisons touching it
    or joining two isolated vertices, and with two such components only
    comparisons taking one vertex from each; pair-creating comparisons
    commute with unrelated ones, so some optimal play engages a fresh
    pair at once.  Per admissible pair the orientation with more linear
    extensions is the probe.  A probe beyond cap_child kills its
    comparison; a probe of one means both outcomes are total orders and
    the parent is sortable outright (out_state 1, no candidates).  The
    rest are emitted as probe and reverse (parent, u, v) triples with
    (parent, e_probe, e_reverse) metadata.  Returns the emission count;
    callers size out_first for the worst case so it cannot overflow.
    """
    b = rows.shape[0]
    n = rows.shape[1]
    und = np.zeros(n, dtype=np.int64)
    k = 0
    for t in range(b):
        for u in range(n):
            und[u] = rows[t, u]
        for u in range(n):
            r = rows[t, u]
            while r:
                low = r & -r
                v = 0
                while not (low >> v) & 1:
                    v += 1
                r &= r - 1
                und[v] |= 1 << u
        singles = 0
        pairverts = 0
        npairs = 0
        for u in range(n):
            a = und[u]
            if a == 0:
                singles |= 1 << u
            elif (a & (a - 1)) == 0:
                v = 0
                while not (a >> v) & 1:
                    v += 1
                if v > u and und[v] == (1 << u):
                    npairs += 1
                    pairverts |= (1 << u) | (1 << v)
        win = False
        live = 0
        for u in range(n):
            for v in range(u + 1, n):
                euv = counts[t, u, v]
                if euv < 0:
                    continue
                if heuristic != 0 and npairs > 0:
                    pu = (pairverts >> u) & 1 != 0
                    pv = (pairverts >> v) & 1 != 0
                    if npairs == 1:
                        fresh = ((singles >> u) & 1 != 0
                                 and (singles >> v) & 1 != 0)
                        if not (pu or pv or fresh):
                            continue
                    else:
                        # distinct components: same-pair pairs are comparable
                        if not (pu and pv):
                            continue
                evu = e_par[t] - euv
                if euv >= evu:
                    fu, fv, ef, es = u, v, euv, evu
                else:
                    fu, fv, ef, es = v, u, evu, euv
                if ef > cap_child:
                    continue
                if ef == 1:
                    win = True
                    break
                out_first[k, 0] = t
                out_first[k, 1] = fu
                out_first[k, 2] = fv
                out_sib[k, 0] = t
                out_sib[k, 1] = fv
                out_sib[k, 2] = fu
                out_meta[k, 0] = t
                out_meta[k, 1] = ef
                out_meta[k, 2] = es
                k += 1
                live += 1
            if win:
                break
        if win:
            out_state[t] = 1
            out_open[t] = 0
        else:
            out_state[t] = 0 if live > 0 else 2
            out_open[t] = live
    return k


# -- Python-side boundary helpers -------------------------------------------


def rows_matrix(posets, n: int) -> np.ndarray:
    out = np.zeros((len(posets), n), dtype=np.int64)
    for t, p in enumerate(posets):
        if p.n != n:
            raise ValueError("mixed sizes in one batch")
        for i in range(n):
            out[t, i] = p.hasse[i]
    return out


def poset_from_row(row: np.ndarray, flags: int = 0):
    from .posets import Poset

    return Poset(row.shape[0], [int(x) for x in row], flags, validate=False)


def warm(n: int = 4) -> None:
    """Force-compile every kernel on a tiny input."""
    tri = tri_offsets_array(n)
    rows = np.zeros((1, n), dtype=np.int64)
    rows[0, 0] = 2
    key_len = (n * (n - 1) // 2 + 5 + 7) // 8
    crows = np.zeros((1, n), dtype=np.int64)
    fl = np.zeros(1, dtype=np.uint8)
    keys = np.zeros((1, key_len), dtype=np.uint8)
    canonicalize_batch(rows, tri, crows, fl, keys)
    pack_batch(crows, fl, tri, keys)
    unpack_batch(keys, n, tri, crows, fl)
    e = np.zeros(1, dtype=np.int64)
    nid = np.zeros(1, dtype=np.int64)
    count_batch(rows, 1 << n, e, nid)
    counts = np.zeros((1, n, n), dtype=np.int64)
    children_batch(rows, 1 << n, counts, e)
    triples = np.array([[0, 0, 2]], dtype=np.int64)
    out1 = np.zeros((1, n), dtype=np.int64)
    add_batch(rows, triples, out1)
    pout = np.zeros((8, n), dtype=np.int64)
    meta = np.zeros((8, 3), dtype=np.int64)
    predecessors_batch(rows, rows, n * (n - 1) // 2, pout, meta, 8)
    edge_counts(rows, e)
    pair_edge_mask(rows, out1)
    lo = np.zeros(1, dtype=np.int64)
    extension_bounds_batch(rows, np.int64(math.factorial(n)), lo, e)
    cap = n * (n - 1) // 2
    first = np.zeros((cap, 3), dtype=np.int64)
    sib = np.zeros((cap, 3), dtype=np.int64)
    cmeta = np.zeros((cap, 3), dtype=np.int64)
    state = np.zeros(1, dtype=np.uint8)
    nopen = np.zeros(1, dtype=np.int64)
    children_batch(rows, 1 << n, counts, e)
    admit_children(rows, e, counts, np.int64(1 << n), 1,
                   first, sib, cmeta, state, nopen)
    mix_array(np.zeros(1, dtype=np.uint64), np.zeros(1, dtype=np.uint64),
              np.zeros(1, dtype=np.uint64))

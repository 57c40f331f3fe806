"""Forward search over comparison outcomes.

Walks comparison counts upward from the unordered poset.  A poset c
comparisons deep is sortable when some admissible comparison leaves both
outcomes sortable in the remaining budget; the outcome with more linear
extensions is probed first and the reverse side is only examined once
the probe succeeds.  Levels are processed breadth-first: each layer is
sorted by extension count, children are admitted one per comparison with
congruence dedup, and admitted chunks recurse a level down before the
next chunk is built.  Verdicts retire into per-count evictable stores;
a bidirectional run resolves low-efficiency posets from the backward
tables instead of expanding them.

Bookkeeping stays byte-sized on purpose: pending work is tracked by
serialized keys (rows are unpacked again right before expansion), so a
wide layer costs key bytes rather than row arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .backward import BackwardAdvice
from .canonical import canonicalize
from .config import SearchConfig
from .linext import DownSetBoundExceeded, down_set_bound
from .posets import FLAG_CANONICAL, Poset, serialized_size
from .store import SORTABLE, UNKNOWN, UNSORTABLE, LayerStore

PROBE = 0
CLOSER = 1


class ForwardInconsistencyError(RuntimeError):
    """Advice and direct exploration disagree on a definite verdict."""


@dataclass
class SortabilityVerdict:
    """Root verdict of one forward run plus per-count tallies.

    levels_explored[c] = (posets admitted as actives at count c, of which
    sortable).  stored[c] counts distinct retired classes; it trails the
    admitted tally only when eviction forced re-exploration.
    """

    sortable: bool
    levels_explored: list[tuple[int, int]]
    stored: list[int]
    max_down_sets: int
    evictions: int


def forward_search(cfg: SearchConfig,
                   advice: BackwardAdvice | None = None) -> SortabilityVerdict:
    """Decide whether cfg.n elements sort in cfg.budget comparisons.

    advice must be given exactly for bidirectional runs and must describe
    the same n and budget.  Eviction under store_cap pressure costs
    re-exploration, never a verdict; a definite advice/direct conflict
    raises instead of being repaired.
    """
    if cfg.mode == "backward":
        raise ValueError("backward runs have their own entry point")
    if (advice is not None) != (cfg.mode == "bidirectional"):
        raise ValueError("advice is required exactly in bidirectional mode")
    if advice is not None:
        if advice.n != cfg.n or advice.budget != cfg.budget:
            raise ValueError(
                f"advice is for n={advice.n} C={advice.budget}, "
                f"run wants n={cfg.n} C={cfg.budget}")
    return _Engine(cfg, advice).run()


class _Slice:
    """Compact admission results for one stretch of parents.

    Keys are copied out of the batch scratch, so a slice stays valid
    after the next one is expanded.
    """

    __slots__ = ("k", "par", "e_first", "e_sib", "state", "nopen",
                 "fkeys", "skeys")


class _Engine:
    def __init__(self, cfg: SearchConfig, advice: BackwardAdvice | None):
        self.cfg = cfg
        self.n = cfg.n
        self.C = cfg.budget
        self.advice = advice
        self.adv_min = advice.min_extensions if advice is not None else None
        self.tri = kernels.tri_offsets_array(cfg.n)
        self.width = serialized_size(cfg.n)
        self.bound = down_set_bound(cfg.n)
        self.explored = [0] * (cfg.budget + 1)
        self.sortable_ct = [0] * (cfg.budget + 1)
        self.memo: list[LayerStore | None] = [None] * (cfg.budget + 1)
        self.max_ideals = 0
        self.evictions = 0
        # per-level caps; tiny caps exercise eviction without changing verdicts
        self.level_cap = max(32, cfg.store_cap // (cfg.budget + 1))
        self.slice_parents = max(64, min(
            2048, 500_000 // max(1, cfg.n * (cfg.n - 1) // 2)))

    def run(self) -> SortabilityVerdict:
        root = canonicalize(Poset.antichain(self.n))
        e_root = math.factorial(self.n)
        key = root.key_bytes()
        v: bool | None
        if e_root == 1:
            v = True
        elif e_root > 1 << self.C:
            v = False
        else:
            v = self._resolve_stores(0, key, root.flags, e_root)
        if v is not None:
            # nothing was expanded, but the start poset still counts
            self.explored[0] += 1
            self.sortable_ct[0] += int(v)
        else:
            rows = kernels.rows_matrix([root], self.n)
            e_arr = np.array([e_root], dtype=np.int64)
            v = self._decide_level(0, rows, e_arr, [key])[0]
        return SortabilityVerdict(
            sortable=bool(v),
            levels_explored=[(self.explored[c], self.sortable_ct[c])
                             for c in range(self.C + 1)],
            stored=[len(st) if st is not None else 0 for st in self.memo],
            max_down_sets=self.max_ideals,
            evictions=self.evictions)

    # -- verdicts already on record ---------------------------------------

    def _memo(self, c: int) -> LayerStore:
        st = self.memo[c]
        if st is None:
            st = LayerStore(self.n, cap=self.level_cap, evictable=True)
            self.memo[c] = st
        return st

    def _resolve_stores(self, c: int, key: bytes, fl: int,
                        e: int) -> bool | None:
        """Definite verdict for a count-c poset without expanding it."""
        st = self.memo[c]
        if st is not None:
            if fl & FLAG_CANONICAL:
                got = st.lookup_key(key)
            else:
                got = st.lookup(Poset.deserialize(self.n, key))
            if got == SORTABLE:
                return True
            if got == UNSORTABLE:
                return False
        adv = self.advice
        if adv is not None and (c >= adv.first_full or e >= self.adv_min[c]):
            alev = adv.levels[c]
            if fl & FLAG_CANONICAL:
                got = alev.lookup_key(key)
            else:
                got = alev.lookup(Poset.deserialize(self.n, key))
            if got is None:
                # complete layer, or inside the stored band: absence decides
                return False
            if got != UNKNOWN:
                return True
        return None

    # -- admission ----------------------------------------------------------

    def _expand_slice(self, prows: np.ndarray, pe: np.ndarray, c: int,
                      cap_child) -> _Slice:
        """Children, admissibility and canonical keys for one parent batch.

        The heavy scratch lives only inside this call; the returned slice
        carries candidate-sized key copies so recursion deeper in the
        layer does not pin whole-batch buffers up the stack.
        """
        n = self.n
        s = prows.shape[0]
        maxc = n * (n - 1) // 2
        capk = s * maxc
        counts = np.zeros((s, n, n), dtype=np.int64)
        e_chk = np.zeros(s, dtype=np.int64)
        mi, fail = kernels.children_batch(prows, self.bound, counts, e_chk)
        if fail >= 0:
            raise DownSetBoundExceeded(
                f"level {c}: down-set count exceeded {self.bound}")
        if mi > self.max_ideals:
            self.max_ideals = mi
        out = _Slice()
        out.state = np.zeros(s, dtype=np.uint8)
        out.nopen = np.zeros(s, dtype=np.int64)
        first_tri = np.zeros((capk, 3), dtype=np.int64)
        sib_tri = np.zeros((capk, 3), dtype=np.int64)
        meta = np.zeros((capk, 3), dtype=np.int64)
        heur = 1 if self.cfg.pair_heuristic else 0
        k = kernels.admit_children(prows, pe, counts, cap_child, heur,
                                   first_tri, sib_tri, meta,
                                   out.state, out.nopen)
        out.k = k
        out.par = meta[:k, 0].copy()
        out.e_first = meta[:k, 1].copy()
        out.e_sib = meta[:k, 2].copy()
        if k == 0:
            return out
        child = np.zeros((k, n), dtype=np.int64)
        crows = np.zeros((k, n), dtype=np.int64)
        cflags = np.zeros(k, dtype=np.uint8)
        ckeys = np.zeros((k, self.width), dtype=np.uint8)
        kernels.add_batch(prows, first_tri[:k], child)
        kernels.canonicalize_batch(child, self.tri, crows, cflags, ckeys)
        out.fkeys = [ckeys[i].tobytes() for i in range(k)]
        kernels.add_batch(prows, sib_tri[:k], child)
        kernels.canonicalize_batch(child, self.tri, crows, cflags, ckeys)
        out.skeys = [ckeys[i].tobytes() for i in range(k)]
        return out

    # -- one layer ----------------------------------------------------------

    def _decide_level(self, c: int, rows: np.ndarray, e: np.ndarray,
                      keys: list[bytes]) -> list[bool]:
        b = rows.shape[0]
        self.explored[c] += b
        if c == self.C:
            # budget exhausted; admission numerics keep this unreachable
            out = [int(e[i]) == 1 for i in range(b)]
            self.sortable_ct[c] += sum(out)
            return out

        cfg = self.cfg
        n = self.n
        c1 = c + 1
        cap_child = np.int64(1) << (self.C - c1)

        width = self.width
        keymat = np.frombuffer(b"".join(keys), dtype=np.uint8)
        keymat = keymat.reshape(b, width)
        order = np.lexsort(tuple(keymat[:, j] for j in range(width - 1, -1, -1))
                           + (-e,))

        verdict: list[bool | None] = [None] * b
        openc = np.zeros(b, dtype=np.int64)
        # child key -> settled bool, or the list of watchers parked on it
        ledger: dict[bytes, object] = {}
        batch_keys: list[bytes] = []
        batch_e: list[int] = []

        def dec(g: int) -> None:
            openc[g] -= 1
            if openc[g] == 0:
                verdict[g] = False

        def admit(key: bytes, ee: int, watcher) -> None:
            ledger[key] = [watcher]
            batch_keys.append(key)
            batch_e.append(ee)

        def close_with(g: int, okey: bytes, oe: int) -> None:
            # probe side sortable: the comparison now hinges on the reverse
            got = ledger.get(okey)
            if isinstance(got, bool):
                if got:
                    verdict[g] = True
                else:
                    dec(g)
                return
            sv = self._resolve_stores(c1, okey, okey[0] & 31, oe)
            if sv is True:
                verdict[g] = True
                return
            if sv is False:
                dec(g)
                return
            w = (g, CLOSER, None, 0)
            if got is not None:
                got.append(w)
            else:
                admit(okey, oe, w)

        def notify(w, v: bool) -> None:
            g, role, okey, oe = w
            if verdict[g] is not None:
                return
            if role == CLOSER:
                if v:
                    verdict[g] = True
                else:
                    dec(g)
                return
            if not v:
                dec(g)
                return
            if okey is None:
                # reverse side is a total order
                verdict[g] = True
                return
            close_with(g, okey, oe)

        def flush_batch() -> None:
            nonlocal batch_keys, batch_e
            keys_l = batch_keys
            nb = len(keys_l)
            e_m = np.array(batch_e, dtype=np.int64)
            batch_keys, batch_e = [], []
            kb = np.frombuffer(b"".join(keys_l), dtype=np.uint8)
            kb = kb.reshape(nb, width)
            rows_m = np.zeros((nb, n), dtype=np.int64)
            fl_m = np.zeros(nb, dtype=np.uint8)
            kernels.unpack_batch(kb, n, self.tri, rows_m, fl_m)
            vs = self._decide_level(c1, rows_m, e_m, keys_l)
            del rows_m, fl_m, kb, e_m
            for key, kv in zip(keys_l, vs):
                watchers = ledger[key]
                ledger[key] = bool(kv)
                for w in watchers:
                    notify(w, bool(kv))

        for a in range(0, b, self.slice_parents):
            sel = order[a:a + self.slice_parents]
            sl = self._expand_slice(rows[sel], e[sel], c, cap_child)
            for t in range(len(sel)):
                g = int(sel[t])
                if sl.state[t] == 1:
                    verdict[g] = True
                elif sl.state[t] == 2:
                    verdict[g] = False
                else:
                    openc[g] = int(sl.nopen[t])
            for i in range(sl.k):
                g = int(sel[sl.par[i]])
                if verdict[g] is not None:
                    continue
                ef = int(sl.e_first[i])
                es = int(sl.e_sib[i])
                fkey = sl.fkeys[i]
                got = ledger.get(fkey)
                if isinstance(got, bool):
                    fv: bool | None = got
                elif got is not None:
                    # probe class already active: watch it
                    if es == 1:
                        got.append((g, PROBE, None, 0))
                    else:
                        got.append((g, PROBE, sl.skeys[i], es))
                    continue
                else:
                    fv = self._resolve_stores(c1, fkey, fkey[0] & 31, ef)
                if fv is True:
                    if es == 1:
                        verdict[g] = True
                    else:
                        close_with(g, sl.skeys[i], es)
                    continue
                if fv is False:
                    dec(g)
                    continue
                skey = sl.skeys[i]
                sgot = ledger.get(skey)
                if isinstance(sgot, bool):
                    # reverse class retired first: the probe closes alone
                    if sgot:
                        admit(fkey, ef, (g, CLOSER, None, 0))
                    else:
                        dec(g)
                elif sgot is not None:
                    # reverse class already selected by an earlier comparison;
                    # do not select the probe side additionally
                    sgot.append((g, PROBE, fkey, ef))
                else:
                    if es == 1:
                        w = (g, PROBE, None, 0)
                    else:
                        w = (g, PROBE, skey, es)
                    admit(fkey, ef, w)
            sl = None
            if len(batch_keys) >= cfg.chunk_limit:
                flush_batch()
        while batch_keys:
            flush_batch()

        st = self._memo(c)
        adv = self.advice
        for i in range(b):
            v = verdict[i]
            if v is None:
                raise RuntimeError("layer finished with an undecided poset")
            status = SORTABLE if v else UNSORTABLE
            fl = keys[i][0] & 31
            if fl & FLAG_CANONICAL:
                st.insert_key(keys[i], status)
            else:
                st.insert_or_get(Poset.deserialize(n, keys[i]), status)
            if cfg.validate and adv is not None and (
                    c >= adv.first_full or int(e[i]) >= self.adv_min[c]):
                alev = adv.levels[c]
                if fl & FLAG_CANONICAL:
                    got = alev.lookup_key(keys[i])
                else:
                    got = alev.lookup(Poset.deserialize(n, keys[i]))
                hinted = None if got == UNKNOWN else (got is not None)
                if hinted is not None and hinted != v:
                    raise ForwardInconsistencyError(
                        f"level {c}: advice says "
                        f"{'sortable' if hinted else 'not sortable'}, "
                        f"direct search says the opposite")
        if st.over_cap():
            self.evictions += st.evict()
        done = [bool(x) for x in verdict]
        self.sortable_ct[c] += sum(done)
        return done

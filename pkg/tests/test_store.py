"""Layer store: merge semantics, congruence, spill files, eviction, threads."""

import random
import threading
from fractions import Fraction

import pytest

from sortbounds.canonical import canonicalize
from sortbounds.posets import FLAG_CANONICAL, Poset, dual, serialized_size
from sortbounds.store import (
    SORTABLE,
    UNKNOWN,
    UNSORTABLE,
    LayerFile,
    LayerStore,
    StoreConflictError,
    write_layer_file,
)

from conftest import random_poset
from test_canonical import UNCERTIFIED_EDGES


def canon_batch(n, count, seed):
    rng = random.Random(seed)
    out = {}
    while len(out) < count:
        c = canonicalize(random_poset(n, rng))
        out[c.key_bytes()] = c
    return list(out.values())


def relabel(p, rng):
    # Permute labels, then let from_closure pick fresh topological ones.
    from sortbounds.posets import from_closure

    perm = list(range(p.n))
    rng.shuffle(perm)
    clos = p.closure_rows()
    rows = [0] * p.n
    for a in range(p.n):
        for b in range(p.n):
            if (clos[a] >> b) & 1:
                rows[perm[a]] |= 1 << perm[b]
    return from_closure(p.n, rows)


class TestMergeSemantics:
    def test_insert_then_get(self):
        st = LayerStore(6, shards=4)
        p = canonicalize(random_poset(6, random.Random(1)))
        assert st.insert_or_get(p, SORTABLE) is None
        assert st.insert_or_get(p, SORTABLE) == SORTABLE
        assert len(st) == 1

    def test_unknown_upgrades(self):
        st = LayerStore(6, shards=4)
        p = canonicalize(random_poset(6, random.Random(2)))
        st.insert_or_get(p, UNKNOWN)
        assert st.insert_or_get(p, SORTABLE) == UNKNOWN
        assert st.lookup(p) == SORTABLE
        # Unknown never downgrades a definite verdict.
        assert st.insert_or_get(p, UNKNOWN) == SORTABLE
        assert st.lookup(p) == SORTABLE

    @pytest.mark.parametrize("first,second", [(SORTABLE, UNSORTABLE),
                                              (UNSORTABLE, SORTABLE)])
    def test_definite_flip_is_fatal(self, first, second):
        st = LayerStore(6, shards=4)
        p = canonicalize(random_poset(6, random.Random(3)))
        st.insert_or_get(p, first)
        with pytest.raises(StoreConflictError):
            st.insert_or_get(p, second)

    def test_statuses_are_distinct(self):
        assert len({SORTABLE, UNKNOWN, UNSORTABLE}) == 3


class TestCongruence:
    def test_relabeled_insert_hits(self):
        rng = random.Random(4)
        st = LayerStore(7, shards=4)
        for _ in range(25):
            p = random_poset(7, rng)
            cp = canonicalize(p)
            st.insert_or_get(cp, SORTABLE)
            cq = canonicalize(relabel(p, rng))
            assert st.insert_or_get(cq, SORTABLE) == SORTABLE, p.hasse
        # Random posets may repeat a congruence class, so >= not ==.
        assert st.hits >= 25

    def test_dual_is_same_entry(self):
        rng = random.Random(5)
        st = LayerStore(7, shards=4)
        hits = 0
        for _ in range(25):
            p = random_poset(7, rng)
            st.insert_or_get(canonicalize(p), SORTABLE)
            prior = st.insert_or_get(canonicalize(dual(p)), SORTABLE)
            hits += prior is not None
        assert hits == 25

    def test_uncertified_bucket_path(self):
        p = Poset.from_edges(11, UNCERTIFIED_EDGES)
        cp = canonicalize(p)
        assert not cp.flags & FLAG_CANONICAL
        st = LayerStore(11, shards=4)
        assert st.insert_or_get(cp, UNKNOWN) is None
        rng = random.Random(6)
        cq = canonicalize(relabel(p, rng))
        assert st.insert_or_get(cq, SORTABLE) == UNKNOWN
        assert st.lookup(cp) == SORTABLE
        assert len(st) == 1

    def test_mixed_certifications_stay_separate(self):
        st = LayerStore(11, shards=4)
        odd = canonicalize(Poset.from_edges(11, UNCERTIFIED_EDGES))
        flat = canonicalize(Poset.chain(11))
        st.insert_or_get(odd, UNKNOWN)
        st.insert_or_get(flat, SORTABLE)
        assert len(st) == 2
        assert st.lookup(odd) == UNKNOWN
        assert st.lookup(flat) == SORTABLE


class TestLayerFile:
    def entries(self, n, count, seed):
        return [(p.key_bytes(), SORTABLE if i % 3 else UNKNOWN)
                for i, p in enumerate(canon_batch(n, count, seed))]

    def test_round_trip(self, tmp_path):
        path = str(tmp_path / "layer.bin")
        entries = self.entries(6, 40, 7)
        count = write_layer_file(path, 6, 10, 8, 7, Fraction(5, 100), entries)
        assert count == 40
        lf = LayerFile(path)
        assert (lf.n, lf.budget, lf.level, lf.first_full) == (6, 10, 8, 7)
        assert lf.bandwidth == Fraction(5, 100)
        assert lf.count == 40
        got = {k: s for k, s in lf}
        assert got == dict(entries)
        for key, status in entries:
            assert lf.get(key) == status
        lf.close()

    def test_iteration_is_sorted(self, tmp_path):
        path = str(tmp_path / "layer.bin")
        write_layer_file(path, 6, 10, 8, 7, Fraction(0), self.entries(6, 30, 8))
        lf = LayerFile(path)
        keys = [k for k, _ in lf]
        assert keys == sorted(keys)
        lf.close()

    def test_miss_returns_none(self, tmp_path):
        path = str(tmp_path / "layer.bin")
        entries = self.entries(6, 20, 9)
        write_layer_file(path, 6, 10, 8, 7, Fraction(0), entries[:10])
        lf = LayerFile(path)
        present = {k for k, _ in entries[:10]}
        for key, _ in entries[10:]:
            if key not in present:
                assert lf.get(key) is None
        lf.close()

    def test_threshold_reconstruction(self, tmp_path):
        path = str(tmp_path / "layer.bin")
        write_layer_file(path, 13, 33, 30, 28, Fraction(5, 100), [])
        lf = LayerFile(path)
        import math
        assert lf.threshold() == Fraction(math.factorial(13), 1 << 33) + \
            Fraction(5, 100)
        lf.close()

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"\0" * 64)
        with pytest.raises(ValueError):
            LayerFile(str(path))

    def test_truncated_rejected(self, tmp_path):
        path = str(tmp_path / "layer.bin")
        write_layer_file(path, 6, 10, 8, 7, Fraction(0), self.entries(6, 10, 10))
        data = open(path, "rb").read()
        short = str(tmp_path / "short.bin")
        open(short, "wb").write(data[:-3])
        with pytest.raises(ValueError):
            LayerFile(short)


class TestFreezeSpill:
    def test_freeze_keeps_lookups(self):
        st = LayerStore(7, shards=4)
        posets = canon_batch(7, 60, 11)
        for i, p in enumerate(posets):
            st.insert_or_get(p, SORTABLE if i % 2 else UNKNOWN)
        st.freeze()
        for i, p in enumerate(posets):
            assert st.lookup(p) == (SORTABLE if i % 2 else UNKNOWN)
        assert len(st) == 60

    def test_insert_after_freeze_sees_prior(self):
        st = LayerStore(7, shards=4)
        posets = canon_batch(7, 20, 12)
        for p in posets:
            st.insert_or_get(p, UNKNOWN)
        st.freeze()
        for p in posets:
            assert st.insert_or_get(p, SORTABLE) == UNKNOWN
        for p in posets:
            assert st.lookup(p) == SORTABLE

    def test_spill_round_trip(self, tmp_path):
        st = LayerStore(7, shards=4)
        posets = canon_batch(7, 80, 13)
        want = {}
        for i, p in enumerate(posets):
            status = (SORTABLE, UNKNOWN, UNSORTABLE)[i % 3]
            st.insert_or_get(p, status)
            want[p.key_bytes()] = status
        path = str(tmp_path / "spill.bin")
        st.spill(path, budget=12, level=3)
        assert {k: s for k, s, _ in st.items()} == want
        for p in posets:
            assert st.lookup(p) == want[p.key_bytes()]
        # Bit-exact reload into a fresh store.
        fresh = LayerStore(7, shards=4)
        fresh.attach(LayerFile(path))
        assert {k: s for k, s, _ in fresh.items()} == want
        st.close()
        fresh.close()

    def test_respill_merges(self, tmp_path):
        st = LayerStore(6, shards=4)
        posets = canon_batch(6, 30, 14)
        for p in posets[:15]:
            st.insert_or_get(p, SORTABLE)
        st.spill(str(tmp_path / "a.bin"))
        for p in posets[15:]:
            st.insert_or_get(p, UNKNOWN)
        st.spill(str(tmp_path / "b.bin"))
        assert len(st) == 30
        for i, p in enumerate(posets):
            assert st.lookup(p) == (SORTABLE if i < 15 else UNKNOWN)
        st.close()

    def test_uncertified_stays_resident(self, tmp_path):
        st = LayerStore(11, shards=4)
        odd = canonicalize(Poset.from_edges(11, UNCERTIFIED_EDGES))
        st.insert_or_get(odd, UNKNOWN)
        st.spill(str(tmp_path / "layer.bin"))
        assert st.lookup(odd) == UNKNOWN
        st.close()


class TestEvict:
    def fill(self, st, n, seed, statuses):
        posets = canon_batch(n, len(statuses), seed)
        for p, s in zip(posets, statuses):
            st.insert_or_get(p, s)
        return posets

    def test_policy_prefers_sortable(self):
        st = LayerStore(7, shards=4, cap=10)
        self.fill(st, 7, 15, [SORTABLE] * 10 + [UNSORTABLE] * 10)
        assert st.over_cap()
        freed = st.evict()
        assert freed == 10
        assert [s for _, s, _ in st.items()] == [SORTABLE] * 10

    def test_unknown_outlives_unsortable(self):
        st = LayerStore(7, shards=4, cap=12)
        self.fill(st, 7, 16, [UNKNOWN] * 8 + [UNSORTABLE] * 8)
        st.evict()
        statuses = [s for _, s, _ in st.items()]
        assert statuses.count(UNSORTABLE) == 4
        assert statuses.count(UNKNOWN) == 8

    def test_under_capacity_noop(self):
        st = LayerStore(7, shards=4, cap=100)
        self.fill(st, 7, 17, [SORTABLE] * 10)
        assert st.evict() == 0
        assert len(st) == 10

    def test_backward_layers_never_evict(self):
        st = LayerStore(7, shards=4, cap=1, evictable=False)
        self.fill(st, 7, 18, [SORTABLE] * 4)
        with pytest.raises(RuntimeError):
            st.evict()


class TestThreadStress:
    def test_parallel_inserts_replay_equal(self):
        # 10^6 inserts over 48 threads, then the same operations replayed
        # sequentially: the final maps must agree (no lost updates).
        rng = random.Random(0x51)
        n = 13
        width = serialized_size(n)
        hasse_bits = n * (n - 1) // 2
        keys = []
        for _ in range(120_000):
            blob = FLAG_CANONICAL | (rng.getrandbits(hasse_bits) << 5)
            keys.append(blob.to_bytes(width, "little"))
        ops = []
        for _ in range(1_000_000):
            key = keys[rng.randrange(len(keys))]
            # Definite verdict fixed per key so replays cannot conflict.
            definite = SORTABLE if key[-1] & 1 else UNSORTABLE
            ops.append((key, definite if rng.random() < 0.7 else UNKNOWN))

        st = LayerStore(n, shards=64)
        nthreads = 48
        barrier = threading.Barrier(nthreads)

        def worker(i):
            barrier.wait()
            for key, status in ops[i::nthreads]:
                st.insert_key(key, status)

        threads = [threading.Thread(target=worker, args=(i,))
                   for i in range(nthreads)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()

        replay = LayerStore(n, shards=1)
        for key, status in ops:
            replay.insert_key(key, status)

        got = {k: s for k, s, _ in st.items()}
        want = {k: s for k, s, _ in replay.items()}
        assert got == want
        assert st.inserts == len(want)
        assert st.hits == len(ops) - len(want)

"""Sharded poset stores shared by both searches.

One abstraction serves the forward search's old-generation store and the
backward search's per-level sets.  Entries are keyed by canonical identity
bytes (status bits cleared); posets whose canonical form is uncertified
live in side buckets keyed by the label-independent hash and are resolved
by full congruence checks.  Certified and uncertified posets are never
congruent to each other (the flags are congruence-class invariants), so
the two paths never need cross-probing.

Concurrency: insert/lookup lock only the target shard.  Structural
operations (freeze, spill, evict, iteration) assume exclusive access; the
engines call them at phase barriers.
"""

import mmap
import os
import struct
import threading
from fractions import Fraction
from math import factorial

from .canonical import congruent, hash_bytes, poset_hash
from .posets import (
    FLAG_CANONICAL,
    FLAG_SORTABLE,
    FLAG_UNKNOWN,
    STATUS_MASK,
    Poset,
    serialized_size,
)

SORTABLE = FLAG_SORTABLE
UNKNOWN = FLAG_UNKNOWN
UNSORTABLE = 0

_STATUS_NAMES = {SORTABLE: "sortable", UNKNOWN: "unknown",
                 UNSORTABLE: "unsortable"}

_CLEAR = 0xFF & ~STATUS_MASK


class StoreConflictError(RuntimeError):
    """Two derivations produced opposite definite verdicts for one poset."""


def _merge(old: int, new: int) -> int:
    """Definite verdicts win over unknown; opposite definites are fatal."""
    if old == new or new == UNKNOWN:
        return old
    if old == UNKNOWN:
        return new
    raise StoreConflictError(
        f"verdict flip: stored {_STATUS_NAMES[old]}, got {_STATUS_NAMES[new]}")


# -- layer files -------------------------------------------------------------

# Spill files and advice files share one format: a fixed header followed by
# count fixed-width serialized posets sorted by status-cleared key bytes.
# The efficiency threshold is recorded as the bandwidth rational; the exact
# threshold n!/2^C + bw is reconstructed from (n, budget, bw).
_MAGIC = b"SBLV0001"
_HEADER = struct.Struct("<8sIIiiQQQ")


def write_layer_file(path: str, n: int, budget: int, level: int,
                     first_full: int, bandwidth: Fraction,
                     entries) -> int:
    """Write (key_bytes, status) pairs; returns the entry count."""
    rows = sorted(entries)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, n, budget, level, first_full,
                              bandwidth.numerator, bandwidth.denominator,
                              len(rows)))
        for key, status in rows:
            fh.write(bytes([key[0] | status]) + key[1:])
    return len(rows)


class LayerFile:
    """Read-only view of one spilled or advice layer."""

    def __init__(self, path: str):
        self.path = path
        fh = open(path, "rb")
        header = fh.read(_HEADER.size)
        magic, n, budget, level, first_full, num, den, count = \
            _HEADER.unpack(header)
        if magic != _MAGIC:
            fh.close()
            raise ValueError(f"{path}: not a layer file")
        self.n = n
        self.budget = budget
        self.level = level
        self.first_full = first_full
        self.bandwidth = Fraction(num, den)
        self.count = count
        self.width = serialized_size(n)
        expected = _HEADER.size + count * self.width
        if os.fstat(fh.fileno()).st_size != expected:
            fh.close()
            raise ValueError(f"{path}: size mismatch")
        self._fh = fh
        self._mm = mmap.mmap(fh.fileno(), 0, access=mmap.ACCESS_READ) \
            if count else None

    def threshold(self) -> Fraction:
        return Fraction(factorial(self.n), 1 << self.budget) + self.bandwidth

    def _entry(self, idx: int) -> bytes:
        off = _HEADER.size + idx * self.width
        return self._mm[off:off + self.width]

    def _key_at(self, idx: int) -> bytes:
        raw = self._entry(idx)
        return bytes([raw[0] & _CLEAR]) + raw[1:]

    def get(self, key: bytes) -> int | None:
        lo, hi = 0, self.count
        while lo < hi:
            mid = (lo + hi) // 2
            probe = self._key_at(mid)
            if probe < key:
                lo = mid + 1
            elif probe > key:
                hi = mid
            else:
                return self._entry(mid)[0] & STATUS_MASK
        return None

    def __iter__(self):
        for idx in range(self.count):
            raw = self._entry(idx)
            yield bytes([raw[0] & _CLEAR]) + raw[1:], raw[0] & STATUS_MASK

    def close(self) -> None:
        if self._mm is not None:
            self._mm.close()
            self._mm = None
        self._fh.close()


# -- in-memory layer ---------------------------------------------------------


class _Shard:
    __slots__ = ("lock", "certified", "odd", "size", "hits", "inserts")

    def __init__(self):
        self.lock = threading.Lock()
        self.certified: dict[bytes, int] = {}
        # Uncertified canonical forms: symmetric hash -> [poset, status] rows.
        self.odd: dict[int, list[list]] = {}
        self.size = 0
        self.hits = 0
        self.inserts = 0


class LayerStore:
    """One sharded map from canonical poset to verdict status.

    evictable=False (backward levels) makes evict() a hard error; those
    layers must stay complete for absence to mean anything.
    """

    def __init__(self, n: int, shards: int = 1, cap: int | None = None,
                 evictable: bool = True):
        if shards & (shards - 1):
            raise ValueError("shard count must be a power of two")
        self.n = n
        self.cap = cap
        self.evictable = evictable
        self._mask = shards - 1
        self._shards = [_Shard() for _ in range(shards)]
        self._frozen_keys: bytes | None = None
        self._frozen_status: bytearray | None = None
        self._spill: LayerFile | None = None
        self._fragments: bytearray | None = None
        self.evicted = 0

    @property
    def hits(self) -> int:
        return sum(s.hits for s in self._shards)

    @property
    def inserts(self) -> int:
        return sum(s.inserts for s in self._shards)

    # -- sizing ----------------------------------------------------------

    def __len__(self) -> int:
        total = sum(s.size for s in self._shards)
        if self._frozen_status is not None:
            total += len(self._frozen_status)
        if self._spill is not None:
            total += self._spill.count
        return total

    def resident(self) -> int:
        total = sum(s.size for s in self._shards)
        if self._frozen_status is not None:
            total += len(self._frozen_status)
        return total

    def over_cap(self) -> bool:
        return self.cap is not None and self.resident() > self.cap

    # -- core map --------------------------------------------------------

    def insert_or_get(self, p: Poset, status: int) -> int | None:
        """Insert a canonicalized poset; returns the prior status if any.

        A congruent resident entry absorbs the new status (definite beats
        unknown; a definite flip raises).  Never fails on capacity: the
        caller polls over_cap() at its next barrier and evicts then.
        """
        key = p.key_bytes()
        if p.flags & FLAG_CANONICAL:
            return self._insert_certified(key, status)
        return self._insert_odd(p, status)

    def insert_key(self, key: bytes, status: int) -> int | None:
        """Certified-key fast path for engine batches."""
        return self._insert_certified(key, status)

    def _insert_certified(self, key: bytes, status: int) -> int | None:
        shard = self._shards[hash_bytes(key) & self._mask]
        with shard.lock:
            prior = shard.certified.get(key)
            if prior is not None:
                shard.certified[key] = _merge(prior, status)
                shard.hits += 1
                return prior
            cold = self._cold_get(key)
            if cold is not None:
                shard.certified[key] = _merge(cold, status)
                shard.size += 1
                shard.hits += 1
                return cold
            shard.certified[key] = status
            shard.size += 1
            shard.inserts += 1
            return None

    def _insert_odd(self, p: Poset, status: int) -> int | None:
        h = poset_hash(p)
        shard = self._shards[h & self._mask]
        with shard.lock:
            bucket = shard.odd.setdefault(h, [])
            for row in bucket:
                if congruent(row[0], p):
                    prior = row[1]
                    row[1] = _merge(prior, status)
                    shard.hits += 1
                    return prior
            bucket.append([p, status])
            shard.size += 1
            shard.inserts += 1
            return None

    def lookup(self, p: Poset) -> int | None:
        if p.flags & FLAG_CANONICAL:
            return self.lookup_key(p.key_bytes())
        h = poset_hash(p)
        shard = self._shards[h & self._mask]
        with shard.lock:
            for row in shard.odd.get(h, ()):
                if congruent(row[0], p):
                    return row[1]
        return None

    def lookup_key(self, key: bytes) -> int | None:
        shard = self._shards[hash_bytes(key) & self._mask]
        with shard.lock:
            got = shard.certified.get(key)
        if got is not None:
            return got
        return self._cold_get(key)

    def _cold_get(self, key: bytes) -> int | None:
        if self._frozen_keys is not None:
            width = serialized_size(self.n)
            lo, hi = 0, len(self._frozen_status)
            while lo < hi:
                mid = (lo + hi) // 2
                probe = self._frozen_keys[mid * width:(mid + 1) * width]
                if probe < key:
                    lo = mid + 1
                elif probe > key:
                    hi = mid
                else:
                    return self._frozen_status[mid]
        if self._spill is not None:
            frag = hash_bytes(key) & 0xFFFF
            if self._fragments[frag >> 3] & (1 << (frag & 7)):
                return self._spill.get(key)
        return None

    # -- structural operations (exclusive access) -------------------------

    def items(self):
        """Every entry as (key, status, poset | None), deduplicated.

        A resident copy shadows a stale frozen/spilled copy of the same
        key (re-inserts merge statuses into the dicts only).
        """
        merged: dict[bytes, int] = {}
        if self._spill is not None:
            merged.update((k, s) for k, s in self._spill)
        if self._frozen_keys is not None:
            width = serialized_size(self.n)
            for i, status in enumerate(self._frozen_status):
                merged[self._frozen_keys[i * width:(i + 1) * width]] = status
        for shard in self._shards:
            merged.update(shard.certified)
        for key, status in merged.items():
            yield key, status, None
        for shard in self._shards:
            for bucket in shard.odd.values():
                for p, status in bucket:
                    yield p.key_bytes(), status, p

    def freeze(self) -> None:
        """Compact certified entries into one sorted resident block.

        Uncertified entries stay in their buckets (congruence lookups need
        the poset objects).  The layer stays readable and insertable; new
        inserts land in the dicts again.
        """
        width = serialized_size(self.n)
        rows = []
        if self._frozen_keys is not None:
            rows.extend(
                (self._frozen_keys[i * width:(i + 1) * width], status)
                for i, status in enumerate(self._frozen_status))
        for shard in self._shards:
            rows.extend(shard.certified.items())
            shard.certified = {}
            shard.size = sum(len(b) for b in shard.odd.values())
        rows.sort()
        self._frozen_keys = b"".join(k for k, _ in rows)
        self._frozen_status = bytearray(s for _, s in rows)

    def spill(self, path: str, budget: int = 0, level: int = -1,
              first_full: int = 0, bandwidth: Fraction = Fraction(0)) -> int:
        """Move certified entries to disk, keeping 16-bit hash fragments.

        A cleared fragment bit answers a miss without touching the file.
        Re-spilling merges the previous file's entries into the new one.
        """
        entries = {}
        if self._spill is not None:
            entries.update(dict((k, s) for k, s in self._spill))
        if self._frozen_keys is not None:
            width = serialized_size(self.n)
            for i, status in enumerate(self._frozen_status):
                entries[self._frozen_keys[i * width:(i + 1) * width]] = status
            self._frozen_keys = None
            self._frozen_status = None
        for shard in self._shards:
            entries.update(shard.certified)
            shard.certified = {}
            shard.size = sum(len(b) for b in shard.odd.values())
        count = write_layer_file(path, self.n, budget, level, first_full,
                                 bandwidth, entries.items())
        old = self._spill
        self._spill = LayerFile(path)
        if old is not None:
            old.close()
        self._fragments = bytearray(8192)
        for key in entries:
            frag = hash_bytes(key) & 0xFFFF
            self._fragments[frag >> 3] |= 1 << (frag & 7)
        return count

    def attach(self, layer: LayerFile) -> None:
        """Adopt an existing layer file as this store's cold section."""
        if layer.n != self.n:
            raise ValueError("element count mismatch")
        if self._spill is not None:
            self._spill.close()
        self._spill = layer
        self._fragments = bytearray(8192)
        for key, _ in layer:
            frag = hash_bytes(key) & 0xFFFF
            self._fragments[frag >> 3] |= 1 << (frag & 7)

    def evict(self) -> int:
        """Drop resident entries until at/below cap, worst verdicts first.

        Unsortable entries go first, then unknown; sortable entries are
        kept whenever possible ("prefer to store sortable posets").
        Evicted posets may be re-derived later; verdicts never change.
        """
        if not self.evictable:
            raise RuntimeError("this layer must stay complete")
        if self.cap is None or not self.over_cap():
            return 0
        freed = 0
        for pass_status in (UNSORTABLE, UNKNOWN, SORTABLE):
            for shard in self._shards:
                if not self.over_cap():
                    break
                drop = [k for k, s in shard.certified.items()
                        if s == pass_status]
                for k in drop:
                    if not self.over_cap():
                        break
                    del shard.certified[k]
                    shard.size -= 1
                    freed += 1
                for h in list(shard.odd):
                    if not self.over_cap():
                        break
                    bucket = shard.odd[h]
                    keep = []
                    for row in bucket:
                        if row[1] == pass_status and self.over_cap():
                            shard.size -= 1
                            freed += 1
                        else:
                            keep.append(row)
                    if keep:
                        shard.odd[h] = keep
                    else:
                        del shard.odd[h]
            if not self.over_cap():
                break
        self.evicted += freed
        return freed

    def close(self) -> None:
        if self._spill is not None:
            self._spill.close()
            self._spill = None

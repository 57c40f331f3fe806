"""Posets as topologically ordered Hasse diagrams over bit masks.

A poset on n <= 31 elements is stored as n row masks: bit j of hasse[i] is
set iff (i, j) is a Hasse edge, and every edge satisfies i < j, so the
vertex numbering is always a topological order.  Five flag bits ride along:
two canonicality bits that are part of the identity, three status bits that
are storage only.
"""

from dataclasses import dataclass

N_MAX = 31

FLAG_CANONICAL = 1
FLAG_DUAL_CANONICAL = 2
FLAG_SORTABLE = 4
FLAG_UNKNOWN = 8
FLAG_RESERVED = 16

FLAG_BITS = 5
ALL_FLAGS = (1 << FLAG_BITS) - 1
STATUS_MASK = FLAG_SORTABLE | FLAG_UNKNOWN | FLAG_RESERVED
IDENTITY_FLAGS = FLAG_CANONICAL | FLAG_DUAL_CANONICAL


def serialized_size(n: int) -> int:
    """Bytes per stored poset: n(n-1)/2 Hasse bits plus 5 flag bits."""
    return (n * (n - 1) // 2 + FLAG_BITS + 7) // 8


def _tri_offsets(n: int) -> tuple[int, ...]:
    off = []
    k = 0
    for i in range(n):
        off.append(k)
        k += n - 1 - i
    return tuple(off)

_TRI_CACHE: dict[int, tuple[int, ...]] = {}


def tri_offsets(n: int) -> tuple[int, ...]:
    t = _TRI_CACHE.get(n)
    if t is None:
        t = _TRI_CACHE[n] = _tri_offsets(n)
    return t


class Poset:
    """Immutable poset value; rows strictly upper triangular."""

    __slots__ = ("n", "hasse", "flags", "_closure", "_preds", "_hash")

    def __init__(self, n: int, hasse: tuple[int, ...], flags: int = 0,
                 validate: bool = True):
        self.n = n
        self.hasse = tuple(hasse)
        self.flags = flags
        self._closure: tuple[int, ...] | None = None
        self._preds: tuple[int, ...] | None = None
        self._hash: int | None = None
        if validate:
            self._validate()

    def _validate(self) -> None:
        n = self.n
        if not (1 <= n <= N_MAX):
            raise ValueError(f"n must be in 1..{N_MAX}, got {n}")
        if len(self.hasse) != n:
            raise ValueError("hasse must have one row per element")
        if self.flags & ~ALL_FLAGS:
            raise ValueError("unknown flag bits set")
        full = (1 << n) - 1
        for i, row in enumerate(self.hasse):
            if row & ~full or row & ((1 << (i + 1)) - 1):
                raise ValueError(f"row {i} is not strictly upper triangular")
        clos = self.closure_rows()
        for i in range(n):
            implied = 0
            m = self.hasse[i]
            while m:
                j = (m & -m).bit_length() - 1
                m &= m - 1
                implied |= clos[j]
            if self.hasse[i] & implied:
                raise ValueError(f"row {i} stores a transitive edge")

    # -- derived views -------------------------------------------------

    def closure_rows(self) -> tuple[int, ...]:
        """Strict transitive closure as successor masks."""
        if self._closure is None:
            n = self.n
            clos = [0] * n
            for i in range(n - 1, -1, -1):
                c = self.hasse[i]
                m = self.hasse[i]
                while m:
                    j = (m & -m).bit_length() - 1
                    m &= m - 1
                    c |= clos[j]
                clos[i] = c
            self._closure = tuple(clos)
        return self._closure

    def pred_rows(self) -> tuple[int, ...]:
        """Strict closure as predecessor masks (transpose of closure)."""
        if self._preds is None:
            n = self.n
            pred = [0] * n
            clos = self.closure_rows()
            for i in range(n):
                m = clos[i]
                while m:
                    j = (m & -m).bit_length() - 1
                    m &= m - 1
                    pred[j] |= 1 << i
            self._preds = tuple(pred)
        return self._preds

    def comparable(self, u: int, v: int) -> bool:
        clos = self.closure_rows()
        return bool((clos[u] >> v) & 1 or (clos[v] >> u) & 1)

    def incomparable_pairs(self) -> list[tuple[int, int]]:
        clos = self.closure_rows()
        out = []
        for u in range(self.n):
            for v in range(u + 1, self.n):
                if not ((clos[u] >> v) & 1 or (clos[v] >> u) & 1):
                    out.append((u, v))
        return out

    def hasse_edges(self) -> list[tuple[int, int]]:
        out = []
        for i, row in enumerate(self.hasse):
            m = row
            while m:
                j = (m & -m).bit_length() - 1
                m &= m - 1
                out.append((i, j))
        return out

    def edge_count(self) -> int:
        return sum(row.bit_count() for row in self.hasse)

    def relation_count(self) -> int:
        return sum(row.bit_count() for row in self.closure_rows())

    def is_total_order(self) -> bool:
        return self.relation_count() == self.n * (self.n - 1) // 2

    def is_unordered(self) -> bool:
        return all(row == 0 for row in self.hasse)

    def singletons(self) -> list[int]:
        """Vertices with no incident Hasse edge."""
        touched = 0
        for i, row in enumerate(self.hasse):
            if row:
                touched |= row | (1 << i)
        return [i for i in range(self.n) if not (touched >> i) & 1]

    def pairs(self) -> list[tuple[int, int]]:
        """Connected components of exactly two vertices."""
        n = self.n
        adj = [0] * n
        for i, row in enumerate(self.hasse):
            adj[i] |= row
            m = row
            while m:
                j = (m & -m).bit_length() - 1
                m &= m - 1
                adj[j] |= 1 << i
        seen = 0
        out = []
        for i in range(n):
            if (seen >> i) & 1:
                continue
            comp = 1 << i
            frontier = adj[i] & ~comp
            while frontier:
                comp |= frontier
                nxt = 0
                m = frontier
                while m:
                    j = (m & -m).bit_length() - 1
                    m &= m - 1
                    nxt |= adj[j]
                frontier = nxt & ~comp
            seen |= comp
            if comp.bit_count() == 2:
                a = (comp & -comp).bit_length() - 1
                b = comp.bit_length() - 1
                out.append((a, b))
        return out

    # -- serialization ---------------------------------------------------

    def packed_hasse(self) -> int:
        off = tri_offsets(self.n)
        acc = 0
        for i, row in enumerate(self.hasse):
            acc |= (row >> (i + 1)) << off[i]
        return acc

    def serialize(self) -> bytes:
        """Little-endian bit stream: 5 flag bits, then Hasse bits row-major."""
        blob = self.flags | (self.packed_hasse() << FLAG_BITS)
        return blob.to_bytes(serialized_size(self.n), "little")

    def key_bytes(self) -> bytes:
        """Serialization with the status bits cleared; the identity bytes."""
        blob = (self.flags & ~STATUS_MASK) | (self.packed_hasse() << FLAG_BITS)
        return blob.to_bytes(serialized_size(self.n), "little")

    @classmethod
    def deserialize(cls, n: int, data: bytes, validate: bool = True) -> "Poset":
        if len(data) != serialized_size(n):
            raise ValueError(f"expected {serialized_size(n)} bytes, got {len(data)}")
        blob = int.from_bytes(data, "little")
        flags = blob & ALL_FLAGS
        bits = blob >> FLAG_BITS
        if bits >> (n * (n - 1) // 2):
            raise ValueError("padding bits are not zero")
        off = tri_offsets(n)
        rows = []
        for i in range(n):
            width = n - 1 - i
            seg = (bits >> off[i]) & ((1 << width) - 1)
            rows.append(seg << (i + 1))
        return cls(n, tuple(rows), flags, validate=validate)

    # -- construction ----------------------------------------------------

    @classmethod
    def antichain(cls, n: int) -> "Poset":
        if not (1 <= n <= N_MAX):
            raise ValueError(f"n must be in 1..{N_MAX}, got {n}")
        return cls(n, (0,) * n, 0, validate=False)

    @classmethod
    def chain(cls, n: int) -> "Poset":
        if not (1 <= n <= N_MAX):
            raise ValueError(f"n must be in 1..{N_MAX}, got {n}")
        rows = tuple((1 << (i + 1)) if i + 1 < n else 0 for i in range(n))
        return cls(n, rows, 0, validate=False)

    @classmethod
    def from_edges(cls, n: int, edges: list[tuple[int, int]]) -> "Poset":
        """Build from arbitrary strict order relations (closed and reduced)."""
        clos = [0] * n
        for u, v in edges:
            clos[u] |= 1 << v
        _close_in_place(n, clos)
        for i in range(n):
            if (clos[i] >> i) & 1:
                raise ValueError("relation contains a cycle")
        return from_closure(n, clos)

    def with_flags(self, flags: int) -> "Poset":
        p = Poset(self.n, self.hasse, flags, validate=False)
        p._closure = self._closure
        p._preds = self._preds
        return p

    def relabeled(self, perm: list[int]) -> "Poset":
        """Apply old->new index map; perm must be a topological order."""
        n = self.n
        rows = [0] * n
        for i, row in enumerate(self.hasse):
            m = row
            ni = perm[i]
            acc = 0
            while m:
                j = (m & -m).bit_length() - 1
                m &= m - 1
                nj = perm[j]
                if nj < ni:
                    raise ValueError("permutation is not topological")
                acc |= 1 << nj
            rows[ni] = acc
        return Poset(n, tuple(rows), 0, validate=False)

    # -- identity ----------------------------------------------------------

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Poset):
            return NotImplemented
        return (self.n == other.n and self.hasse == other.hasse
                and (self.flags & IDENTITY_FLAGS) == (other.flags & IDENTITY_FLAGS))

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.n, self.hasse, self.flags & IDENTITY_FLAGS))
        return self._hash

    def __repr__(self) -> str:
        edges = ",".join(f"{i}<{j}" for i, j in self.hasse_edges())
        return f"Poset(n={self.n}, [{edges}], flags={self.flags:05b})"


@dataclass(frozen=True)
class Relation:
    """Reflexive-transitive closure as a full bit matrix (row masks)."""

    n: int
    rows: tuple[int, ...]

    def strict_rows(self) -> tuple[int, ...]:
        return tuple(r & ~(1 << i) for i, r in enumerate(self.rows))

    def contains(self, u: int, v: int) -> bool:
        return bool((self.rows[u] >> v) & 1)


def _close_in_place(n: int, rows: list[int]) -> None:
    """Strict transitive closure of arbitrary row masks, in place."""
    for j in range(n):
        bit = 1 << j
        for i in range(n):
            if rows[i] & bit:
                rows[i] |= rows[j]


def _stable_topo_perm(n: int, succ: list[int]) -> list[int]:
    """Kahn order, smallest original index first; perm[old] = new."""
    indeg = [0] * n
    for i in range(n):
        m = succ[i]
        while m:
            j = (m & -m).bit_length() - 1
            m &= m - 1
            indeg[j] += 1
    perm = [0] * n
    used = [False] * n
    for pos in range(n):
        for i in range(n):
            if not used[i] and indeg[i] == 0:
                used[i] = True
                perm[i] = pos
                m = succ[i]
                while m:
                    j = (m & -m).bit_length() - 1
                    m &= m - 1
                    indeg[j] -= 1
                break
        else:
            raise ValueError("relation contains a cycle")
    return perm


def reduce_rows(n: int, clos: list[int] | tuple[int, ...]) -> list[int]:
    """Hasse rows (same labels) of a strict transitively closed relation."""
    hasse = [0] * n
    for i in range(n):
        implied = 0
        m = clos[i]
        while m:
            j = (m & -m).bit_length() - 1
            m &= m - 1
            implied |= clos[j]
        hasse[i] = clos[i] & ~implied
    return hasse


def from_closure(n: int, clos: list[int] | tuple[int, ...], flags: int = 0) -> Poset:
    """Reduce a strict closed relation and re-index into stable Kahn order."""
    hasse = reduce_rows(n, clos)
    perm = _stable_topo_perm(n, hasse)
    rows = [0] * n
    for i in range(n):
        m = hasse[i]
        acc = 0
        while m:
            j = (m & -m).bit_length() - 1
            m &= m - 1
            acc |= 1 << perm[j]
        rows[perm[i]] = acc
    return Poset(n, tuple(rows), flags, validate=False)


def transitive_closure(p: Poset) -> Relation:
    rows = tuple(r | (1 << i) for i, r in enumerate(p.closure_rows()))
    return Relation(p.n, rows)


def hasse_reduce(r: Relation) -> Poset:
    """Minimal edge set generating r, topologically re-indexed."""
    n = r.n
    for i, row in enumerate(r.rows):
        if not (row >> i) & 1:
            raise ValueError("relation is not reflexive")
    strict = list(r.strict_rows())
    for i in range(n):
        m = strict[i]
        while m:
            j = (m & -m).bit_length() - 1
            m &= m - 1
            if (strict[j] >> i) & 1:
                raise ValueError("relation contains a cycle")
            if strict[j] & ~strict[i]:
                raise ValueError("relation is not transitive")
    return from_closure(n, strict)


def add_comparison(p: Poset, u: int, v: int) -> Poset:
    """The poset after learning u < v; u, v must be incomparable."""
    if u == v or p.comparable(u, v):
        raise ValueError(f"elements {u} and {v} are already comparable")
    clos = list(p.closure_rows())
    down = clos[v] | (1 << v)
    pred = p.pred_rows()
    anc = pred[u] | (1 << u)
    m = anc
    while m:
        x = (m & -m).bit_length() - 1
        m &= m - 1
        clos[x] |= down
    return from_closure(p.n, clos)


def dual(p: Poset) -> Poset:
    """Reverse every edge and re-topologize."""
    n = p.n
    rev = [0] * n
    for i, row in enumerate(p.hasse):
        m = row
        while m:
            j = (m & -m).bit_length() - 1
            m &= m - 1
            rev[j] |= 1 << i
    perm = _stable_topo_perm(n, rev)
    rows = [0] * n
    for i in range(n):
        m = rev[i]
        acc = 0
        while m:
            j = (m & -m).bit_length() - 1
            m &= m - 1
            acc |= 1 << perm[j]
        rows[perm[i]] = acc
    return Poset(n, tuple(rows), 0, validate=False)


def is_total_order(p: Poset) -> bool:
    return p.is_total_order()


def is_unordered(p: Poset) -> bool:
    return p.is_unordered()


def singletons(p: Poset) -> list[int]:
    return p.singletons()


def pairs(p: Poset) -> list[tuple[int, int]]:
    return p.pairs()

"""SL(2, q) as a densely indexed finite group.

Every element is an integer index into a table of matrices
``(a1, a2; a3, a4)`` listed in lexicographic order of the entry encodings.
All methods accept scalar indices or integer numpy arrays and broadcast.

Conjugacy classes are computed by brute-force orbit closure, so any
trace-based statement about them is checked against enumeration rather
than assumed.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .finite_field import FieldSpec, field_of_order

# Full |G| x |G| multiplication table only up to this q (336^2 entries at q=7).
MUL_TABLE_MAX_Q = 7
# Refuse to build groups with more elements than this.
MAX_ORDER = 2_200_000
# Dense matrix -> index lookup up to q^4 entries.
_DENSE_LOOKUP_MAX = 1 << 24


class GroupTooLarge(MemoryError):
    pass


@dataclass(frozen=True)
class ConjClass:
    id: int
    representative: int
    trace: int
    members: np.ndarray
    size: int

    def __repr__(self) -> str:
        return f"ConjClass(id={self.id}, trace={self.trace}, size={self.size})"


class SL2:
    """The group SL(2, q) over a given field.

    ``entries[i]`` holds the four field encodings of element ``i``.
    """

    def __init__(self, field: FieldSpec, *, mul_table: bool | None = None):
        q = field.q
        if q**3 - q > MAX_ORDER:
            raise GroupTooLarge(f"SL(2,{q}) has {q**3 - q} elements; budget is {MAX_ORDER}")
        self.field = field
        self.q = q
        self.entries = self._enumerate(field)
        self.entries.setflags(write=False)
        self.order = len(self.entries)
        self._build_lookup()
        e = self.entries
        self.identity = int(self.index_of(1, 0, 0, 1))
        neg1 = field.neg_table[1]
        self.neg_identity = int(self.index_of(neg1, 0, 0, neg1))
        inv_entries = (e[:, 3], field.neg_table[e[:, 1]], field.neg_table[e[:, 2]], e[:, 0])
        self.inv_table = self.index_of(*inv_entries)
        self.trace_table = field.add_table[e[:, 0], e[:, 3]]
        self.inv_table.setflags(write=False)
        self.trace_table.setflags(write=False)
        if mul_table is None:
            mul_table = q <= MUL_TABLE_MAX_Q
        self.mul_table: np.ndarray | None = None
        if mul_table:
            a, b = np.meshgrid(np.arange(self.order), np.arange(self.order), indexing="ij")
            self.mul_table = self._mul_direct(a, b).astype(np.int32)

    # -- construction ------------------------------------------------------

    @staticmethod
    def _enumerate(F: FieldSpec) -> np.ndarray:
        q = F.q
        add, mul, neg, inv = F.add_table, F.mul_table, F.neg_table, F.inv_table
        r = np.arange(q)
        # a1 != 0: a4 = (1 + a2 a3) / a1
        a1, a2, a3 = (x.ravel() for x in np.meshgrid(r[1:], r, r, indexing="ij"))
        a4 = mul[add[1, mul[a2, a3]], inv[a1]]
        part1 = np.stack([a1, a2, a3, a4], axis=1)
        # a1 == 0: a2 a3 = -1, a4 free
        a2, a4 = (x.ravel() for x in np.meshgrid(r[1:], r, indexing="ij"))
        a3 = neg[inv[a2]]
        part0 = np.stack([np.zeros_like(a2), a2, a3, a4], axis=1)
        allm = np.concatenate([part0, part1]).astype(np.int64)
        keys = ((allm[:, 0] * q + allm[:, 1]) * q + allm[:, 2]) * q + allm[:, 3]
        return allm[np.argsort(keys, kind="stable")]

    def _build_lookup(self) -> None:
        q, e = self.q, self.entries
        self._keys = ((e[:, 0] * q + e[:, 1]) * q + e[:, 2]) * q + e[:, 3]
        if q**4 <= _DENSE_LOOKUP_MAX:
            lut = np.full(q**4, -1, dtype=np.int64)
            lut[self._keys] = np.arange(self.order)
            self._lut = lut
        else:
            self._lut = None

    # -- element access ----------------------------------------------------

    def index_of(self, a1, a2, a3, a4):
        """Index of the matrix (a1 a2; a3 a4); -1 if the determinant is not 1."""
        q = self.q
        key = ((np.asarray(a1) * q + a2) * q + a3) * q + a4
        if self._lut is not None:
            return self._lut[key]
        pos = np.searchsorted(self._keys, key)
        pos = np.minimum(pos, self.order - 1)
        return np.where(self._keys[pos] == key, pos, -1)

    def matrix(self, x) -> tuple[int, int, int, int]:
        return tuple(int(v) for v in self.entries[x])

    def elements(self) -> np.ndarray:
        return np.arange(self.order)

    # -- group operations --------------------------------------------------

    def _mul_direct(self, x, y):
        F = self.field
        add, mul = F.add_table, F.mul_table
        a = self.entries[x]
        b = self.entries[y]
        a1, a2, a3, a4 = (a[..., i] for i in range(4))
        b1, b2, b3, b4 = (b[..., i] for i in range(4))
        c1 = add[mul[a1, b1], mul[a2, b3]]
        c2 = add[mul[a1, b2], mul[a2, b4]]
        c3 = add[mul[a3, b1], mul[a4, b3]]
        c4 = add[mul[a3, b2], mul[a4, b4]]
        return self.index_of(c1, c2, c3, c4)

    def mul(self, x, y):
        if self.mul_table is not None:
            return self.mul_table[x, y]
        out = self._mul_direct(x, y)
        return int(out) if np.ndim(out) == 0 else out

    def inv(self, x):
        return self.inv_table[x]

    def trace(self, x):
        return self.trace_table[x]

    def conj(self, u, x):
        """u^{-1} x u."""
        return self.mul(self.mul(self.inv(u), x), u)

    def prod(self, seq):
        """Left-to-right product of a sequence of indices (or index arrays)."""
        it = iter(seq)
        acc = next(it)
        for y in it:
            acc = self.mul(acc, y)
        return acc

    def right_mult_perm(self, z: int) -> np.ndarray:
        """Array ``x -> x z`` over all elements."""
        if self.mul_table is not None:
            return self.mul_table[:, z]
        return self._mul_direct(np.arange(self.order), np.full(self.order, z))

    def left_mult_perm(self, z: int) -> np.ndarray:
        """Array ``x -> z x`` over all elements."""
        if self.mul_table is not None:
            return self.mul_table[z, :]
        return self._mul_direct(np.full(self.order, z), np.arange(self.order))

    # -- conjugacy classes -------------------------------------------------

    @cached_property
    def classes(self) -> list[ConjClass]:
        """Conjugacy classes by orbit closure, sorted by (trace, size, min member)."""
        n = self.order
        assigned = np.zeros(n, dtype=bool)
        us = np.arange(n)
        uinv = self.inv(us)
        orbits = []
        while not assigned.all():
            x = int(np.argmin(assigned))
            xs = np.full(n, x)
            orbit = np.unique(self.mul(self.mul(uinv, xs), us))
            if assigned[orbit].any():
                raise AssertionError("conjugation orbits overlap; table is inconsistent")
            assigned[orbit] = True
            orbits.append(orbit)
        orbits.sort(key=lambda o: (int(self.trace_table[o[0]]), len(o), int(o[0])))
        out = []
        for cid, orbit in enumerate(orbits):
            orbit.setflags(write=False)
            out.append(ConjClass(cid, int(orbit[0]), int(self.trace_table[orbit[0]]), orbit, len(orbit)))
        return out

    @cached_property
    def class_id(self) -> np.ndarray:
        cid = np.empty(self.order, dtype=np.int64)
        for c in self.classes:
            cid[c.members] = c.id
        cid.setflags(write=False)
        return cid

    @cached_property
    def class_sizes(self) -> np.ndarray:
        return np.array([c.size for c in self.classes], dtype=np.int64)

    def class_of(self, x) -> ConjClass:
        return self.classes[int(self.class_id[x])]

    def is_central(self, x) -> bool:
        return x in (self.identity, self.neg_identity)

    def __repr__(self) -> str:
        return f"SL2(q={self.q}, order={self.order})"

    def with_table_entry(self, x: int, y: int, z: int) -> "SL2":
        """Uncached copy whose multiplication table sends (x, y) to z; for fault injection."""
        if self.mul_table is None:
            raise ValueError("fault injection needs a materialised multiplication table")
        bad = SL2(self.field)
        bad.mul_table = self.mul_table.copy()
        bad.mul_table[x, y] = z
        return bad


_GROUPS: dict[tuple, SL2] = {}


def sl2_build(field: FieldSpec | int) -> SL2:
    """SL(2, q) for a field (or prime power); cached per field."""
    if isinstance(field, int):
        field = field_of_order(field)
    if field.key not in _GROUPS:
        _GROUPS[field.key] = SL2(field)
    return _GROUPS[field.key]


def classes(table: SL2) -> list[ConjClass]:
    return table.classes


def class_census(G: SL2) -> dict:
    """Order and (id, trace, size) census, the payload of ``group-info``."""
    q = G.q
    sizes = G.class_sizes
    generic = {q * (q + 1), q * (q - 1)}
    nontrivial = [c for c in G.classes if c.size > 1]
    trace_fibers: dict[int, int] = {}
    for c in G.classes:
        trace_fibers[c.trace] = trace_fibers.get(c.trace, 0) + 1
    shared = sum(v for v in trace_fibers.values() if v > 1)
    return {
        "q": q,
        "p": G.field.p,
        "e": G.field.e,
        "modulus": list(G.field.modulus),
        "order": G.order,
        "num_classes": len(G.classes),
        "classes": [{"id": c.id, "trace": c.trace, "size": c.size, "representative": list(G.matrix(c.representative))}
                    for c in G.classes],
        "num_nongeneric_size": int(sum(1 for s in sizes if s not in generic)),
        "min_nontrivial_size": int(min(c.size for c in nontrivial)) if nontrivial else None,
        "num_trivial_classes": int(sum(1 for s in sizes if s == 1)),
        "traces_covered": len(trace_fibers),
        "classes_sharing_trace": int(shared),
    }

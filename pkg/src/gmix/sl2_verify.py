"""Trace, point-count and collision computations for SL(2, q).

Matrices with entries ``(a1, a2; a3, a4)`` are passed around as 4-tuples
of field encodings (scalars or numpy arrays).  Everything here is
enumeration: exact counts over the group or over F_q^3, with Monte-Carlo
fallbacks where noted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .dist import Carrier, Dist, MCEstimate, block_rngs, mc_mean, stat_dist_to_uniform
from .finite_field import FieldSpec
from .group import SL2, sl2_build

# -- trace of a conjugated product ------------------------------------------


def mat_entries(G: SL2, x) -> tuple[np.ndarray, ...]:
    e = G.entries[x]
    return tuple(e[..., i] for i in range(4))


def trace_expr(F: FieldSpec, a, g, u):
    """tr(a u g u^{-1}) from the closed form in the entries of a, g, u.

    ``a`` and ``g`` may be any 2x2 matrices (determinant is not used);
    ``u`` must have determinant 1.
    """
    a1, a2, a3, a4 = a
    g1, g2, g3, g4 = g
    u1, u2, u3, u4 = u
    add, mul, sub = F.add, F.mul, F.sub
    t1 = mul(add(mul(a1, u1), mul(a2, u3)), sub(mul(g1, u4), mul(g2, u3)))
    t2 = mul(add(mul(a1, u2), mul(a2, u4)), sub(mul(g3, u4), mul(g4, u3)))
    t3 = mul(add(mul(a3, u1), mul(a4, u3)), sub(mul(g2, u1), mul(g1, u2)))
    t4 = mul(add(mul(a3, u2), mul(a4, u4)), sub(mul(g4, u1), mul(g3, u2)))
    return add(add(t1, t2), add(t3, t4))


def trace_of_conjugated(G: SL2, a, g, u):
    """tr(a u g u^{-1}) for group elements, by the closed form."""
    return trace_expr(G.field, mat_entries(G, a), mat_entries(G, g), mat_entries(G, u))


def trace_direct(G: SL2, a, g, u):
    """tr(a u g u^{-1}) by multiplying matrices in the group."""
    return G.trace(G.mul(a, G.mul(u, G.mul(g, G.inv(u)))))


def f_second(F: FieldSpec, v: int, w: int, u):
    """The trace of (0,1;1,w) u (v,1;1,0) u^{-1} expanded in u1..u4."""
    u1, u2, u3, u4 = u
    add, mul, sub = F.add, F.mul, F.sub
    terms = [
        mul(mul(v, u3), u4), F.neg(mul(u3, u3)), mul(u4, u4), F.neg(mul(mul(v, u1), u2)),
        mul(u1, u1), F.neg(mul(mul(mul(v, w), u2), u3)), mul(mul(w, u1), u3),
        F.neg(mul(u2, u2)), F.neg(mul(mul(w, u2), u4)),
    ]
    acc = terms[0]
    for t in terms[1:]:
        acc = add(acc, t)
    return acc


@dataclass(frozen=True)
class TraceExperimentSpec:
    field: FieldSpec
    v: int
    w: int
    mode: str = "exact"
    n_samples: int = 10**6
    seed: int = 0

    def __post_init__(self):
        q = self.field.q
        if not (0 <= self.v < q and 0 <= self.w < q):
            raise ValueError("v, w must be field encodings")
        if self.mode not in ("exact", "mc"):
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def q(self) -> int:
        return self.field.q

    @property
    def exclusion(self) -> str | None:
        """Why (v, w) falls outside the equidistribution hypothesis, if it does."""
        F = self.field
        if F.p == 2:
            return None
        if self.v == 0 and self.w == 0:
            return "(v,w)=(0,0) in odd characteristic"
        m4 = F.from_int(-4)
        if F.square(self.v) == m4 and F.square(self.w) == m4:
            return "(v^2,w^2)=(-4,-4) in odd characteristic"
        return None

    @property
    def excluded(self) -> bool:
        return self.exclusion is not None

    def matrices(self):
        """A = (0,1;1,w) and B = (v,1;1,0), both of determinant -1."""
        return (0, 1, 1, self.w), (self.v, 1, 1, 0)


@dataclass(frozen=True)
class TraceDistribution:
    spec: TraceExperimentSpec
    counts: np.ndarray
    denom: int
    mode: str

    @property
    def probs(self) -> np.ndarray:
        return self.counts / self.denom

    @property
    def max_prob(self) -> float:
        return float(self.probs.max())

    @property
    def max_cell_scaled(self) -> float:
        """q times the largest cell probability."""
        return self.spec.q * self.max_prob

    @property
    def stat_dist(self) -> float:
        return 0.5 * float(np.abs(self.probs - 1.0 / self.spec.q).sum())

    @property
    def stat_dist_exact(self) -> Fraction:
        q = self.spec.q
        return Fraction(int(np.abs(self.counts.astype(object) * q - self.denom).sum()), 2 * q * self.denom)


def trace_dist(spec: TraceExperimentSpec, G: SL2 | None = None) -> TraceDistribution:
    """Law of tr(A u B u^{-1}) over uniform u in SL(2, q)."""
    G = G or sl2_build(spec.field)
    F = spec.field
    A, B = spec.matrices()
    if spec.mode == "exact":
        vals = trace_expr(F, A, B, mat_entries(G, np.arange(G.order)))
        return TraceDistribution(spec, np.bincount(vals, minlength=F.q), G.order, "exact")
    counts = np.zeros(F.q, dtype=np.int64)
    for rng, size in block_rngs(spec.seed, spec.n_samples):
        u = rng.integers(0, G.order, size)
        counts += np.bincount(trace_expr(F, A, B, mat_entries(G, u)), minlength=F.q)
    return TraceDistribution(spec, counts, spec.n_samples, "mc")


def trace_law(G: SL2, h: int, g: int) -> np.ndarray:
    """Counts over F_q of tr(h u g u^{-1}) for u ranging over G."""
    u = np.arange(G.order)
    vals = trace_direct(G, np.full(G.order, h), np.full(G.order, g), u)
    return np.bincount(vals, minlength=G.q)


def square_sum_law(F: FieldSpec, G: SL2) -> np.ndarray:
    """Counts over F_q of (u1 - u2 - u3 + u4)^2 for u in G."""
    u1, u2, u3, u4 = mat_entries(G, np.arange(G.order))
    s = F.add(F.sub(F.sub(u1, u2), u3), u4)
    return np.bincount(F.mul(s, s), minlength=F.q)


# -- class laws ---------------------------------------------------------------

def class_law(G: SL2, weights: np.ndarray) -> np.ndarray:
    """Push a weight vector over G forward to conjugacy-class ids."""
    return np.bincount(G.class_id, weights=weights, minlength=len(G.classes))


def trace_to_class_check(G: SL2, g: int, h: int) -> dict:
    """Trace distance and class-law distance of g C(h) against a uniform element."""
    n = G.order
    u = np.arange(n)
    prods = G.mul(np.full(n, g), G.conj(u, np.full(n, h)))
    counts = np.bincount(prods, minlength=n).astype(float) / n
    trace_p = np.bincount(G.trace_table, weights=counts, minlength=G.q)
    cls = class_law(G, counts)
    uni = G.class_sizes / n
    return {
        "trace_dist": 0.5 * float(np.abs(trace_p - 1.0 / G.q).sum()),
        "class_dist": 0.5 * float(np.abs(cls - uni).sum()),
    }


# -- point counts -------------------------------------------------------------

def quartic(F: FieldSpec, v: int, w: int, s: int, x, y, z):
    """The quartic f(x, y, z) obtained by clearing x^2 from the u1 != 0 trace equation."""
    add, mul, neg = F.add, F.mul, F.neg
    x2, y2, z2 = mul(x, x), mul(y, y), mul(z, z)
    two = F.from_int(2)
    base = [mul(x2, x2), neg(mul(x2, y2)), neg(mul(x2, z2)), mul(y2, z2), mul(two, mul(y, z)),
            np.ones_like(x2)]
    vpart = [neg(mul(mul(x2, x), y)), mul(x, z), mul(mul(x, y), z2)]
    wpart = [neg(mul(x, y)), neg(mul(mul(x, y2), z)), mul(mul(x2, x), z)]
    acc = base[0]
    for t in base[1:]:
        acc = add(acc, t)
    for t in vpart:
        acc = add(acc, mul(v, t))
    for t in wpart:
        acc = add(acc, mul(w, t))
    acc = add(acc, neg(mul(mul(mul(v, w), x2), mul(y, z))))
    return add(acc, mul(s, x2))


def exceptional_candidates(F: FieldSpec, v: int, w: int) -> set[int]:
    """s values for which the quartic may fail to be absolutely irreducible.

    0, v, w, v/w + w/v, and the roots in F_q of
    2s(v^2+w^2) - 4vw - s^2 vw - s v^2 w^2 + vw(v^2+w^2).
    If that polynomial in s vanishes identically, every s is a candidate.
    """
    add, mul, sub = F.add, F.mul, F.sub
    out = {0, v, w}
    if v and w:
        out.add(add(F.div(v, w), F.div(w, v)))
    v2, w2, vw = mul(v, v), mul(w, w), mul(v, w)
    c2 = F.neg(vw)
    c1 = sub(mul(F.from_int(2), add(v2, w2)), mul(v2, w2))
    c0 = add(F.neg(mul(F.from_int(4), vw)), mul(vw, add(v2, w2)))
    if c2 == 0 and c1 == 0 and c0 == 0:
        return set(range(F.q))
    for s in range(F.q):
        if add(add(mul(c2, mul(s, s)), mul(c1, s)), c0) == 0:
            out.add(s)
    return {int(x) for x in out}


def reducible_locus_candidates(F: FieldSpec, v: int, w: int) -> set[int]:
    """The candidate set plus the roots of s^2 + vw s - (v^2 + w^2 + 4).

    The extra roots are the s for which A and u B u^{-1} can share an
    eigenvector, which makes the quartic split over an extension.
    """
    out = set(exceptional_candidates(F, v, w))
    mul, add = F.mul, F.add
    vw = mul(v, w)
    c0 = F.neg(add(add(mul(v, v), mul(w, w)), F.from_int(4)))
    for s in range(F.q):
        if add(add(mul(s, s), mul(vw, s)), c0) == 0:
            out.add(s)
    return out


@dataclass
class PolyCountReport:
    q: int
    v: int
    w: int
    N_s: np.ndarray                 # roots of the quartic over F_q^3, per s
    x0_roots: int                   # roots with x = 0 (independent of s)
    trace_counts: np.ndarray        # #{u in G : u1 != 0, f'' = -s}, per s
    trace_counts_u1_zero: np.ndarray  # same with u1 = 0
    candidates: set[int]
    excluded: str | None = None
    deviation: np.ndarray = field(init=False)

    def __post_init__(self):
        self.deviation = np.abs(self.N_s - self.q**2)

    @property
    def reconciled(self) -> bool:
        return bool(np.array_equal(self.N_s - self.x0_roots, self.trace_counts))

    def normalized_deviation(self) -> np.ndarray:
        return self.deviation / self.q**1.5

    def exceptional(self, c2: float) -> set[int]:
        """s whose deviation exceeds c2 q^{3/2}."""
        return {int(s) for s in np.flatnonzero(self.deviation > c2 * self.q**1.5)}

    def unexplained(self, c2: float) -> set[int]:
        return self.exceptional(c2) - self.candidates

    def as_dict(self, c2: float | None = None) -> dict:
        out = {
            "q": self.q, "v": self.v, "w": self.w, "excluded": self.excluded,
            "N_s": self.N_s.tolist(), "x0_roots": self.x0_roots,
            "reconciled": self.reconciled, "candidates": sorted(self.candidates),
            "max_deviation_noncandidate": float(max(
                (self.deviation[s] for s in range(self.q) if s not in self.candidates), default=0)),
        }
        if c2 is not None:
            out["exceptional"] = sorted(self.exceptional(c2))
            out["unexplained"] = sorted(self.unexplained(c2))
        return out


def poly_count(spec: TraceExperimentSpec, G: SL2 | None = None) -> PolyCountReport:
    """Count roots of the quartic per s and reconcile them with the trace equation on G."""
    F = spec.field
    q = F.q
    G = G or sl2_build(F)
    v, w = spec.v, spec.w
    # route 1: solutions of f'' = -s on the group
    u = mat_entries(G, np.arange(G.order))
    neg_trace = F.neg(f_second(F, v, w, u))
    nz = u[0] != 0
    trace_counts = np.bincount(neg_trace[nz], minlength=q)
    trace_counts_0 = np.bincount(neg_trace[~nz], minlength=q)
    # route 2: the quartic over F_q^3, one s at a time
    x, y, z = (a.ravel() for a in np.meshgrid(np.arange(q), np.arange(q), np.arange(q), indexing="ij"))
    N_s = np.zeros(q, dtype=np.int64)
    x0 = None
    for s in range(q):
        roots = quartic(F, v, w, s, x, y, z) == 0
        N_s[s] = int(roots.sum())
        r0 = int(roots[x == 0].sum())
        if x0 is None:
            x0 = r0
        elif r0 != x0:
            raise AssertionError("x = 0 slice depends on s")
    return PolyCountReport(q, v, w, N_s, int(x0), trace_counts, trace_counts_0,
                           exceptional_candidates(F, v, w), spec.exclusion)


# -- class products and the collision statistic -----------------------------

@lru_cache(maxsize=None)
def _structure_constants_cached(key) -> np.ndarray:
    G = sl2_build(_FIELDS[key])
    return _structure_constants(G)


_FIELDS: dict = {}


def _structure_constants(G: SL2) -> np.ndarray:
    """a[i, j, k] = #{x in C_i : x^{-1} c_k in C_j} for class reps c_k.

    Equivalently the number of pairs (x, y) in C_i x C_j with xy = c for any
    fixed c in C_k.
    """
    cls = G.classes
    r = len(cls)
    out = np.zeros((r, r, r), dtype=np.int64)
    cid = G.class_id
    for kk, ck in enumerate(cls):
        for i, ci in enumerate(cls):
            xinv = G.inv(ci.members)
            y = G.mul(xinv, np.full(len(xinv), ck.representative))
            out[i, :, kk] = np.bincount(cid[y], minlength=r)
    return out


def structure_constants(G: SL2) -> np.ndarray:
    if G is not sl2_build(G.field):
        return _structure_constants(G)
    _FIELDS[G.field.key] = G.field
    return _structure_constants_cached(G.field.key)


def class_product_counts(G: SL2, g: int, h: int) -> tuple[np.ndarray, int]:
    """Counts over G (and denominator) of C(g) C(h)."""
    a = structure_constants(G)
    i, j = int(G.class_id[g]), int(G.class_id[h])
    per_class = a[i, j, :]
    return per_class[G.class_id], int(G.class_sizes[i] * G.class_sizes[j])


def class_product_dist(G: SL2, g: int, h: int) -> Dist:
    counts, denom = class_product_counts(G, g, h)
    return Dist(Carrier(G, 1), counts=counts, denom=denom)


def class_product_report(G: SL2, g: int, h: int) -> dict:
    """Distance of C(g) C(h) to uniform and max_S Pr[g C(h) in S] over classes S."""
    d = class_product_dist(G, g, h)
    members = G.class_of(h).members
    prods = G.mul(np.full(len(members), g), members)
    per_class = np.bincount(G.class_id[prods], minlength=len(G.classes)) / len(members)
    return {
        "g": int(g), "h": int(h),
        "stat_dist_to_uniform": stat_dist_to_uniform(d),
        "max_class_prob": float(per_class.max()),
        "q_times_max_class_prob": G.q * float(per_class.max()),
    }


def _pair_class_counts(G: SL2, a: int) -> np.ndarray:
    """N[i, j] = #{b : class(a b^{-1}) = i, class(b) = j}."""
    b = np.arange(G.order)
    ab = G.mul(np.full(G.order, a), G.inv(b))
    r = len(G.classes)
    return np.bincount(G.class_id[ab] * r + G.class_id[b], minlength=r * r).reshape(r, r)


def mixture_class_counts(G: SL2, a: int) -> list[int]:
    """|G|^3 M_a(c) for c in each class, M_a = law of C(a b^{-1}) C(b), b uniform."""
    n = G.order
    st = structure_constants(G)
    cent = [n // s for s in G.class_sizes.tolist()]
    N = _pair_class_counts(G, a)
    r = len(G.classes)
    out = [0] * r
    for i in range(r):
        for j in range(r):
            if N[i, j]:
                f = int(N[i, j]) * cent[i] * cent[j]
                col = st[i, j]
                for k in range(r):
                    out[k] += f * int(col[k])
    return out


@dataclass(frozen=True)
class CollisionValue:
    lhs: float
    lhs_exact: Fraction | None
    gamma: float
    mode: str
    stderr: float = 0.0
    n_samples: int | None = None
    seed: int | None = None

    def as_dict(self) -> dict:
        d = {"lhs": self.lhs, "gamma": self.gamma, "mode": self.mode}
        if self.lhs_exact is not None:
            d["lhs_exact"] = str(self.lhs_exact)
        if self.mode == "mc":
            d.update(stderr=self.stderr, gamma_stderr=self.stderr * self._n, n_samples=self.n_samples, seed=self.seed)
        return d

    @property
    def _n(self) -> float:
        return (1 + self.gamma) / self.lhs if self.lhs else 0.0


def collision_lhs_exact(G: SL2, a: int) -> Fraction:
    """E_{b,b'} P[C(ab^{-1})C(b) = C(ab'^{-1})C(b')] as a fraction."""
    n = G.order
    M = mixture_class_counts(G, a)
    total = sum(int(s) * m * m for s, m in zip(G.class_sizes.tolist(), M))
    return Fraction(total, n**6)


def _collision_sampler(G: SL2, a: int | None):
    n = G.order

    def sampler(rng, size):
        aa = rng.integers(0, n, size) if a is None else np.full(size, a)
        b, b2, u1, u2, u3, u4 = (rng.integers(0, n, size) for _ in range(6))
        left = G.mul(G.conj(u1, G.mul(aa, G.inv(b))), G.conj(u2, b))
        right = G.mul(G.conj(u3, G.mul(aa, G.inv(b2))), G.conj(u4, b2))
        return (left == right).astype(np.float64)

    return sampler


def collision_lhs(G: SL2, a: int, *, mode: str = "exact", n_samples: int = 10**7, seed: int = 0) -> CollisionValue:
    """Collision statistic for a fixed a, with gamma = |G| LHS - 1."""
    n = G.order
    if mode == "exact":
        v = collision_lhs_exact(G, a)
        return CollisionValue(float(v), v, float(n * v - 1), "exact")
    est = mc_mean(_collision_sampler(G, a), n_samples, seed)
    return CollisionValue(est.mean, None, n * est.mean - 1, "mc", est.stderr, n_samples, seed)


def collision_gamma(G: SL2, *, mode: str = "exact", n_samples: int = 10**7, seed: int = 0) -> CollisionValue:
    """a-averaged statistic: E_a LHS(a) and gamma = |G| E_a LHS(a) - 1.

    LHS is a class function of a, so the exact route evaluates one
    representative per class.
    """
    n = G.order
    if mode == "exact":
        v = sum((Fraction(c.size, n) * collision_lhs_exact(G, c.representative) for c in G.classes), Fraction(0))
        return CollisionValue(float(v), v, float(n * v - 1), "exact")
    est = mc_mean(_collision_sampler(G, None), n_samples, seed)
    return CollisionValue(est.mean, None, n * est.mean - 1, "mc", est.stderr, n_samples, seed)


def collision_per_class(G: SL2) -> list[dict]:
    out = []
    for c in G.classes:
        v = collision_lhs_exact(G, c.representative)
        out.append({"class": c.id, "trace": c.trace, "size": c.size, "lhs": float(v),
                    "gamma": float(G.order * v - 1)})
    return out


# -- the reduction chain on G^2 x G^2 ----------------------------------------

@dataclass
class ReductionCheck:
    q: int
    checks: dict[str, bool]
    values: dict

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def _gamma_matrix(G: SL2) -> np.ndarray:
    """Gamma[x, y] = 1 iff x1 y1 x2 y2 = 1 on G^2 x G^2."""
    n = G.order
    idx = np.arange(n * n)
    x1, x2 = idx // n, idx % n
    left = G.mul(np.arange(n)[:, None], np.arange(n)[None, :])  # x1 y1, indexed [x1, y1]
    # x1 y1 x2 y2 = 1  <=>  y2 = (x1 y1 x2)^{-1}
    gam = np.zeros((n * n, n * n), dtype=np.int64)
    for y1 in range(n):
        t = G.mul(left[x1, y1], x2)
        y2 = G.inv(t)
        gam[idx, y1 * n + y2] = 1
    return gam


def _square_sum(M: np.ndarray) -> int:
    """sum over (x, x') of (M M^T)[x, x']^2 with exact integers."""
    P = M @ M.T
    return sum(v * v for v in P.ravel().tolist())


def _conj_pair_count(G: SL2, x1: int, x1p: int, target: int) -> int:
    """sum over z1 of #{(u,u'): C_u(x1'^{-1} z1) C_u'(z1^{-1} x1) = target} by direct conjugation."""
    n = G.order
    u = np.arange(n)
    total = 0
    for z1 in range(n):
        p = G.mul(G.inv(x1p), z1)
        r = G.mul(G.inv(z1), x1)
        cp = G.conj(u, np.full(n, p))
        cr = G.conj(u, np.full(n, r))
        prods = G.mul(cp[:, None], cr[None, :])
        total += int((prods == target).sum())
    return total


def reduction_identity_check(G: SL2 | None = None, *, n_pairs: int = 100, seed: int = 0) -> ReductionCheck:
    """Verify the chain from the incidence matrix of a.b = 1 down to the collision statistic.

    With N = |G|^2 and C = Gamma Gamma^T (so Delta = C / N):
      rows:     every row and column sum of C equals N;
      centred:  (n Gamma - J)(n Gamma - J)^T = N (C - J), i.e. g = Delta - 1/N;
      balanced: S(C - J) = S(C) - N^4 with S(M) = sum (M M^T)^2;
      classes:  (C C^T)[x, x'] = T(x, x'), the count of (z1, u, u') with
                C(x1'^{-1} z1) C(z1^{-1} x1) = x2' x2^{-1}, for all pairs via
                class tables and for sampled pairs by direct conjugation;
      final:    S(C) n^8 = (1 + gamma) N^8 with gamma the a-averaged statistic.
    """
    G = G or sl2_build(3)
    n = G.order
    N = n * n
    gam = _gamma_matrix(G)
    C = gam @ gam.T
    J = np.ones_like(C)
    checks: dict[str, bool] = {}
    values: dict = {}
    checks["gamma_row_sums"] = bool((gam.sum(axis=1) == n).all() and (gam.sum(axis=0) == n).all())
    checks["delta_row_sums"] = bool((C.sum(axis=1) == N).all() and (C.sum(axis=0) == N).all())
    centred = n * gam - 1
    checks["centred_square"] = bool(np.array_equal(centred @ centred.T, N * (C - J)))
    S_C = _square_sum(C)
    S_CJ = _square_sum(C - J)
    checks["balanced_box_identity"] = S_CJ == S_C - N**4
    values.update(S_C=str(S_C), S_C_minus_J=str(S_CJ), N4=str(N**4))

    # class-table route for T(x, x')
    st = structure_constants(G)
    cent = np.array([n // s for s in G.class_sizes.tolist()], dtype=np.int64)
    cid = G.class_id
    # W[i, j, c] = #{(u, u') : C_u(p) C_u'(r) = c} for p in class i, r in class j
    W = st[:, :, cid] * cent[:, None, None] * cent[None, :, None]
    z = np.arange(n)
    K = np.zeros((n, n, n), dtype=np.int64)  # K[x1, x1', c]
    for x1 in range(n):
        r_cls = cid[G.mul(G.inv(z), np.full(n, x1))]
        for x1p in range(n):
            p_cls = cid[G.mul(np.full(n, G.inv(x1p)), z)]
            K[x1, x1p] = W[p_cls, r_cls].sum(axis=0)
    idx = np.arange(N)
    x1, x2 = idx // n, idx % n
    c = G.mul(x2[None, :], G.inv(x2)[:, None])  # c[x, x'] = x2' x2^{-1}
    T = K[x1[:, None], x1[None, :], c]
    CC = C @ C.T
    checks["class_identity_all_pairs"] = bool(np.array_equal(CC, T))
    rng = np.random.default_rng(seed)
    pairs = rng.integers(0, N, size=(n_pairs, 2))
    direct_ok = True
    for xa, xb in pairs:
        t = _conj_pair_count(G, int(xa // n), int(xb // n), int(G.mul(xb % n, G.inv(xa % n))))
        direct_ok &= t == int(CC[xa, xb])
    checks["class_identity_sampled_direct"] = bool(direct_ok)
    values["n_pairs"] = n_pairs

    gamma = collision_gamma(G)
    lhs_sum = S_C * n**8
    rhs = n * gamma.lhs_exact * N**8
    checks["box_norm_equals_collision"] = Fraction(lhs_sum) == rhs
    checks["box_norm_bound"] = Fraction(lhs_sum) <= rhs
    values.update(gamma=str(n * gamma.lhs_exact - 1), gamma_float=gamma.gamma,
                  delta_box4=float(Fraction(S_C, N**8)), bound=float(n * gamma.lhs_exact / Fraction(n) ** 8))
    return ReductionCheck(G.q, checks, values)

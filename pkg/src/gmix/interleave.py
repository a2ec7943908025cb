"""Interleaved products, the s-tuple and mu laws, box norms and NOF protocols.

Tuples of group elements ``x in G^t`` are indexed by the mixed-radix
``Carrier(G, t)`` codec.  A k-party input is a k x t matrix; party i holds
row ``x_i`` on its forehead, and the interleaved product multiplies the
matrix in column order.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dist import BudgetExceeded, Carrier, Dist, SubsetIndicator, dist_convolve, mc_estimate
from .group import SL2

# Largest product count enumerated by exact routines.
EXACT_BUDGET = 10**8
# Largest carrier materialised as a dense vector.
MAX_CELLS = 1 << 24


# -- interleaved products ---------------------------------------------------

def interleaved2(G: SL2, a: Sequence[int], b: Sequence[int]) -> int:
    """a_1 b_1 a_2 b_2 ... a_t b_t."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    acc = G.identity
    for x, y in zip(a, b):
        acc = G.mul(G.mul(acc, int(x)), int(y))
    return int(acc)


def interleavedK(G: SL2, x) -> int | np.ndarray:
    """Column-order product of a k x t matrix (or a batch of shape (..., k, t))."""
    x = np.asarray(x, dtype=np.int64)
    if x.ndim < 2:
        raise ValueError("expected a k x t matrix")
    k, t = x.shape[-2:]
    acc = np.full(x.shape[:-2], G.identity, dtype=np.int64)
    for j in range(t):
        for i in range(k):
            acc = np.asarray(G.mul(acc, x[..., i, j]), dtype=np.int64)
    return int(acc) if acc.ndim == 0 else acc


def interleaved_pairs(G: SL2, ta: np.ndarray, tb: np.ndarray) -> np.ndarray:
    """a . b for index arrays of tuples (shape (N, t) each, broadcastable)."""
    t = ta.shape[-1]
    acc = np.full(np.broadcast_shapes(ta.shape[:-1], tb.shape[:-1]), G.identity, dtype=np.int64)
    for j in range(t):
        acc = np.asarray(G.mul(G.mul(acc, ta[..., j]), tb[..., j]), dtype=np.int64)
    return acc


def dist_interleaved2(A: SubsetIndicator, B: SubsetIndicator, mode: str = "exact", *,
                      n_samples: int = 10**6, seed: int = 0,
                      budget: int = EXACT_BUDGET) -> Dist:
    """Law of a . b with a, b uniform on A and B."""
    if not A.carrier.same_as(B.carrier):
        raise ValueError("A and B must live on the same G^t")
    G = A.carrier.group
    out = Carrier(G, 1)
    ma, mb = A.members(), B.members()
    if mode == "exact":
        if len(ma) * len(mb) > budget:
            raise BudgetExceeded(f"{len(ma)}*{len(mb)} pairs exceed {budget}")
        ta = A.carrier.decode(ma)
        tb = B.carrier.decode(mb)
        counts = np.zeros(G.order, dtype=np.int64)
        chunk = max(1, (1 << 22) // max(len(mb), 1))
        for s in range(0, len(ma), chunk):
            prods = interleaved_pairs(G, ta[s:s + chunk, None, :], tb[None, :, :])
            counts += np.bincount(prods.ravel(), minlength=G.order)
        return Dist(out, counts=counts, denom=len(ma) * len(mb))
    if mode != "mc":
        raise ValueError(f"unknown mode {mode!r}")

    def sampler(rng, size):
        a = A.carrier.decode(ma[rng.integers(0, len(ma), size)])
        b = B.carrier.decode(mb[rng.integers(0, len(mb), size)])
        return interleaved_pairs(G, a, b)

    return mc_estimate(out, sampler, n_samples, seed)


# -- s-tuples and the mu law -----------------------------------------------

def eps_vectors(k: int) -> list[tuple[int, ...]]:
    """All eps in {0,1}^k; position c has eps_i = bit (k-1-i) of c."""
    return [tuple((c >> (k - 1 - i)) & 1 for i in range(k)) for c in range(1 << k)]


def _factor_masks(k: int, coords: Sequence[int]) -> list[np.ndarray]:
    """For each (i, bit) the boolean mask over ``coords`` of eps with eps_i == bit.

    The s-tuple is the ordered product over i of the commuting pair of
    factors that place u_i^0 on {eps_i = 0} and u_i^1 on {eps_i = 1}.
    """
    eps = eps_vectors(k)
    masks = []
    for i in range(k):
        for bit in (0, 1):
            masks.append(np.array([eps[c][i] == bit for c in coords]))
    return masks


def _diag_factor(G: SL2, mask: np.ndarray) -> np.ndarray:
    """Counts of the tuple with u on ``mask`` coordinates and 1 elsewhere, u uniform."""
    m = len(mask)
    n = G.order
    c = np.zeros((n,) * m, dtype=np.int64)
    idx = tuple(np.arange(n) if on else np.full(n, G.identity) for on in mask)
    c[idx] = 1
    return c.ravel()


def s_tuple_factors(G: SL2, k: int, t: int = 1, coords: Sequence[int] | None = None) -> list[Dist]:
    """Ordered factors whose convolution is the mu law (restricted to ``coords``)."""
    m = 1 << k
    coords = list(range(m)) if coords is None else list(coords)
    carrier = Carrier(G, len(coords))
    if carrier.size > MAX_CELLS:
        raise BudgetExceeded(f"{carrier!r} has {carrier.size} cells")
    base = []
    for mask in _factor_masks(k, coords):
        if mask.any():
            base.append(Dist(carrier, counts=_diag_factor(G, mask), denom=G.order, validate=False))
    return base * t


def _chain(factors: list[Dist]) -> Dist:
    acc = factors[0]
    for f in factors[1:]:
        acc = dist_convolve(acc, f)
    return acc


def s_tuple_dist(G: SL2, k: int) -> Dist:
    """Exact law of s(eps) = u_1^{eps_1} ... u_k^{eps_k} over G^{2^k}."""
    return _chain(s_tuple_factors(G, k, 1))


def s_tuple_marginal(G: SL2, k: int, coords: Sequence[int], t: int = 1) -> Dist:
    """Exact law of the mu tuple (t factors) restricted to increasing ``coords``."""
    coords = list(coords)
    if coords != sorted(set(coords)) or coords[0] < 0 or coords[-1] >= 1 << k:
        raise ValueError(f"bad coordinates {coords}")
    return _chain(s_tuple_factors(G, k, t, coords))


def mu_tuple_dist(G: SL2, k: int, t: int) -> Dist:
    """Exact law of (x_1^{eps_1} . ... . x_k^{eps_k})_eps for uniform x's in G^t."""
    if t < 1:
        raise ValueError("t must be positive")
    return _chain(s_tuple_factors(G, k, t))


def mu_tuple_samples(G: SL2, k: int, t: int, rng: np.random.Generator, size: int) -> np.ndarray:
    """Sampled mu tuples, shape (size, 2^k), straight from the definition."""
    n = G.order
    x = rng.integers(0, n, size=(size, k, 2, t))
    out = np.empty((size, 1 << k), dtype=np.int64)
    for c, eps in enumerate(eps_vectors(k)):
        rows = np.stack([x[:, i, eps[i], :] for i in range(k)], axis=1)
        out[:, c] = interleavedK(G, rows)
    return out


def mu_tuple_mc(G: SL2, k: int, t: int, n_samples: int, seed: int) -> Dist:
    carrier = Carrier(G, 1 << k)
    if carrier.size > MAX_CELLS:
        raise BudgetExceeded(f"{carrier!r} is too large for a dense empirical law")
    shape = carrier.shape

    def sampler(rng, size):
        s = mu_tuple_samples(G, k, t, rng, size)
        return np.ravel_multi_index(tuple(s.T), shape)

    return mc_estimate(carrier, sampler, n_samples, seed)


# -- box norm ---------------------------------------------------------------

@dataclass(frozen=True)
class BoxNorm:
    value: float
    power: float
    k: int
    mode: str
    stderr: float = 0.0
    n_samples: int | None = None
    seed: int | None = None


def _box_power_exact(f: np.ndarray) -> float:
    """E over the 2^k cube of the product of f; recursion on the last axis."""
    k = f.ndim
    if k == 1:
        return float(f.mean()) ** 2
    if k == 2:
        g = (f.T @ f) / f.shape[0]
        return float(np.mean(g * g))
    n_last = f.shape[-1]
    total = 0.0
    for y in range(n_last):
        fy = f[..., y]
        for y2 in range(y, n_last):
            v = _box_power_exact(fy * f[..., y2])
            total += v if y == y2 else 2 * v
    return total / n_last**2


def box_power_cost(shape: Sequence[int]) -> int:
    shape = tuple(shape)
    if len(shape) <= 1:
        return int(np.prod(shape))
    if len(shape) == 2:
        return shape[0] * shape[1] * min(shape)
    return shape[-1] ** 2 // 2 * box_power_cost(shape[:-1])


def box_norm(f, *, mode: str = "auto", n_samples: int = 10**6, seed: int = 0,
             budget: int = EXACT_BUDGET, rtol: float = 1e-9) -> BoxNorm:
    """Box norm of a real table f on X_1 x ... x X_k."""
    f = np.asarray(f, dtype=np.float64)
    k = f.ndim
    if k < 1:
        raise ValueError("need at least one axis")
    if mode == "auto":
        mode = "exact" if box_power_cost(f.shape) <= budget else "mc"
    if mode == "exact":
        p = _box_power_exact(f)
        scale = float(np.abs(f).max()) ** (1 << k) if f.size else 0.0
        if p < -rtol * max(scale, 1e-300):
            raise ArithmeticError(f"negative box-norm power {p!r}")
        p = max(p, 0.0)
        return BoxNorm(p ** (1.0 / (1 << k)), p, k, "exact")
    if mode != "mc":
        raise ValueError(f"unknown mode {mode!r}")
    from .dist import mc_mean

    eps = eps_vectors(k)

    def sampler(rng, size):
        pts = [rng.integers(0, f.shape[i], size=(2, size)) for i in range(k)]
        prod = np.ones(size)
        for e in eps:
            prod *= f[tuple(pts[i][e[i]] for i in range(k))]
        return prod

    est = mc_mean(sampler, n_samples, seed)
    p = max(est.mean, 0.0)
    return BoxNorm(p ** (1.0 / (1 << k)), est.mean, k, "mc", est.stderr, n_samples, seed)


# -- protocols --------------------------------------------------------------

class ProtocolError(ValueError):
    pass


@dataclass(eq=False)
class Protocol:
    """A deterministic k-party NOF protocol given by its leaves.

    Each leaf is a cylinder intersection: ``tables[i]`` is a 0/1 table over
    every axis except i (what party i sees).  For k = 2 these are
    rectangles S x T with ``tables = (T, S)``.  The protocol outputs the
    leaf's bit on the leaf's inputs.  Leaves must partition the input space.
    """

    k: int
    axis_size: int
    leaves: list[tuple[np.ndarray, ...]]
    outputs: list[int]
    bits: int | None = None
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        if len(self.leaves) != len(self.outputs):
            raise ProtocolError("one output per leaf")
        shape = (self.axis_size,) * (self.k - 1)
        self.leaves = [tuple(np.asarray(tb, dtype=bool).reshape(shape) for tb in leaf) for leaf in self.leaves]
        for leaf in self.leaves:
            if len(leaf) != self.k:
                raise ProtocolError(f"leaf needs {self.k} tables")
        self.outputs = [int(o) for o in self.outputs]
        if any(o not in (0, 1) for o in self.outputs):
            raise ProtocolError("outputs must be bits")
        if self.validate:
            self.check_partition()

    @property
    def num_leaves(self) -> int:
        return len(self.leaves)

    @property
    def space_size(self) -> int:
        return self.axis_size**self.k

    def leaf_indicator(self, j: int, xs: Sequence[np.ndarray] | None = None) -> np.ndarray:
        """Leaf j's indicator on the full grid, or on index arrays ``xs``."""
        leaf = self.leaves[j]
        if xs is None:
            out = np.ones((self.axis_size,) * self.k, dtype=bool)
            for i, tb in enumerate(leaf):
                out &= np.expand_dims(tb, axis=i)
            return out
        out = np.ones(np.shape(xs[0]), dtype=bool)
        for i, tb in enumerate(leaf):
            out &= tb[tuple(xs[a] for a in range(self.k) if a != i)]
        return out

    def check_partition(self, max_cells: int = 10**7, n_probe: int = 200_000) -> None:
        if self.space_size <= max_cells:
            cover = sum(self.leaf_indicator(j).astype(np.int32) for j in range(self.num_leaves))
            bad = np.flatnonzero(np.asarray(cover).ravel() != 1)
        else:
            rng = np.random.default_rng(0)
            xs = [rng.integers(0, self.axis_size, n_probe) for _ in range(self.k)]
            cover = sum(self.leaf_indicator(j, xs).astype(np.int32) for j in range(self.num_leaves))
            bad = np.flatnonzero(cover != 1)
        if len(bad):
            raise ProtocolError(f"leaves do not partition the input space ({len(bad)} bad cells)")

    def evaluate(self, xs: Sequence[np.ndarray] | None = None) -> np.ndarray:
        out = None
        for j, o in enumerate(self.outputs):
            ind = self.leaf_indicator(j, xs)
            if out is None:
                out = np.zeros(ind.shape, dtype=np.int8)
            if o:
                out |= ind
        return out

    # serialisation
    def to_json(self) -> dict:
        return {
            "k": self.k,
            "axis_size": self.axis_size,
            "bits": self.bits,
            "leaves": [{"output": o, "tables": [np.flatnonzero(tb.ravel()).tolist() for tb in leaf]}
                       for leaf, o in zip(self.leaves, self.outputs)],
        }

    @classmethod
    def from_json(cls, obj: dict | str) -> "Protocol":
        """Load from a dict or JSON text.

        Leaves list ``tables`` (k member lists, or 0/1 ``bitsets``); for
        k = 2 a leaf may instead give ``rectangle: [S, T]``.
        """
        if isinstance(obj, str):
            obj = json.loads(obj)
        k = int(obj["k"])
        size = int(obj["axis_size"])
        cells = size ** (k - 1)
        leaves, outputs = [], []
        for n, leaf in enumerate(obj["leaves"]):
            if "rectangle" in leaf:
                if k != 2:
                    raise ProtocolError(f"leaf {n}: rectangles need k = 2")
                S, T = leaf["rectangle"]
                raw = [T, S]
            elif "bitsets" in leaf:
                raw = [np.flatnonzero(np.asarray(b, dtype=bool)) for b in leaf["bitsets"]]
            else:
                raw = leaf["tables"]
            tabs = []
            for members in raw:
                tb = np.zeros(cells, dtype=bool)
                members = np.asarray(members, dtype=np.int64)
                if len(members) and (members.min() < 0 or members.max() >= cells):
                    raise ProtocolError(f"leaf {n}: member index out of range")
                tb[members] = True
                tabs.append(tb)
            leaves.append(tuple(tabs))
            outputs.append(leaf.get("output", 0))
        return cls(k, size, leaves, outputs, bits=obj.get("bits"))


def constant_protocol(k: int, axis_size: int, output: int = 1) -> Protocol:
    full = tuple(np.ones((axis_size,) * (k - 1), dtype=bool) for _ in range(k))
    return Protocol(k, axis_size, [full], [output], bits=0)


def product_protocol(A: np.ndarray, B: np.ndarray) -> Protocol:
    """Two-party P(a, b) = A(a) B(b) as four rectangles."""
    A = np.asarray(A, dtype=bool)
    B = np.asarray(B, dtype=bool)
    if A.shape != B.shape or A.ndim != 1:
        raise ProtocolError("A and B must be indicator vectors over the same axis")
    leaves, outputs = [], []
    for sa in (A, ~A):
        for sb in (B, ~B):
            leaves.append((sb, sa))
            outputs.append(int(sa is A and sb is B))
    return Protocol(2, len(A), leaves, outputs, bits=2)


def random_protocol(k: int, axis_size: int, bits: int, rng: np.random.Generator,
                    balance: float = 0.5) -> Protocol:
    """Random ``bits``-round protocol tree; party (round mod k) speaks each round.

    A speaker sends one bit that is a random function of what it sees, so
    every leaf is a cylinder intersection and leaves partition the space.
    """
    shape = (axis_size,) * (k - 1)
    leaves = [tuple(np.ones(shape, dtype=bool) for _ in range(k))]
    for r in range(bits):
        i = r % k
        nxt = []
        for leaf in leaves:
            msg = rng.random(shape) < balance
            for val in (msg, ~msg):
                tabs = list(leaf)
                tabs[i] = tabs[i] & val
                nxt.append(tuple(tabs))
        leaves = nxt
    outputs = rng.integers(0, 2, len(leaves)).tolist()
    return Protocol(k, axis_size, leaves, outputs, bits=bits)


# -- conditioned inputs and discrepancy -------------------------------------

def sample_conditioned(G: SL2, k: int, t: int, g: int, rng: np.random.Generator, size: int) -> np.ndarray:
    """Uniform k x t inputs whose interleaved product is g, shape (size, k, t).

    All entries but the last (in column order) are uniform; the last is
    prefix^{-1} g, which gives the exact conditional law.
    """
    x = rng.integers(0, G.order, size=(size, k, t))
    return complete_last(G, x, g)


def complete_last(G: SL2, x: np.ndarray, g: int) -> np.ndarray:
    """Overwrite entry (k-1, t-1) so the interleaved product is g."""
    x = np.array(x, dtype=np.int64, copy=True)
    k, t = x.shape[-2:]
    x[..., k - 1, t - 1] = G.identity
    prefix = interleavedK(G, x)
    x[..., k - 1, t - 1] = G.mul(G.inv(prefix), g)
    return x


def conditioned_enumeration(G: SL2, k: int, t: int, g: int) -> np.ndarray:
    """Every input with product g, shape (n^{kt-1}, k, t)."""
    free = k * t - 1
    n = G.order
    if n**free > EXACT_BUDGET // 10:
        raise BudgetExceeded("too many conditioned inputs to enumerate")
    grid = np.stack(np.unravel_index(np.arange(n**free), (n,) * free), axis=1) if free else np.zeros((1, 0), int)
    x = np.zeros((len(grid), k * t), dtype=np.int64)
    # column-order positions: entry (i, j) sits at j*k + i
    x[:, :free] = grid
    mat = x.reshape(-1, t, k).transpose(0, 2, 1)
    return complete_last(G, mat, g)


def input_axes(G: SL2, x: np.ndarray) -> list[np.ndarray]:
    """Per-party G^t indices of inputs shaped (..., k, t)."""
    carrier = Carrier(G, x.shape[-1])
    return [np.ravel_multi_index(tuple(np.moveaxis(x[..., i, :], -1, 0)), carrier.shape)
            for i in range(x.shape[-2])]


def product_grid(G: SL2, k: int, t: int) -> np.ndarray:
    """Interleaved product on the full input grid, shape (n^t,)*k."""
    n = G.order
    size = n**t
    if size**k > EXACT_BUDGET // 4:
        raise BudgetExceeded(f"input space of {size**k} points")
    rows = Carrier(G, t).decode(np.arange(size))
    acc = np.full((1,) * k, G.identity, dtype=np.int64)
    for j in range(t):
        for i in range(k):
            shape = [1] * k
            shape[i] = size
            acc = np.asarray(G.mul(acc, rows[:, j].reshape(shape)), dtype=np.int64)
    return np.broadcast_to(acc, (size,) * k)


@dataclass(frozen=True)
class Discrepancy:
    g: int
    h: int
    p_g: float
    p_h: float
    discrepancy: float
    stderr: float
    box_norm_d: float
    box_norm_mode: str
    leaves: int
    bound: float
    mode: str

    @property
    def within_bound(self) -> bool:
        return self.discrepancy <= self.bound * (1 + 1e-9) + 3 * self.stderr


def d_table(products: np.ndarray, g: int, h: int) -> np.ndarray:
    """+1 where the product is g, -1 where it is h, 0 elsewhere."""
    return (products == g).astype(np.float64) - (products == h).astype(np.float64)


def protocol_discrepancy(G: SL2, proto: Protocol, t: int, g: int, h: int, *, mode: str = "auto",
                         n_samples: int = 10**6, seed: int = 0, box_mode: str = "auto",
                         products: np.ndarray | None = None, box: BoxNorm | None = None) -> Discrepancy:
    """|p_g - p_h| for ``proto`` and the box-norm bound 0.5 n L ||d||, L = #leaves."""
    k = proto.k
    n = G.order
    if proto.axis_size != n**t:
        raise ProtocolError("protocol axis size does not match G^t")
    if mode == "auto":
        mode = "exact" if proto.space_size <= EXACT_BUDGET // 4 else "mc"
    if mode == "exact":
        prods = product_grid(G, k, t) if products is None else products
        out = proto.evaluate().astype(np.int64)
        per = n ** (k * t - 1)
        p_g = int(out[prods == g].sum()) / per
        p_h = int(out[prods == h].sum()) / per
        se = 0.0
        if box is None:
            box = box_norm(d_table(prods, g, h), mode=box_mode, seed=seed)
    elif mode == "mc":
        rng_g, rng_h = (np.random.Generator(np.random.Philox(s))
                        for s in np.random.SeedSequence(seed).spawn(2))
        vals = []
        for target, rng in ((g, rng_g), (h, rng_h)):
            x = sample_conditioned(G, k, t, target, rng, n_samples)
            vals.append(proto.evaluate(input_axes(G, x)).astype(np.float64))
        p_g, p_h = (float(v.mean()) for v in vals)
        se = float(np.sqrt(sum(v.var() for v in vals) / n_samples))
        if box is None:
            if box_mode == "exact" or (box_mode == "auto" and proto.space_size <= EXACT_BUDGET // 4):
                box = box_norm(d_table(product_grid(G, k, t), g, h), mode="exact")
            else:
                box = box_norm_of_d_mc(G, k, t, g, h, n_samples, seed)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    bound = 0.5 * n * proto.num_leaves * box.value
    return Discrepancy(g, h, p_g, p_h, abs(p_g - p_h), se, box.value, box.mode, proto.num_leaves, bound, mode)


def box_norm_of_d_mc(G: SL2, k: int, t: int, g: int, h: int, n_samples: int, seed: int) -> BoxNorm:
    """MC estimate of ||d||^{2^k} as E prod_eps d(mu tuple)."""
    from .dist import mc_mean

    def sampler(rng, size):
        s = mu_tuple_samples(G, k, t, rng, size)
        d = (s == g).astype(np.float64) - (s == h).astype(np.float64)
        return d.prod(axis=1)

    est = mc_mean(sampler, n_samples, seed)
    p = max(est.mean, 0.0)
    return BoxNorm(p ** (1.0 / (1 << k)), est.mean, k, "mc", est.stderr, n_samples, seed)


def box_power_from_mu(mu: Dist, g: int, h: int) -> float:
    """sum over v in {g,h}^m of (-1)^{#h in v} mu(v): the 2^k-th power of ||d_{g,h}||."""
    m = mu.carrier.m
    total = 0.0
    for v in itertools.product((g, h), repeat=m):
        sign = -1.0 if sum(x == h for x in v) % 2 else 1.0
        total += sign * mu.prob(v)
    return total


def box_power_from_mu_exact(mu: Dist, g: int, h: int):
    from fractions import Fraction

    m = mu.carrier.m
    total = 0
    for v in itertools.product((g, h), repeat=m):
        sign = -1 if sum(x == h for x in v) % 2 else 1
        total += sign * int(mu.counts[mu.carrier.encode(v)])
    return Fraction(total, mu.denom)


def box_power_fraction(f) -> "Fraction":
    """Exact ||f||^4 for an integer table on X x Y, as a fraction."""
    from fractions import Fraction

    f = np.asarray(f)
    if f.ndim != 2 or not np.issubdtype(f.dtype, np.integer):
        raise ValueError("need a 2-D integer table")
    obj = f.astype(object)
    g = obj.T.dot(obj)
    total = sum(v * v for v in g.ravel().tolist())
    nx, ny = f.shape
    return Fraction(total, nx * nx * ny * ny)

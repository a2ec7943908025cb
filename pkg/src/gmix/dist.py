"""Probability distributions over G^m, exact and sampled.

A distribution is a flat weight vector over the carrier ``G^m`` indexed in
mixed radix (first coordinate most significant).  Exact distributions may
also carry integer ``counts`` over a common denominator; operations that
preserve integrality keep them, so identities can be checked with zero
tolerance instead of through floating point.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from ._parallel import pmap
from .group import SL2

WEIGHT_RTOL = 2.0**-40
# Largest denominator product kept in int64 count mode.
_COUNT_LIMIT = 1 << 62
MC_BLOCK = 1 << 18


class CarrierMismatch(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    """Exact computation would exceed its enumeration budget."""


@dataclass(frozen=True, eq=False)
class Carrier:
    group: SL2
    m: int = 1

    @property
    def n(self) -> int:
        return self.group.order

    @property
    def size(self) -> int:
        return self.n**self.m

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.m

    def encode(self, tup) -> int:
        if self.m == 1 and np.ndim(tup) == 0:
            return int(tup)
        return int(np.ravel_multi_index(tuple(int(x) for x in tup), self.shape))

    def decode(self, idx):
        """Tuple of coordinates; for an index array, an array of shape (..., m)."""
        if np.ndim(idx) == 0:
            return tuple(int(x) for x in np.unravel_index(int(idx), self.shape))
        return np.stack(np.unravel_index(np.asarray(idx), self.shape), axis=-1)

    def same_as(self, other: "Carrier") -> bool:
        return self.group is other.group and self.m == other.m

    def __repr__(self) -> str:
        return f"Carrier(SL(2,{self.group.q})^{self.m})"


class Dist:
    """A probability vector over a carrier.

    ``form`` is ``"exact"`` or ``"empirical"``.  Empirical distributions
    hold sample counts over ``n_samples`` and expose per-cell standard
    errors.
    """

    __slots__ = ("carrier", "weights", "counts", "denom", "form", "n_samples", "seed")

    def __init__(self, carrier: Carrier, weights=None, *, counts=None, denom=None,
                 form: str = "exact", n_samples: int | None = None, seed: int | None = None,
                 validate: bool = True):
        self.carrier = carrier
        if counts is not None:
            counts = np.asarray(counts, dtype=np.int64).ravel()
            denom = int(denom if denom is not None else counts.sum())
            weights = counts / denom
            counts.setflags(write=False)
        weights = np.asarray(weights, dtype=np.float64).ravel()
        if weights.shape != (carrier.size,):
            raise CarrierMismatch(f"weights of length {weights.size} on {carrier!r}")
        if validate:
            if counts is not None:
                if counts.min() < 0 or int(counts.sum()) != denom:
                    raise ValueError("counts must be nonnegative and sum to the denominator")
            else:
                if weights.min() < 0:
                    raise ValueError("negative weight")
                if abs(weights.sum() - 1.0) > WEIGHT_RTOL * carrier.size ** 0.5 + 1e-12:
                    raise ValueError(f"weights sum to {weights.sum()!r}")
        weights.setflags(write=False)
        self.weights = weights
        self.counts = counts
        self.denom = denom if counts is not None else None
        self.form = form
        self.n_samples = n_samples
        self.seed = seed

    @property
    def is_integral(self) -> bool:
        return self.counts is not None

    def tensor(self) -> np.ndarray:
        return self.weights.reshape(self.carrier.shape)

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights)

    def prob(self, x) -> float:
        return float(self.weights[self.carrier.encode(x)])

    def exact_prob(self, x) -> Fraction:
        if self.counts is None:
            raise ValueError("distribution has no integer counts")
        return Fraction(int(self.counts[self.carrier.encode(x)]), self.denom)

    @property
    def stderr(self) -> np.ndarray:
        """Per-cell standard error sqrt(p(1-p)/N); zero for exact forms."""
        if self.form != "empirical":
            return np.zeros_like(self.weights)
        p = self.weights
        return np.sqrt(p * (1 - p) / self.n_samples)

    @property
    def half_width(self) -> np.ndarray:
        return 2.0 * self.stderr

    def __repr__(self) -> str:
        return f"Dist({self.carrier!r}, form={self.form}, support={len(self.support())})"


@dataclass(eq=False)
class SubsetIndicator:
    carrier: Carrier
    mask: np.ndarray

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool).ravel()
        if self.mask.shape != (self.carrier.size,):
            raise CarrierMismatch("mask length does not match carrier")

    @property
    def cardinality(self) -> int:
        return int(self.mask.sum())

    @property
    def density(self) -> Fraction:
        return Fraction(self.cardinality, self.carrier.size)

    def members(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    @classmethod
    def from_members(cls, carrier: Carrier, members) -> "SubsetIndicator":
        mask = np.zeros(carrier.size, dtype=bool)
        mask[np.asarray(members, dtype=np.int64)] = True
        return cls(carrier, mask)


def random_subset(carrier: Carrier, density: float, rng: np.random.Generator,
                  within: np.ndarray | None = None) -> SubsetIndicator:
    """Bernoulli thinning followed by exact-density repair.

    The result has exactly ``round(density * |pool|)`` members, where the
    pool is the whole carrier or the index set ``within``.
    """
    pool = np.arange(carrier.size) if within is None else np.asarray(within, dtype=np.int64)
    target = int(round(density * len(pool)))
    keep = rng.random(len(pool)) < density
    chosen = pool[keep]
    if len(chosen) > target:
        chosen = rng.choice(chosen, size=target, replace=False)
    elif len(chosen) < target:
        rest = pool[~keep]
        chosen = np.concatenate([chosen, rng.choice(rest, size=target - len(chosen), replace=False)])
    return SubsetIndicator.from_members(carrier, chosen)


# -- constructors -----------------------------------------------------------

def dist_uniform(carrier: Carrier) -> Dist:
    return Dist(carrier, counts=np.ones(carrier.size, dtype=np.int64), denom=carrier.size)


def dist_point(carrier: Carrier, x) -> Dist:
    c = np.zeros(carrier.size, dtype=np.int64)
    c[carrier.encode(x)] = 1
    return Dist(carrier, counts=c, denom=1)


def dist_from_subset(A: SubsetIndicator) -> Dist:
    if A.cardinality == 0:
        raise ValueError("empty subset")
    return Dist(A.carrier, counts=A.mask.astype(np.int64), denom=A.cardinality)


def dist_from_samples(carrier: Carrier, samples: np.ndarray) -> Dist:
    """Empirical law of flat indices, or of tuples given as rows of shape (N, m)."""
    samples = np.asarray(samples, dtype=np.int64)
    if samples.ndim == 2:
        samples = np.ravel_multi_index(tuple(samples.T), carrier.shape)
    counts = np.bincount(samples, minlength=carrier.size)
    return Dist(carrier, counts=counts, denom=len(samples), form="empirical", n_samples=len(samples))


# -- convolution ------------------------------------------------------------

def convolve_arrays(group: SL2, m: int, w1: np.ndarray, w2: np.ndarray) -> np.ndarray:
    """(w1 * w2)(x) = sum_{y z = x} w1(y) w2(z), componentwise on G^m.

    Works for any real or integer weights.  Cost is
    O(size * min(|supp w1|, |supp w2|)).
    """
    n = group.order
    shape = (n,) * m
    a = np.asarray(w1).reshape(shape)
    b = np.asarray(w2).reshape(shape)
    s1 = np.flatnonzero(w1)
    s2 = np.flatnonzero(w2)
    out = np.zeros(shape, dtype=np.result_type(a, b))
    flat1 = np.asarray(w1).ravel()
    flat2 = np.asarray(w2).ravel()
    if m == 1 and group.mul_table is not None and len(s1) * len(s2) <= 1 << 24:
        prods = group.mul_table[np.ix_(s1, s2)].ravel()
        vals = np.outer(flat1[s1], flat2[s2]).ravel()
        if np.issubdtype(out.dtype, np.integer):
            np.add.at(out, prods, vals)
        else:
            out += np.bincount(prods, weights=vals, minlength=n)
        return out.ravel()
    inv = group.inv_table
    if len(s2) <= len(s1):
        # out[x] = sum_z w2[z] w1[x z^-1]
        for z in s2:
            perms = [group.right_mult_perm(int(inv[c])) for c in np.unravel_index(z, shape)]
            out += flat2[z] * a[np.ix_(*perms)]
    else:
        # out[x] = sum_y w1[y] w2[y^-1 x]
        for y in s1:
            perms = [group.left_mult_perm(int(inv[c])) for c in np.unravel_index(y, shape)]
            out += flat1[y] * b[np.ix_(*perms)]
    return out.ravel()


def dist_convolve(d1: Dist, d2: Dist) -> Dist:
    """Law of the componentwise product xy with x ~ d1, y ~ d2 independent."""
    if not d1.carrier.same_as(d2.carrier):
        raise CarrierMismatch(f"{d1.carrier!r} vs {d2.carrier!r}")
    c = d1.carrier
    if d1.is_integral and d2.is_integral and d1.denom * d2.denom < _COUNT_LIMIT:
        counts = convolve_arrays(c.group, c.m, d1.counts, d2.counts)
        return Dist(c, counts=counts, denom=d1.denom * d2.denom, validate=False)
    w = convolve_arrays(c.group, c.m, d1.weights, d2.weights)
    return Dist(c, np.clip(w, 0.0, None), validate=False)


def convolve_chain(dists) -> Dist:
    dists = list(dists)
    acc = dists[0]
    for d in dists[1:]:
        acc = dist_convolve(acc, d)
    return acc


def conjugation_average(d: Dist) -> Dist:
    """Law of u^{-1} x u for x ~ d (on G) and u uniform and independent."""
    if d.carrier.m != 1:
        raise ValueError("conjugation averaging is defined on G")
    G = d.carrier.group
    n = G.order
    src = d.counts if d.is_integral else d.weights
    out = np.zeros(n, dtype=src.dtype)
    for x in np.flatnonzero(src):
        orbit = G.conj(np.arange(n), np.full(n, x))
        np.add.at(out, orbit, src[x])
    if d.is_integral:
        return Dist(d.carrier, counts=out, denom=d.denom * n, validate=False)
    return Dist(d.carrier, out / n, validate=False)


# -- norms and distances ----------------------------------------------------

def _check_pair(d: Dist, e: Dist) -> None:
    if not d.carrier.same_as(e.carrier):
        raise CarrierMismatch(f"{d.carrier!r} vs {e.carrier!r}")


def stat_dist(d: Dist, e: Dist) -> float:
    _check_pair(d, e)
    return 0.5 * float(np.abs(d.weights - e.weights).sum())


def stat_dist_exact(d: Dist, e: Dist) -> Fraction:
    _check_pair(d, e)
    diff = np.abs(d.counts.astype(object) * e.denom - e.counts.astype(object) * d.denom)
    return Fraction(int(diff.sum()), 2 * d.denom * e.denom)


def stat_dist_to_uniform(d: Dist) -> float:
    return 0.5 * float(np.abs(d.weights - 1.0 / d.carrier.size).sum())


def linf_dist(d: Dist, e: Dist) -> float:
    _check_pair(d, e)
    return float(np.abs(d.weights - e.weights).max())


def l2_norm(d) -> float:
    """sqrt(sum_x v(x)^2)."""
    w = d.weights if isinstance(d, Dist) else np.asarray(d, dtype=float)
    return float(np.sqrt(np.dot(w.ravel(), w.ravel())))


def L2_norm(d) -> float:
    """sqrt(E_x v(x)^2), the average-normalised norm."""
    w = d.weights if isinstance(d, Dist) else np.asarray(d, dtype=float)
    return float(np.sqrt(np.mean(w.ravel() ** 2)))


def linf_norm(d) -> float:
    w = d.weights if isinstance(d, Dist) else np.asarray(d, dtype=float)
    return float(np.abs(w).max())


def collision_prob(d: Dist) -> float:
    return float(np.dot(d.weights, d.weights))


def collision_prob_exact(d: Dist) -> Fraction:
    c = d.counts.astype(object)
    return Fraction(int((c * c).sum()), d.denom**2)


# -- (eps, k)-goodness ------------------------------------------------------

def marginal(d: Dist, coords) -> Dist:
    """Projection of d on the increasing coordinate tuple ``coords``."""
    coords = tuple(coords)
    m = d.carrier.m
    if list(coords) != sorted(set(coords)) or (coords and (coords[0] < 0 or coords[-1] >= m)):
        raise ValueError(f"bad coordinate tuple {coords} for m={m}")
    other = tuple(i for i in range(m) if i not in coords)
    sub = Carrier(d.carrier.group, len(coords))
    if d.is_integral:
        arr = d.counts.reshape(d.carrier.shape).sum(axis=other)
        return Dist(sub, counts=arr, denom=d.denom, form=d.form, n_samples=d.n_samples,
                    seed=d.seed, validate=False)
    arr = d.tensor().sum(axis=other)
    return Dist(sub, arr, form=d.form, n_samples=d.n_samples, seed=d.seed, validate=False)


@dataclass(frozen=True)
class Goodness:
    """Smallest eps for which a distribution is (eps, k)-good, plus the witness."""

    k: int
    eps: float
    eps_exact: Fraction | None
    coords: tuple[int, ...]
    assignment: tuple[int, ...]
    prob: float

    def is_good(self, eps: float | Fraction, rtol: float = 1e-12) -> bool:
        if self.eps_exact is not None and isinstance(eps, (int, Fraction)):
            return self.eps_exact <= eps
        return self.eps <= float(eps) * (1 + rtol) + rtol


def goodness(d: Dist, k: int, *, max_cells: int = 1 << 26) -> Goodness:
    """Scan every k-subset of coordinates and every assignment."""
    m = d.carrier.m
    n = d.carrier.n
    if not 1 <= k <= m:
        raise ValueError(f"k={k} out of range for m={m}")
    if n**k > max_cells:
        raise BudgetExceeded(f"{n}^{k} marginal cells exceed the scan budget")
    best = None
    for coords in itertools.combinations(range(m), k):
        mg = marginal(d, coords)
        if d.is_integral:
            dev = np.abs(mg.counts * n**k - d.denom)
        else:
            dev = np.abs(mg.weights * n**k - 1.0)
        i = int(np.argmax(dev))
        val = int(dev[i]) if d.is_integral else float(dev[i])
        if best is None or val > best[0]:
            best = (val, coords, i, float(mg.weights[i]))
    val, coords, i, p = best
    assignment = Carrier(d.carrier.group, k).decode(i)
    if d.is_integral:
        exact = Fraction(val, d.denom)
        return Goodness(k, float(exact), exact, coords, assignment, p)
    return Goodness(k, val, None, coords, assignment, p)


def is_eps_k_good(d: Dist, eps, k: int) -> tuple[bool, Goodness]:
    g = goodness(d, k)
    return g.is_good(eps), g


def is_pairwise_uniform(d: Dist) -> bool:
    g = goodness(d, 2)
    return g.eps_exact == 0 if g.eps_exact is not None else g.eps < 1e-12


def max_line_sum(w: np.ndarray, n: int, m: int):
    """Largest total obtained by fixing m-1 coordinates and summing the last."""
    t = np.asarray(w).reshape((n,) * m)
    return max(t.sum(axis=ax).max() for ax in range(m))


# -- Monte Carlo ------------------------------------------------------------

Sampler = Callable[[np.random.Generator, int], np.ndarray]


def block_rngs(seed: int, n_samples: int, block: int = MC_BLOCK):
    """Per-block (generator, size) pairs derived from one seed.

    Uses the counter-based Philox generator; block streams are independent
    of how many workers consume them.
    """
    sizes = [block] * (n_samples // block)
    if n_samples % block:
        sizes.append(n_samples % block)
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    return [(np.random.Generator(np.random.Philox(c)), s) for c, s in zip(children, sizes)]


def mc_estimate(carrier: Carrier, sampler: Sampler, n_samples: int, seed: int,
                block: int = MC_BLOCK) -> Dist:
    """Empirical distribution of ``n_samples`` draws from ``sampler``."""
    if n_samples < 1:
        raise ValueError("need at least one sample")

    def run(job):
        rng, size = job
        return np.bincount(np.asarray(sampler(rng, size), dtype=np.int64), minlength=carrier.size)

    counts = np.sum(pmap(run, block_rngs(seed, n_samples, block)), axis=0)
    return Dist(carrier, counts=counts, denom=n_samples, form="empirical",
                n_samples=n_samples, seed=seed)


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    n_samples: int
    seed: int

    @property
    def half_width(self) -> float:
        return 2.0 * self.stderr

    def within(self, value: float, sigmas: float = 3.0) -> bool:
        return abs(self.mean - value) <= sigmas * self.stderr


def mc_mean(sampler: Callable[[np.random.Generator, int], np.ndarray], n_samples: int,
            seed: int, block: int = MC_BLOCK) -> MCEstimate:
    """Mean of a per-sample statistic with its standard error."""

    def run(job):
        rng, size = job
        v = np.asarray(sampler(rng, size), dtype=np.float64)
        return v.sum(), np.dot(v, v)

    parts = pmap(run, block_rngs(seed, n_samples, block))
    s = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    mean = s / n_samples
    var = max(s2 / n_samples - mean**2, 0.0)
    return MCEstimate(float(mean), float(np.sqrt(var / n_samples)), n_samples, seed)


def stat_dist_stderr(emp: Dist) -> float:
    """Scale of sampling error in a total-variation estimate: half the summed cell errors."""
    return 0.5 * float(emp.stderr.sum())


# -- export -----------------------------------------------------------------

def to_csv(d: Dist, path, *, nonzero_only: bool = True) -> None:
    """Write ``index,tuple,weight[,stderr]`` rows."""
    import csv

    idx = d.support() if nonzero_only else np.arange(d.carrier.size)
    tuples = d.carrier.decode(idx)
    se = d.stderr
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["index", "tuple", "weight"] + (["stderr"] if d.form == "empirical" else [])
        w.writerow(header)
        for i, tup in zip(idx, tuples):
            row = [int(i), " ".join(str(int(x)) for x in np.atleast_1d(tup)), repr(float(d.weights[i]))]
            if d.form == "empirical":
                row.append(repr(float(se[i])))
            w.writerow(row)


def summary(d: Dist) -> dict:
    out = {
        "carrier": {"q": d.carrier.group.q, "m": d.carrier.m, "size": d.carrier.size},
        "form": d.form,
        "support": int(len(d.support())),
        "max_prob": float(d.weights.max()),
        "collision_prob": collision_prob(d),
        "stat_dist_to_uniform": stat_dist_to_uniform(d),
    }
    if d.form == "empirical":
        out.update(n_samples=d.n_samples, seed=d.seed, stat_dist_stderr=stat_dist_stderr(d))
    return out

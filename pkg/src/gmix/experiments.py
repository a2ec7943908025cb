"""Experiment drivers: each builds one verdicted ``ExperimentReport``.

Drivers accept an optional prebuilt group so that a deliberately corrupted
table can be pushed through the same checks (fault injection).
"""

from __future__ import annotations

import itertools
import statistics
import time
from fractions import Fraction
from functools import partial
from typing import Callable

import numpy as np

from . import thresholds as th
from .dist import (
    BudgetExceeded, Carrier, Dist, dist_convolve, dist_from_subset, dist_uniform, goodness,
    random_subset, stat_dist_exact,
)
from ._parallel import pmap
from .group import SL2, class_census, sl2_build
from .interleave import (
    MAX_CELLS, BoxNorm, box_norm, box_norm_of_d_mc, box_power_from_mu, box_power_from_mu_exact,
    constant_protocol, d_table, dist_interleaved2, mu_tuple_dist, product_grid, protocol_discrepancy,
    random_protocol, s_tuple_marginal,
)
from .report import ExperimentReport, exact, mc, write_plot_csv
from .sl2_verify import (
    TraceExperimentSpec, collision_gamma, collision_lhs, collision_per_class, poly_count,
    reducible_locus_candidates, reduction_identity_check, square_sum_law, trace_dist, trace_law,
    trace_to_class_check,
)

Groups = dict[int, SL2] | None


def _group(q: int, groups: Groups = None) -> SL2:
    if groups and q in groups:
        return groups[q]
    return sl2_build(q)


def _rng(seed: int, *tags: int) -> np.random.Generator:
    ss = np.random.SeedSequence([seed, *tags])
    return np.random.Generator(np.random.Philox(ss))


def _timed(fn: Callable[..., ExperimentReport]) -> Callable[..., ExperimentReport]:
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        rep = fn(*args, **kwargs)
        rep.wall_clock = time.perf_counter() - t0
        return rep

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def generic_pairs(F, k: int = th.GENERIC_PAIRS) -> list[tuple[int, int]]:
    """First k pairs (v, w) with v, w nonzero that satisfy the equidistribution hypothesis."""
    out = []
    for v in range(1, F.q):
        for w in range(1, F.q):
            if not TraceExperimentSpec(F, v, w).excluded:
                out.append((v, w))
                if len(out) == k:
                    return out
    return out


# -- group audit ----------------------------------------------------------------

def group_axiom_checks(G: SL2, rep: ExperimentReport, rng: np.random.Generator) -> None:
    """Identity, inverse and associativity: exhaustive for small groups, sampled otherwise."""
    n = G.order
    x = np.arange(n)
    e = G.identity
    rep.check("identity", np.array_equal(G.mul(np.full(n, e), x), x) and np.array_equal(G.mul(x, np.full(n, e)), x),
              hard=True)
    rep.check("inverse", bool((G.mul(x, G.inv(x)) == e).all() and (G.mul(G.inv(x), x) == e).all()), hard=True)
    if n**3 <= 2 * 10**6:
        a, b, c = (v.ravel() for v in np.meshgrid(x, x, x, indexing="ij"))
        how = "exhaustive"
    else:
        a, b, c = (rng.integers(0, n, 10**5) for _ in range(3))
        how = "sampled"
    assoc = bool((G.mul(G.mul(a, b), c) == G.mul(a, G.mul(b, c))).all())
    rep.check("associativity", assoc, hard=True, coverage=how)
    F = G.field
    ent = G.entries
    det = F.sub(F.mul(ent[:, 0], ent[:, 3]), F.mul(ent[:, 1], ent[:, 2]))
    det_ok = bool((det == 1).all())
    rep.check("determinant_one", det_ok, hard=True)


@_timed
def run_group_audit(q: int, seed: int = 0, groups: Groups = None) -> ExperimentReport:
    G = _group(q, groups)
    rep = ExperimentReport("group-audit", {"q": q}, seed)
    cen = class_census(G)
    rep.measured.update(order=exact(G.order), num_classes=exact(cen["num_classes"]),
                        num_nongeneric_size=exact(cen["num_nongeneric_size"]),
                        min_nontrivial_size=exact(cen["min_nontrivial_size"]),
                        classes_sharing_trace=exact(cen["classes_sharing_trace"]))
    rep.check("order_q3_minus_q", G.order == q**3 - q, hard=True)
    group_axiom_checks(G, rep, _rng(seed, 1))
    sizes = G.class_sizes
    rep.check("class_partition", int(sizes.sum()) == G.order and all(G.order % int(s) == 0 for s in sizes), hard=True)
    rep.check("trace_constant_on_classes",
              all(len(set(G.trace_table[c.members].tolist())) == 1 for c in G.classes), hard=True)
    central = {G.identity, G.neg_identity}
    rep.check("central_singletons", all(G.class_of(z).size == 1 for z in central)
              and sum(1 for c in G.classes if c.size == 1) == len(central), hard=True)
    k = cen["num_classes"]
    rep.check("class_count_window", q <= k <= q + th.CLASS_COUNT_SLACK, threshold="CLASS_COUNT_SLACK", count=k)
    if cen["min_nontrivial_size"] is not None:
        rep.check("min_nontrivial_class", cen["min_nontrivial_size"] * th.MIN_CLASS_DIVISOR >= q * q - 1,
                  threshold="MIN_CLASS_DIVISOR", size=cen["min_nontrivial_size"])
    if q % 2 == 1 and q >= 5:
        rep.check("nongeneric_class_sizes", cen["num_nongeneric_size"] <= th.NONGENERIC_CLASS_MAX,
                  threshold="NONGENERIC_CLASS_MAX", count=cen["num_nongeneric_size"])
    rep.check("trace_fibres", cen["classes_sharing_trace"] <= th.TRACE_SHARED_CLASS_MAX,
              threshold="TRACE_SHARED_CLASS_MAX", count=cen["classes_sharing_trace"])
    rep.measured["census"] = cen["classes"]
    return rep


# -- counterexamples ------------------------------------------------------------

def borel_members(G: SL2) -> np.ndarray:
    """Upper-triangular matrices: a subgroup of order q(q-1)."""
    return np.flatnonzero(G.entries[:, 2] == 0)


@_timed
def run_counterexamples(q: int, seed: int = 0, groups: Groups = None, diag_r: int = 3) -> ExperimentReport:
    """The three non-mixing constructions, all checked in integer counts."""
    G = _group(q, groups)
    n = G.order
    c1 = Carrier(G, 1)
    rep = ExperimentReport("counterexamples", {"q": q, "diag_r": diag_r}, seed)
    rng = _rng(seed, 2)

    # (i) X uniform on S, Y uniform on G \ S^{-1}
    S = random_subset(c1, 0.5, rng)
    Y = np.ones(n, dtype=bool)
    Y[G.inv(S.members())] = False
    XY = dist_convolve(dist_from_subset(S), Dist(c1, counts=Y.astype(np.int64), denom=int(Y.sum())))
    rep.measured["xy_identity_count"] = exact(int(XY.counts[G.identity]))
    rep.measured["xy_max_deviation_times_n"] = exact(float(np.abs(XY.weights - 1 / n).max() * n))
    rep.check("xy_never_identity", XY.counts[G.identity] == 0, hard=True)
    rep.check("xy_equal_densities", int(Y.sum()) == S.cardinality, hard=True)

    # (ii) (A, A') uniform on pairs with 1 not in x S' y, Y uniform on S'
    S2 = random_subset(c1, 0.5, rng).members()
    allowed = np.ones((n, n), dtype=bool)
    for x in range(n):
        allowed[x, G.inv(G.mul(np.full(len(S2), x), S2))] = False
    counts = np.zeros(n, dtype=np.int64)
    for x in range(n):
        ys = np.flatnonzero(allowed[x])
        xs = G.mul(np.full(len(S2), x), S2)
        counts += np.bincount(G.mul(xs[:, None], ys[None, :]).ravel(), minlength=n)
    row = allowed.sum(axis=1)
    col = allowed.sum(axis=0)
    rep.measured["aya_identity_count"] = exact(int(counts[G.identity]))
    rep.check("aya_never_identity", counts[G.identity] == 0, hard=True)
    rep.check("aya_marginals_uniform", bool((row == row[0]).all() and (col == col[0]).all()), hard=True,
              per_element=int(row[0]))

    # (iii) uniform on a subgroup: Borel H in G, and the diagonal in G^m
    H = borel_members(G)
    mask = np.zeros(n, dtype=bool)
    mask[H] = True
    dH = dist_from_subset_mask(c1, mask)
    xyz = dist_convolve(dist_convolve(dH, dH), dH)
    rep.check("borel_closed", bool((xyz.counts[~mask] == 0).all()), hard=True)
    sd = stat_dist_exact(xyz, dist_uniform(c1))
    rep.check("borel_stat_dist", sd == 1 - Fraction(len(H), n), hard=True, value=str(sd))
    m = 3 if n**3 <= 2 * 10**6 else 2
    cm = Carrier(G, m)
    diag = np.zeros(cm.size, dtype=np.int64)
    diag[np.ravel_multi_index((np.arange(n),) * m, cm.shape)] = 1
    dd = Dist(cm, counts=diag, denom=n)
    acc = dd
    confined = True
    for _ in range(diag_r - 1):
        acc = dist_convolve(acc, dd)
        confined &= bool((acc.counts[diag == 0] == 0).all())
    sd = stat_dist_exact(acc, dist_uniform(cm))
    rep.params["diag_m"] = m
    rep.check("diagonal_confined", confined, hard=True)
    rep.check("diagonal_stat_dist", sd == 1 - Fraction(1, n ** (m - 1)), hard=True, value=str(sd))
    return rep


def dist_from_subset_mask(carrier: Carrier, mask: np.ndarray) -> Dist:
    return Dist(carrier, counts=mask.astype(np.int64), denom=int(mask.sum()))


# -- two-set interleaved mixing -----------------------------------------------

def mix2_trial(G: SL2, t: int, alpha: float, beta: float, rng, mode: str, n_samples: int, seed: int) -> dict:
    ct = Carrier(G, t)
    n = G.order
    A = random_subset(ct, alpha, rng)
    B = random_subset(ct, beta, rng)
    law = dist_interleaved2(A, B, mode, n_samples=n_samples, seed=seed)
    p = law.weights
    out = {"alpha": str(A.density), "beta": str(B.density)}
    out["dev_mix"] = float(np.abs(p - 1 / n).max())
    out["dev_mix_times_n"] = out["dev_mix"] * n
    na, nb = A.cardinality, B.cardinality
    # conditional expectation over a.b = g of A(a) B(b), and its gap to alpha*beta
    ab = A.density * B.density
    if law.is_integral:
        per = n ** (2 * t - 1)
        cond = [Fraction(int(c), per) for c in law.counts]
        out["dev_cond"] = float(max(abs(c - ab) for c in cond))
        # Pr[a.b = g | a in A, b in B] = Pr[a in A, b in B | a.b = g] / (n alpha beta)
        resid = max(abs(Fraction(int(c), na * nb) - cond_g / (n * ab)) for c, cond_g in zip(law.counts, cond))
        out["bayes_residual"] = str(resid)
        out["bayes_exact"] = resid == 0
    else:
        out["dev_cond"] = float(np.abs(p * n * float(ab) - float(ab)).max())
        out["stderr"] = float(law.stderr.max())
    return out


@_timed
def run_mix2(q: int, t: int, alpha: float = 0.5, beta: float = 0.5, trials: int = 20, seed: int = 0,
             mode: str = "auto", n_samples: int = th.DEFAULT_SAMPLES, groups: Groups = None) -> ExperimentReport:
    G = _group(q, groups)
    n = G.order
    if mode == "auto":
        pairs = (alpha * n**t) * (beta * n**t)
        mode = "exact" if n**t <= 10**6 and pairs <= th.EXACT_WORK_BUDGET else "mc"
    if mode == "exact" and n**t > 10**6:
        raise BudgetExceeded(f"|G|^t = {n**t} exceeds the exact budget")
    rep = ExperimentReport("mix2", {"q": q, "t": t, "alpha": alpha, "beta": beta, "trials": trials,
                                    "mode": mode, "n_samples": n_samples if mode == "mc" else None}, seed)
    rows = []
    for i in range(trials):
        rows.append(mix2_trial(G, t, alpha, beta, _rng(seed, 3, i), mode, n_samples, seed + i))
    devs = [r["dev_mix_times_n"] for r in rows]
    rep.measured["trials"] = rows
    rep.measured["worst_dev_mix_times_n"] = exact(max(devs)) if mode == "exact" else mc(max(devs), rows[0].get("stderr", 0) * n)
    rep.measured["median_dev_mix_times_n"] = exact(statistics.median(devs)) if mode == "exact" else mc(statistics.median(devs), rows[0].get("stderr", 0) * n)
    rep.measured["worst_dev_cond"] = exact(max(r["dev_cond"] for r in rows))
    rep.notes.append("representation-dimension plug-in: d >= |G|^(1/3) = %.4g" % (n ** th.REP_DIM_EXPONENT))
    if mode == "exact":
        rep.check("bayes_identity", all(r["bayes_exact"] for r in rows), hard=True)
        if alpha == 1 and beta == 1:
            rep.check("full_sets_uniform", max(devs) == 0, hard=True)
    return rep


# -- boosting pairwise uniformity ---------------------------------------------------

def word_dist(G: SL2, rng: np.random.Generator) -> tuple[Dist, dict]:
    """Law of (x, y, a w b w' c) with x, y uniform and w, w' = x^{+-1}, y^{+-1} in random order.

    Pairwise uniform: given either of x or y the third coordinate is uniform.
    """
    n = G.order
    a, b, c = (int(v) for v in rng.integers(0, n, 3))
    ex, ey = (int(v) for v in rng.choice([-1, 1], 2))
    swap = bool(rng.integers(0, 2))
    x, y = (v.ravel() for v in np.meshgrid(np.arange(n), np.arange(n), indexing="ij"))
    wx = x if ex == 1 else G.inv(x)
    wy = y if ey == 1 else G.inv(y)
    first, second = (wy, wx) if swap else (wx, wy)
    z = G.mul(G.mul(G.mul(G.mul(np.full(len(x), a), first), np.full(len(x), b)), second), np.full(len(x), c))
    carrier = Carrier(G, 3)
    counts = np.zeros(carrier.size, dtype=np.int64)
    counts[np.ravel_multi_index((x, y, z), carrier.shape)] = 1
    info = {"a": a, "b": b, "c": c, "ex": ex, "ey": ey, "swap": swap}
    return Dist(carrier, counts=counts, denom=n * n), info


def diagonal_dist(G: SL2, m: int = 3) -> Dist:
    c = Carrier(G, m)
    counts = np.zeros(c.size, dtype=np.int64)
    counts[np.ravel_multi_index((np.arange(G.order),) * m, c.shape)] = 1
    return Dist(c, counts=counts, denom=G.order)


@_timed
def run_boost(q: int = 3, m: int = 3, seed: int = 0, max_r: int = 40, groups: Groups = None) -> ExperimentReport:
    G = _group(q, groups)
    n = G.order
    if n**m > MAX_CELLS:
        raise BudgetExceeded(f"G^{m} has {n**m} cells")
    rep = ExperimentReport("boost", {"q": q, "m": m, "max_r": max_r}, seed)
    c = Carrier(G, m)
    U = dist_uniform(c)
    rep.check("uniform_good_after_one", goodness(U, m).eps_exact == 0, hard=True)

    D = diagonal_dist(G, m)
    g2 = goodness(D, 2)
    rep.measured["diagonal_eps2"] = exact(g2.eps_exact)
    rep.check("diagonal_not_pairwise_uniform", g2.eps_exact > 0, hard=True)
    acc = D
    eps_diag = []
    for _ in range(3):
        eps_diag.append(goodness(acc, m).eps_exact)
        acc = dist_convolve(acc, D)
    rep.check("diagonal_never_improves", len(set(eps_diag)) == 1, hard=True, eps=[str(e) for e in eps_diag])

    rng = _rng(seed, 4)
    if m == 3:
        # s-tuple laws restricted to three coordinates, convolved until (1/n, 3)-good
        st_rows = []
        for k in (2, 3):
            for trip in itertools.combinations(range(1 << k), 3):
                st = s_tuple_marginal(G, k, trip)
                acc_st = st
                chain = [goodness(acc_st, 3).eps]
                while chain[-1] > 1 / n * (1 + 1e-12) and len(chain) < max_r:
                    acc_st = dist_convolve(acc_st, st)
                    chain.append(goodness(acc_st, 3).eps)
                r_st = len(chain) if chain[-1] <= 1 / n * (1 + 1e-12) else None
                st_rows.append({"k": k, "coords": list(trip), "eps_by_r": chain, "r_one_over_n": r_st})
        rep.measured["s_tuple_inputs"] = st_rows
        rep.check("s_tuple_inputs_reach_one_over_n", all(r["r_one_over_n"] is not None for r in st_rows))

    def fresh():
        mu, info = word_dist(G, rng) if m == 3 else (None, None)
        return mu, info

    if m != 3:
        rep.notes.append("random word inputs are defined on G^3 only")
        return rep
    factors, infos = [], []
    mu, info = fresh()
    factors.append(mu)
    infos.append(info)
    pu = goodness(mu, 2).eps_exact == 0
    acc = mu
    eps = [goodness(acc, 3).eps]
    r_first = 1 if eps[-1] <= 1 / n else None
    while r_first is None and len(factors) < max_r:
        mu, info = fresh()
        pu &= goodness(mu, 2).eps_exact == 0
        factors.append(mu)
        infos.append(info)
        acc = dist_convolve(acc, mu)
        eps.append(goodness(acc, 3).eps)
        if eps[-1] <= 1 / n * (1 + 1e-12):
            r_first = len(factors)
    rep.check("inputs_pairwise_uniform", pu, hard=True)
    rep.measured["eps_by_r"] = exact(eps)
    rep.measured["words"] = infos
    rep.measured["r_one_over_n"] = exact(r_first)
    rep.check("reaches_one_over_n", r_first is not None, r=r_first)
    rep.check("eps_non_increasing", all(b <= a * (1 + 1e-12) for a, b in zip(eps, eps[1:])))
    if r_first is not None:
        block = acc
        sq = dist_convolve(block, block)
        e1 = goodness(block, 3).eps
        e2 = goodness(sq, 3).eps
        rep.measured["eps_after_squaring_block"] = exact(e2)
        rep.measured["r_one_over_n2"] = exact(2 * r_first)
        rep.check("squaring_block_reaches_one_over_n2", e2 <= 1 / n**2 * (1 + 1e-12), r=2 * r_first, eps=e2)
        # float mode once denominators overflow: allow rounding noise
        tol = 0.0 if sq.is_integral else 1e-10
        rep.check("squaring_bound", e2 <= e1 * e1 + tol, eps=e1, eps_sq=e2)
    return rep


# -- NOF distribution and protocols -------------------------------------------------

@_timed
def run_nof(q: int = 3, k: int = 2, ts=(1, 2, 4), seed: int = 0, n_protocols: int = 50, bits: int = 2,
            protocol_t: int | None = None, n_samples: int = th.DEFAULT_SAMPLES,
            groups: Groups = None) -> ExperimentReport:
    G = _group(q, groups)
    n = G.order
    m = 1 << k
    ts = tuple(ts)
    rep = ExperimentReport("nof", {"q": q, "k": k, "ts": list(ts), "n_protocols": n_protocols, "bits": bits}, seed)

    # pairwise marginals of the s-tuple
    pair_ok = True
    for cpair in itertools.combinations(range(m), 2):
        pair_ok &= goodness(s_tuple_marginal(G, k, cpair), 2).eps_exact == 0
    rep.check("s_tuple_pairwise_uniform", pair_ok, hard=True)

    mus = {}
    alphas = {}
    if n**m <= MAX_CELLS:
        for t in ts:
            mu = mu_tuple_dist(G, k, t)
            mus[t] = mu
            g = goodness(mu, m)
            alphas[t] = g.eps
        rep.measured["alpha_hat"] = {str(t): exact(a) for t, a in alphas.items()}
        seq = [alphas[t] for t in ts]
        rep.check("alpha_strictly_decreasing", all(b < a for a, b in zip(seq, seq[1:])), alphas=seq)
        rep.bounds["goodness_bound_2c_alpha"] = {str(t): (2**bits) * alphas[t] ** (1 / m) for t in ts}
    else:
        # full m-wise law out of reach: exact marginals on up to 3 coordinates
        marg = {}
        for t in ts:
            worst = 0.0
            for trip in itertools.combinations(range(m), 3):
                worst = max(worst, goodness(s_tuple_marginal(G, k, trip, t), 3).eps)
            marg[str(t)] = worst
        rep.measured["eps3_marginals"] = {t: exact(v) for t, v in marg.items()}
        rep.notes.append("full 2^k-wise goodness not enumerable; reported 3-wise marginals only")

    pt = protocol_t if protocol_t is not None else (2 if k == 2 else 1)
    axis = n**pt
    rep.params["protocol_t"] = pt
    rng = _rng(seed, 5)
    prods = product_grid(G, k, pt) if axis**k <= 10**8 // 4 else None
    mu_p = mus.get(pt)
    if mu_p is None and prods is not None and n**m <= MAX_CELLS:
        mu_p = mu_tuple_dist(G, k, pt)
    rows = []
    within = True
    identity_ok = True
    for i in range(n_protocols):
        P = random_protocol(k, axis, bits, rng)
        g, h = (int(v) for v in rng.choice(n, 2, replace=False))
        if mu_p is not None:
            power = box_power_from_mu_exact(mu_p, g, h) if mu_p.is_integral else box_power_from_mu(mu_p, g, h)
            bn = BoxNorm(max(float(power), 0.0) ** (1 / m), float(power), k, "exact")
        elif prods is not None:
            bn = box_norm(d_table(prods, g, h), mode="exact")
        else:
            bn = box_norm_of_d_mc(G, k, pt, g, h, n_samples, seed + i)
        mode = "exact" if prods is not None else "mc"
        r = protocol_discrepancy(G, P, pt, g, h, mode=mode, products=prods, box=bn,
                                 n_samples=n_samples, seed=seed + i)
        within &= r.within_bound
        if i == 0 and prods is not None:
            direct = box_norm(d_table(prods, g, h), mode="exact")
            identity_ok = abs(direct.power - bn.power) <= 1e-12 * max(abs(bn.power), 1e-300) + 1e-18
        rows.append({"g": g, "h": h, "discrepancy": r.discrepancy, "stderr": r.stderr, "box_norm": r.box_norm_d,
                     "bound": r.bound, "leaves": r.leaves})
    rep.measured["protocols"] = rows
    if rows:
        rep.check("discrepancy_within_box_bound", within, count=len(rows))
        if prods is not None:
            rep.check("box_power_matches_mu_identity", identity_ok, hard=True)
        rep.measured["max_discrepancy_over_bound"] = exact(max(r["discrepancy"] / r["bound"] for r in rows if r["bound"] > 0))
    if prods is not None:
        const = protocol_discrepancy(G, constant_protocol(k, axis), pt, 0, 1, mode="exact", products=prods,
                                     box=box_norm(d_table(prods, 0, 1), mode="exact"))
        rep.check("constant_protocol_zero", const.discrepancy == 0, hard=True)
    return rep


# -- products of several dense sets ---------------------------------------------------

def _mask_dist(c1: Carrier, members) -> Dist:
    mask = np.zeros(c1.size, dtype=bool)
    mask[np.asarray(members, dtype=np.int64)] = True
    return dist_from_subset_mask(c1, mask)


@_timed
def run_multiset(q: int, mode: str = "sets", seed: int = 0, density: float = 0.5,
                 groups: Groups = None) -> ExperimentReport:
    G = _group(q, groups)
    n = G.order
    c1 = Carrier(G, 1)
    rep = ExperimentReport("multiset", {"q": q, "mode": mode, "density": density}, seed)
    rng = _rng(seed, 6)
    U = dist_uniform(c1)
    if mode == "sets":
        sets = [random_subset(c1, density, rng) for _ in range(4)]
        ds = [dist_from_subset(s) for s in sets]
        three = dist_convolve(dist_convolve(ds[0], ds[1]), ds[2])
        four = dist_convolve(three, ds[3])
        dens = [s.density for s in sets]
        dev3 = float(np.abs(three.weights - 1 / n).max() * n)
        dev4 = float(np.abs(four.weights - 1 / n).max() * n)
        # E_{abc=g} A B C against alpha beta gamma
        ab = dens[0] * dens[1] * dens[2]
        cond = max(abs(Fraction(int(c), three.denom) * n * ab - ab) for c in three.counts)
        rep.measured.update(dev3_times_n=exact(dev3), dev4_times_n=exact(dev4), cond3=exact(cond),
                            densities=[str(d) for d in dens])
        full = dist_convolve(dist_convolve(dist_convolve(U, U), U), U)
        rep.check("full_sets_uniform", stat_dist_exact(full, U) == 0, hard=True)
        return rep
    if mode != "classes":
        raise ValueError(f"unknown mode {mode!r}")
    B = random_subset(c1, density, rng)
    C = random_subset(c1, density, rng)
    dB, dC = dist_from_subset(B), dist_from_subset(C)
    BC = dist_convolve(dB, dC)
    binv = G.inv(B.members())
    rows = []
    for cls in G.classes:
        k = max(1, int(round(density * cls.size)))
        A = rng.choice(cls.members, size=k, replace=False)
        law = dist_convolve(_mask_dist(c1, A), BC)
        dev = float(np.abs(law.weights - 1 / n).max() * n)
        # set avoided by some product: g = 1, C* = G \ B^{-1} A^{-1}
        reach = np.zeros(n, dtype=bool)
        ainv = G.inv(A)
        reach[np.unique(G.mul(binv[:, None], ainv[None, :]).ravel())] = True
        avoid_density = float(1 - reach.mean())
        rows.append({"class": cls.id, "trace": cls.trace, "size": cls.size, "dev_times_n": dev,
                     "avoiding_density": avoid_density,
                     "flagged": avoid_density >= th.AVOIDING_SET_DENSITY})
    rep.measured["classes"] = rows
    flagged = [r["class"] for r in rows if r["flagged"]]
    rep.measured["flagged"] = flagged
    central = {int(G.class_id[G.identity]), int(G.class_id[G.neg_identity])}
    rep.check("central_classes_flagged", central <= set(flagged), threshold="AVOIDING_SET_DENSITY")
    generic = [r["dev_times_n"] for r in rows if not r["flagged"]]
    if generic:
        rep.measured["generic_dev_times_n_max"] = exact(max(generic))
    return rep


# -- trace law, point counts, collision -----------------------------------------

@_timed
def run_trace(q: int, v: int | None = None, w: int | None = None, mode: str = "exact", seed: int = 0,
              n_samples: int = th.DEFAULT_SAMPLES, groups: Groups = None) -> ExperimentReport:
    """Trace law at one (v, w) or, if v is None, a sweep over generic pairs and (0, 0)."""
    G = _group(q, groups)
    F = G.field
    rep = ExperimentReport("trace", {"q": q, "v": v, "w": w, "mode": mode}, seed)
    pairs = [(v, w)] if v is not None else generic_pairs(F) + [(0, 0)]
    rows = []
    for vv, ww in pairs:
        sp = TraceExperimentSpec(F, vv, ww, mode, n_samples, seed)
        td = trace_dist(sp, G)
        row = {"v": vv, "w": ww, "excluded": sp.exclusion, "max_cell_times_q": td.max_cell_scaled,
               "stat_dist": td.stat_dist, "mode": td.mode}
        if td.mode == "exact":
            row["stat_dist_exact"] = str(td.stat_dist_exact)
        rows.append(row)
    rep.measured["pairs"] = rows
    included = [r for r in rows if not r["excluded"] and not (r["v"] == 0 and r["w"] == 0)]
    if included and mode == "exact":
        worst = max(r["max_cell_times_q"] for r in included)
        rep.measured["worst_max_cell_times_q"] = exact(worst)
        rep.measured["worst_stat_dist"] = exact(max(r["stat_dist"] for r in included))
        rep.check("max_cell_within_c1", worst <= th.C1_TRACE_MAXCELL, threshold="C1_TRACE_MAXCELL", worst=worst)
    if F.p == 2 and (v is None or (v == 0 and w == 0)):
        sp = TraceExperimentSpec(F, 0, 0)
        rep.check("even_zero_case_square_law", np.array_equal(trace_dist(sp, G).counts, square_sum_law(F, G)),
                  hard=True)
    if F.p != 2 and (v is None or (v == 0 and w == 0)):
        z = next(r for r in rows if r["v"] == 0 and r["w"] == 0)
        gen = max((r["stat_dist"] for r in included), default=0.0)
        rep.check("odd_zero_case_flagged", z["excluded"] is not None, hard=True)
        rep.check("odd_zero_case_far", z["stat_dist"] > gen, zero=z["stat_dist"], generic=gen)
    # conjugation invariance of tr(h u g u^{-1}) and the class-law comparison
    rng = _rng(seed, 7)
    h, g, x, y = (int(a) for a in rng.integers(0, G.order, 4))
    base = trace_law(G, h, g)
    hc, gc = int(G.conj(x, h)), int(G.conj(y, g))
    rep.check("trace_law_conjugation_invariant", np.array_equal(base, trace_law(G, hc, gc)), hard=True)
    cls = []
    for _ in range(5):
        g, h = (int(a) for a in rng.integers(0, G.order, 2))
        r = trace_to_class_check(G, g, h)
        cls.append(r | {"g": g, "h": h})
    rep.measured["class_vs_trace"] = cls
    rep.check("class_law_within_trace_plus_slack",
              all(r["class_dist"] <= r["trace_dist"] + th.CLASS_TRACE_SLACK / q for r in cls),
              threshold="CLASS_TRACE_SLACK")
    return rep


@_timed
def run_polycount(q: int, v: int | None = None, w: int | None = None, seed: int = 0,
                  groups: Groups = None) -> ExperimentReport:
    G = _group(q, groups)
    F = G.field
    rep = ExperimentReport("polycount", {"q": q, "v": v, "w": w}, seed)
    pairs = [(v, w)] if v is not None else generic_pairs(F)
    rows = []
    for vv, ww in pairs:
        pc = poly_count(TraceExperimentSpec(F, vv, ww), G)
        d = pc.as_dict(th.C2_POINT_COUNT)
        d["reducible_locus_candidates"] = sorted(reducible_locus_candidates(F, vv, ww))
        d["unexplained_by_reducible_locus"] = sorted(pc.exceptional(th.C2_POINT_COUNT)
                                                     - reducible_locus_candidates(F, vv, ww))
        rows.append(d)
        rep.check(f"x0_slice_q_minus_1[{vv},{ww}]", pc.x0_roots == q - 1, hard=True)
        rep.check(f"reconciled[{vv},{ww}]", pc.reconciled, hard=True)
    rep.measured["pairs"] = rows
    rep.check("exceptional_within_candidates", all(not r["unexplained"] for r in rows),
              threshold="C2_POINT_COUNT", unexplained={f"{r['v']},{r['w']}": r["unexplained"] for r in rows})
    rep.check("exceptional_within_reducible_locus",
              all(not r["unexplained_by_reducible_locus"] for r in rows), threshold="C2_POINT_COUNT")
    return rep


@_timed
def run_collision(q: int, a: int | None = None, mode: str = "exact", n_samples: int = 10**7, seed: int = 0,
                  groups: Groups = None) -> ExperimentReport:
    """Collision statistic; a = None gives the a-averaged value."""
    G = _group(q, groups)
    n = G.order
    rep = ExperimentReport("collision", {"q": q, "a": a, "mode": mode,
                                         "n_samples": n_samples if mode == "mc" else None}, seed)
    if a is None:
        v = collision_gamma(G, mode=mode, n_samples=n_samples, seed=seed)
        if mode == "exact":
            rep.measured["per_class"] = collision_per_class(G)
    else:
        v = collision_lhs(G, a, mode=mode, n_samples=n_samples, seed=seed)
    if mode == "exact":
        rep.measured["lhs"] = exact(v.lhs_exact)
        rep.measured["gamma"] = exact(n * v.lhs_exact - 1)
        rep.check("lhs_at_least_one_over_n", v.lhs_exact >= Fraction(1, n), hard=True)
    else:
        rep.measured["lhs"] = mc(v.lhs, v.stderr, n_samples)
        rep.measured["gamma"] = mc(v.gamma, n * v.stderr, n_samples)
    rep.notes.append("gamma = |G| * LHS - 1")
    return rep


@_timed
def run_reduction(q: int = 3, seed: int = 0, n_pairs: int = 100, groups: Groups = None) -> ExperimentReport:
    G = _group(q, groups)
    rep = ExperimentReport("reduction-check", {"q": q, "n_pairs": n_pairs}, seed)
    r = reduction_identity_check(G, n_pairs=n_pairs, seed=seed)
    for name, ok in r.checks.items():
        rep.check(name, ok, hard=True)
    rep.measured.update(r.values)
    return rep


@_timed
def run_group_info(q: int, seed: int = 0, groups: Groups = None) -> ExperimentReport:
    G = _group(q, groups)
    rep = ExperimentReport("group-info", {"q": q}, seed)
    rep.measured.update(class_census(G))
    return rep


# -- suites --------------------------------------------------------------------------

def _guard(job: partial) -> ExperimentReport:
    """Run a driver; an internal consistency error becomes a failed hard check."""
    try:
        return job()
    except (AssertionError, ArithmeticError, IndexError, ValueError) as exc:
        q = job.args[0] if job.args else job.keywords.get("q")
        name = job.func.__name__.removeprefix("run_").replace("_", "-")
        rep = ExperimentReport(name, {"q": q}, job.keywords.get("seed"))
        rep.check("driver_completed", False, hard=True, error=f"{type(exc).__name__}: {exc}")
        return rep


def smoke_suite(seed: int, groups: Groups = None) -> list[ExperimentReport]:
    jobs = []
    for q in (2, 3):
        jobs.append(partial(run_group_audit, q, seed=seed, groups=groups))
        jobs.append(partial(run_counterexamples, q, seed=seed, groups=groups))
    jobs.append(partial(run_mix2, 3, 1, trials=3, seed=seed, groups=groups))
    jobs.append(partial(run_mix2, 3, 2, trials=2, seed=seed, groups=groups))
    jobs.append(partial(run_boost, 3, 3, seed=seed, groups=groups))
    jobs.append(partial(run_nof, 3, 2, ts=(1, 2), seed=seed, n_protocols=5, groups=groups))
    jobs.append(partial(run_multiset, 3, "sets", seed=seed, groups=groups))
    jobs.append(partial(run_multiset, 3, "classes", seed=seed, groups=groups))
    jobs.append(partial(run_trace, 3, seed=seed, groups=groups))
    jobs.append(partial(run_polycount, 3, seed=seed, groups=groups))
    jobs.append(partial(run_collision, 3, seed=seed, groups=groups))
    jobs.append(partial(run_reduction, 3, seed=seed, groups=groups))
    return pmap(_guard, jobs)


def full_suite(seed: int, groups: Groups = None) -> list[ExperimentReport]:
    jobs = []
    for q in (2, 3, 4, 5, 7, 8, 9, 11, 13):
        jobs.append(partial(run_group_audit, q, seed=seed, groups=groups))
    for q in (2, 3, 5, 7):
        jobs.append(partial(run_counterexamples, q, seed=seed, groups=groups))
    for t in (1, 2, 3):
        jobs.append(partial(run_mix2, 3, t, trials=20 if t < 3 else 5, seed=seed, groups=groups))
    jobs.append(partial(run_boost, 3, 3, seed=seed, groups=groups))
    jobs.append(partial(run_nof, 3, 2, ts=(1, 2, 4, 8), seed=seed, groups=groups))
    jobs.append(partial(run_nof, 3, 3, ts=(1, 2), seed=seed, n_protocols=10, groups=groups))
    for q in (3, 5, 7):
        jobs.append(partial(run_multiset, q, "sets", seed=seed, groups=groups))
        jobs.append(partial(run_multiset, q, "classes", seed=seed, groups=groups))
    for q in (4, 5, 7, 8, 9, 11, 13):
        jobs.append(partial(run_trace, q, seed=seed, groups=groups))
        jobs.append(partial(run_polycount, q, seed=seed, groups=groups))
    for q in (3, 4, 5, 7, 8, 9, 11, 13):
        jobs.append(partial(run_collision, q, seed=seed, groups=groups))
    for q in (5, 7):
        jobs.append(partial(run_collision, q, mode="mc", seed=seed, groups=groups))
    jobs.append(partial(run_reduction, 3, seed=seed, groups=groups))
    return pmap(_guard, jobs)


def run_all(profile: str = "smoke", seed: int = 0, out_dir=None, groups: Groups = None) -> list[ExperimentReport]:
    """Run a suite; with ``out_dir`` also write reports and plot data."""
    if profile == "smoke":
        reps = smoke_suite(seed, groups)
    elif profile == "full":
        reps = full_suite(seed, groups)
    else:
        raise ValueError(f"unknown profile {profile!r}")
    if out_dir is not None:
        for r in reps:
            r.write(out_dir)
        write_plot_data(reps, out_dir, seed)
    return reps


def write_plot_data(reps: list[ExperimentReport], out_dir, seed: int) -> None:
    from pathlib import Path

    out = Path(out_dir)
    gam = [(r.params["q"], r.measured["gamma"]["value"]) for r in reps
           if r.experiment == "collision" and r.params.get("mode") == "exact" and r.params.get("a") is None]
    if gam:
        write_plot_csv(out / f"plot-q-vs-gamma-{seed}.csv", ("q", "gamma"), gam)
    tr = [(r.params["q"], r.measured["worst_stat_dist"]["value"]) for r in reps
          if r.experiment == "trace" and "worst_stat_dist" in r.measured]
    if tr:
        write_plot_csv(out / f"plot-q-vs-trace-distance-{seed}.csv", ("q", "stat_dist"), tr)
    for r in reps:
        if r.experiment == "nof" and "alpha_hat" in r.measured:
            rows = [(t, v["value"]) for t, v in r.measured["alpha_hat"].items()]
            write_plot_csv(out / f"plot-t-vs-alpha-k{r.params['k']}-{seed}.csv", ("t", "alpha_hat"), rows)
    mix = [(r.params["t"], r.measured["median_dev_mix_times_n"]["value"]) for r in reps if r.experiment == "mix2"]
    if mix:
        write_plot_csv(out / f"plot-t-vs-deviation-{seed}.csv", ("t", "median_dev_times_n"), mix)


def suite_status(reps: list[ExperimentReport]) -> int:
    """0 iff every hard check passed."""
    return 0 if all(r.hard_ok for r in reps) else 1

"""The ten acceptance criteria, one test each; every test prints a PASS/FAIL line."""

from __future__ import annotations

import itertools
import time

import numpy as np

from gmix import experiments as ex
from gmix import thresholds as th
from gmix.dist import dist_convolve, goodness, l2_norm, max_line_sum
from gmix.finite_field import field_of_order
from gmix.group import sl2_build
from gmix.interleave import box_norm, box_power_fraction, s_tuple_marginal
from gmix.sl2_verify import TraceExperimentSpec, collision_gamma, poly_count, square_sum_law, trace_dist
import oracles
from instances import random_pairwise_uniform, random_sparse


def _checks(rep):
    return {c.name: c.passed for c in rep.checks}


def test_criterion_1_group_audit(verdict):
    t0 = time.perf_counter()
    clauses = {}
    for q in (2, 3, 5, 7, 9, 11, 13):
        c = _checks(ex.run_group_audit(q))
        clauses[f"order[{q}]"] = c["order_q3_minus_q"]
        clauses[f"class_window[{q}]"] = c["class_count_window"]
        clauses[f"min_class[{q}]"] = c.get("min_nontrivial_class", True)
        if q % 2 == 1 and q >= 5:
            clauses[f"nongeneric_sizes[{q}]"] = c["nongeneric_class_sizes"]
    elapsed = time.perf_counter() - t0
    clauses["runtime_under_30s"] = elapsed < 30
    verdict(1, "group audit", clauses, seconds=round(elapsed, 1))


def test_criterion_2_counterexample_zeros(verdict):
    clauses = {}
    for q in (2, 3, 5):
        c = _checks(ex.run_counterexamples(q, seed=0))
        for name in ("xy_never_identity", "aya_never_identity", "aya_marginals_uniform", "diagonal_confined",
                     "diagonal_stat_dist"):
            clauses[f"{name}[{q}]"] = c[name]
    verdict(2, "counterexample zeros", clauses)


def _balanced(rng, n, layers):
    F = np.zeros((n, n), dtype=np.int64)
    for _ in range(layers):
        F[np.arange(n), rng.permutation(n)] += 1
    return F


def test_criterion_3_box_norm_identities(verdict):
    rng = np.random.default_rng(2024)
    shift_ok = True
    for _ in range(100):
        n, layers = int(rng.integers(2, 10)), int(rng.integers(1, 6))
        F = _balanced(rng, n, layers)
        shift_ok &= box_power_fraction(n * F - layers) == n**4 * box_power_fraction(F) - layers**4

    def l2(x):
        return float(np.sqrt(np.mean(x**2)))

    cs_ok = sq_ok = True
    for _ in range(1000):
        nx, ny = (int(v) for v in rng.integers(2, 9, 2))
        f, u, v = rng.normal(size=(nx, ny)), rng.normal(size=nx), rng.normal(size=ny)
        corr = abs(float(np.mean(f * u[:, None] * v[None, :])))
        bound = l2(u) * l2(v) * (1 + 1e-12)
        cs_ok &= corr <= box_norm(f, mode="exact").value * bound
        g = f @ f.T / ny
        sq_ok &= corr <= box_norm(g, mode="exact").value ** 0.5 * bound

    oracle_ok = True
    for shape in [(5, 6), (3, 4, 3), (2, 3, 2, 2), (7,), (4, 4)]:
        f = rng.normal(size=shape)
        got, want = box_norm(f, mode="exact").power, oracles.box_power(f)
        oracle_ok &= abs(got - want) <= 1e-12 * abs(want)
    verdict(3, "box-norm identities", {"balanced_shift_identity_100": shift_ok, "cauchy_schwarz_1000": cs_ok,
                                       "square_norm_bound_1000": sq_ok, "direct_oracle_1e-12": oracle_ok})


def test_criterion_4_reduction_chain(verdict):
    t0 = time.perf_counter()
    rep = ex.run_reduction(3, seed=0, n_pairs=100)
    elapsed = time.perf_counter() - t0
    c = _checks(rep)
    verdict(4, "reduction chain at q=3", {
        "row_column_averages": c["delta_row_sums"] and c["gamma_row_sums"],
        "centred_and_balanced": c["centred_square"] and c["balanced_box_identity"],
        "class_identity_100_pairs": c["class_identity_sampled_direct"] and c["class_identity_all_pairs"],
        "box_norm_bound": c["box_norm_bound"],
        "runtime_under_5min": elapsed < 300,
    }, gamma=rep.measured["gamma"], seconds=round(elapsed, 1))


def test_criterion_5_collision_statistic(verdict):
    t0 = time.perf_counter()
    G3 = sl2_build(3)
    O = oracles.OracleGroup(oracles.OracleField(3, 1, G3.field.modulus))
    g3 = collision_gamma(G3)
    oracle_ok = G3.order * g3.lhs_exact - 1 == oracles.collision_gamma(O)
    G5 = sl2_build(5)
    e5 = collision_gamma(G5)
    m5 = collision_gamma(G5, mode="mc", n_samples=10**7, seed=0)
    band_ok = abs(m5.lhs - e5.lhs) <= th.MC_SIGMAS * m5.stderr
    m7 = collision_gamma(sl2_build(7), mode="mc", n_samples=10**7, seed=0)
    elapsed = time.perf_counter() - t0
    verdict(5, "collision statistic", {
        "q3_matches_direct_loop": oracle_ok,
        "q5_exact_vs_mc_3sigma": band_ok,
        "gamma7_below_gamma3": m7.gamma < g3.gamma,
        "runtime_under_10min": elapsed < 600,
    }, gamma3=round(g3.gamma, 5), gamma5=round(e5.gamma, 5), gamma5_mc=round(m5.gamma, 5),
        gamma7_mc=round(m7.gamma, 5))


def test_criterion_6_trace_law(verdict):
    clauses = {}
    worst_sd = {}
    for q in (5, 7, 9, 11, 13):
        rep = ex.run_trace(q, seed=0)
        c = _checks(rep)
        clauses[f"max_cell_c1[{q}]"] = c["max_cell_within_c1"]
        clauses[f"zero_case_flagged[{q}]"] = c["odd_zero_case_flagged"]
        clauses[f"zero_case_far[{q}]"] = c["odd_zero_case_far"]
        worst_sd[q] = rep.measured["worst_stat_dist"]["value"]
    qs = sorted(worst_sd)
    for a, b in zip(qs, qs[1:]):
        clauses[f"non_increasing[{a}->{b}]"] = worst_sd[b] <= worst_sd[a]
    for q in (4, 8):
        F = field_of_order(q)
        clauses[f"even_zero_square_law[{q}]"] = bool(np.array_equal(
            trace_dist(TraceExperimentSpec(F, 0, 0)).counts, square_sum_law(F, sl2_build(q))))
    verdict(6, "trace law", clauses, worst_stat_dist={q: round(v, 4) for q, v in worst_sd.items()})


def test_criterion_7_point_counts(verdict):
    t0 = time.perf_counter()
    clauses = {}
    unexplained = {}
    for q in (5, 7, 9, 11, 13):
        F = field_of_order(q)
        x0 = within = True
        bad = {}
        for v, w in ex.generic_pairs(F):
            pc = poly_count(TraceExperimentSpec(F, v, w))
            x0 &= pc.x0_roots == q - 1
            exc = pc.exceptional(th.C2_POINT_COUNT)
            within &= all(pc.deviation[s] <= th.C2_POINT_COUNT * q**1.5 for s in range(q) if s not in exc)
            if pc.unexplained(th.C2_POINT_COUNT):
                bad[(v, w)] = sorted(pc.unexplained(th.C2_POINT_COUNT))
        clauses[f"x0_slice[{q}]"] = x0
        clauses[f"c2_bound_non_exceptional[{q}]"] = within
        clauses[f"exceptional_in_candidates[{q}]"] = not bad
        if bad:
            unexplained[q] = bad
    elapsed = time.perf_counter() - t0
    clauses["runtime_under_10min"] = elapsed < 600
    verdict(7, "point counts", clauses, unexplained=unexplained)


def test_criterion_8_goodness_calculus(verdict):
    G = sl2_build(3)
    n = G.order
    rng = np.random.default_rng(8)
    sq = fact = lines = descend = True
    for i in range(30):
        if i % 2:
            mu, nu = random_pairwise_uniform(G, rng), random_pairwise_uniform(G, rng)
        else:
            mu, nu = random_sparse(G, 3, rng, support=200), random_sparse(G, 3, rng, support=200)
        conv = dist_convolve(mu, nu)
        for k in (1, 2, 3):
            e1, e2 = goodness(mu, k).eps_exact, goodness(nu, k).eps_exact
            sq &= goodness(conv, k).eps_exact <= max(e1, e2) ** 2
            if k > 1:
                descend &= goodness(mu, k - 1).eps_exact <= e1
        lhs = int(conv.counts.max()) ** 2
        rhs = int((mu.counts.astype(object) ** 2).sum()) * int((nu.counts.astype(object) ** 2).sum())
        fact &= lhs <= rhs and conv.weights.max() <= l2_norm(mu) * l2_norm(nu) * (1 + 1e-12)
        if i % 2:
            lines &= max_line_sum(conv.counts, n, 3) * n * n <= conv.denom
    rep = ex.run_boost(3, 3, seed=0)
    c = _checks(rep)
    verdict(8, "goodness calculus", {
        "squaring": sq, "linf_l2_fact": fact, "line_sums_preserved": lines, "k_descent": descend,
        "boost_reaches_1/n": c["reaches_one_over_n"],
        "squaring_block_reaches_1/n^2": c["squaring_block_reaches_one_over_n2"],
    }, r=rep.measured["r_one_over_n"]["value"])


def test_criterion_9_nof_distribution(verdict):
    G = sl2_build(3)
    pair_ok = True
    for k in (2, 3):
        for cp in itertools.combinations(range(1 << k), 2):
            pair_ok &= goodness(s_tuple_marginal(G, k, cp), 2).eps_exact == 0
    rep = ex.run_nof(3, 2, ts=(1, 2, 4), seed=0, n_protocols=50)
    c = _checks(rep)
    verdict(9, "NOF distribution", {
        "pairwise_uniform_k2_k3": pair_ok,
        "alpha_strictly_decreasing": c["alpha_strictly_decreasing"],
        "discrepancy_within_bound_50": c["discrepancy_within_box_bound"] and len(rep.measured["protocols"]) == 50,
    }, alpha_hat={t: round(v["value"], 5) for t, v in rep.measured["alpha_hat"].items()})


def test_criterion_10_determinism_and_faults(verdict):
    a = [r.to_json() for r in ex.smoke_suite(123)]
    b = [r.to_json() for r in ex.smoke_suite(123)]
    G = sl2_build(3)
    rng = np.random.default_rng(10)
    tripped = []
    for _ in range(3):
        x, y = (int(v) for v in rng.integers(0, G.order, 2))
        z = int((G.mul_table[x, y] + rng.integers(1, G.order)) % G.order)
        reps = ex.smoke_suite(0, groups={3: G.with_table_entry(x, y, z)})
        tripped.append(ex.suite_status(reps) == 1)
    verdict(10, "determinism and fault sensitivity", {
        "byte_identical": a == b, "corruptions_tripped": all(tripped)})

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gmix.finite_field import field_of_order
from gmix.group import sl2_build
from gmix.sl2_verify import (
    TraceExperimentSpec, class_product_counts, class_product_report, collision_gamma, collision_lhs,
    collision_per_class, exceptional_candidates, f_second, mat_entries, poly_count, quartic,
    reducible_locus_candidates, reduction_identity_check, square_sum_law, structure_constants,
    trace_direct, trace_dist, trace_expr, trace_law, trace_of_conjugated, trace_to_class_check,
)
import oracles


def _ofield(q):
    F = field_of_order(q)
    return oracles.OracleField(F.p, F.e, F.modulus)


def test_trace_closed_form_exhaustive_q3(G3):
    n = G3.order
    a, g, u = (x.ravel() for x in np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij"))
    assert np.array_equal(trace_of_conjugated(G3, a, g, u), trace_direct(G3, a, g, u))


@given(st.sampled_from([4, 5, 7, 8, 9, 11]), st.data())
def test_trace_closed_form_random(q, data):
    G = sl2_build(q)
    a, g, u = (data.draw(st.integers(0, G.order - 1)) for _ in range(3))
    assert trace_of_conjugated(G, a, g, u) == trace_direct(G, a, g, u)


@pytest.mark.parametrize("q", [3, 4, 5])
def test_expanded_polynomial_matches_matrix_oracle(q):
    G = sl2_build(q)
    F = G.field
    O = _ofield(q)
    u = mat_entries(G, np.arange(G.order))
    for v in range(q):
        for w in range(q):
            ours = np.bincount(f_second(F, v, w, u), minlength=q).tolist()
            assert ours == oracles.trace_counts(O, v, w)
            spec = TraceExperimentSpec(F, v, w)
            assert trace_dist(spec, G).counts.tolist() == ours


def test_matrices_have_determinant_minus_one():
    F = field_of_order(7)
    for v, w in [(0, 0), (1, 2), (6, 3)]:
        A, B = TraceExperimentSpec(F, v, w).matrices()
        for m in (A, B):
            assert F.sub(F.mul(m[0], m[3]), F.mul(m[1], m[2])) == F.from_int(-1)


def test_exclusion_flags():
    F5 = field_of_order(5)
    # -4 = 1 mod 5, so (v^2, w^2) = (1, 1) is excluded
    flagged = {(v, w) for v in range(5) for w in range(5) if TraceExperimentSpec(F5, v, w).excluded}
    assert flagged == {(0, 0), (1, 1), (1, 4), (4, 1), (4, 4)}
    F4 = field_of_order(4)
    assert not any(TraceExperimentSpec(F4, v, w).excluded for v in range(4) for w in range(4))
    with pytest.raises(ValueError):
        TraceExperimentSpec(F5, 5, 0)
    with pytest.raises(ValueError):
        TraceExperimentSpec(F5, 1, 0, mode="fast")


@pytest.mark.parametrize("q", [2, 4, 8])
def test_even_zero_case_is_square_law(q):
    G = sl2_build(q)
    F = G.field
    assert np.array_equal(trace_dist(TraceExperimentSpec(F, 0, 0), G).counts, square_sum_law(F, G))
    # oracle: (u1 - u2 - u3 + u4)^2 straight from the matrices
    O = _ofield(q)
    cnt = [0] * q
    for u in oracles.sl2_elements(O):
        s = O.add(O.sub(O.sub(u[0], u[1]), u[2]), u[3])
        cnt[O.mul(s, s)] += 1
    assert square_sum_law(F, G).tolist() == cnt


def test_trace_mc_agrees(G3):
    F = field_of_order(7)
    ex = trace_dist(TraceExperimentSpec(F, 1, 2))
    mc = trace_dist(TraceExperimentSpec(F, 1, 2, mode="mc", n_samples=300_000, seed=4))
    se = np.sqrt(mc.probs * (1 - mc.probs) / 300_000)
    assert (np.abs(mc.probs - ex.probs) < 5 * se + 1e-9).all()
    assert mc.stat_dist_exact >= 0 and ex.stat_dist == pytest.approx(float(ex.stat_dist_exact))


def test_trace_law_conjugation_invariant(G3):
    h, g = 5, 11
    for x in range(0, 24, 5):
        assert np.array_equal(trace_law(G3, h, g), trace_law(G3, G3.conj(x, h), g))
        assert np.array_equal(trace_law(G3, h, g), trace_law(G3, h, G3.conj(x, g)))


# -- point counts ------------------------------------------------------------------------

GENERIC = [(5, 1, 2), (5, 2, 3), (7, 1, 1), (7, 1, 3), (9, 1, 2), (11, 1, 1), (13, 1, 3)]


@pytest.mark.parametrize("q,v,w", GENERIC)
def test_point_counts_reconcile_with_trace_oracle(q, v, w):
    G = sl2_build(q)
    F = G.field
    pc = poly_count(TraceExperimentSpec(F, v, w), G)
    assert pc.x0_roots == q - 1
    assert pc.reconciled
    if q <= 7:
        # independent route: matrices with u1 != 0 and trace -s
        O = _ofield(q)
        A, B = (0, 1, 1, w), (v, 1, 1, 0)
        want = [q - 1] * q
        for u in oracles.sl2_elements(O):
            if u[0] != 0:
                t = oracles.trace(O, oracles.mat_mul(O, A, oracles.mat_mul(O, u, oracles.mat_mul(O, B, oracles.mat_inv(O, u)))))
                want[O.neg(t)] += 1
        assert pc.N_s.tolist() == want


def test_candidate_set_contents():
    F = field_of_order(7)
    # v = 1, w = 2: {0, 1, 2, 1/2 + 2} plus roots of -2 s^2 + 6 s + 2 = 0 (mod 7)
    cands = exceptional_candidates(F, 1, 2)
    assert {0, 1, 2, F.add(F.div(1, 2), 2)} <= cands
    for s in range(7):
        val = (-2 * s * s + (2 * 5 - 4) * s + (-8 + 2 * 5)) % 7
        assert (s in cands) == (val == 0 or s in {0, 1, 2, F.add(F.div(1, 2), 2)})


def test_reducible_locus_roots():
    F = field_of_order(13)
    extra = reducible_locus_candidates(F, 1, 3) - exceptional_candidates(F, 1, 3)
    # s^2 + 3 s - 14 = 0 mod 13
    assert extra and all((s * s + 3 * s - 14) % 13 == 0 for s in extra)
    assert 5 in extra


def test_extra_exceptional_value_splits_over_extension():
    """At q = 13, (v, w) = (1, 3), s = 5 the quartic has about 2 q^4 points over F_{q^2}."""
    q = 13
    K = field_of_order(q * q)
    r = np.arange(K.q)
    x, y, z = (a.ravel() for a in np.meshgrid(r, r, r, indexing="ij"))
    count = 0
    for lo in range(0, len(x), 1 << 21):
        sl = slice(lo, lo + (1 << 21))
        count += int((quartic(K, 1, 3, 5, x[sl], y[sl], z[sl]) == 0).sum())
    assert count > 1.5 * q**4
    generic = 0
    for lo in range(0, len(x), 1 << 21):
        sl = slice(lo, lo + (1 << 21))
        generic += int((quartic(K, 1, 3, 2, x[sl], y[sl], z[sl]) == 0).sum())
    assert abs(generic - q**4) < 0.5 * q**4


@pytest.mark.parametrize("q", [5, 7, 9, 11, 13])
def test_reducible_locus_explains_all_exceptions(q):
    from gmix.experiments import generic_pairs
    from gmix import thresholds as th

    F = field_of_order(q)
    for v, w in generic_pairs(F):
        pc = poly_count(TraceExperimentSpec(F, v, w))
        assert pc.exceptional(th.C2_POINT_COUNT) <= reducible_locus_candidates(F, v, w)


# -- class products and the collision statistic -----------------------------------------

@pytest.mark.parametrize("q", [3, 4, 5])
def test_structure_constants_by_direct_conjugation(q):
    G = sl2_build(q)
    n = G.order
    a = structure_constants(G)
    assert np.array_equal(a.sum(axis=1), np.repeat(G.class_sizes[:, None], len(G.classes), axis=1))
    rng = np.random.default_rng(q)
    u = np.arange(n)
    for _ in range(4):
        g, h = (int(x) for x in rng.integers(0, n, 2))
        counts, denom = class_product_counts(G, g, h)
        cg = np.unique(G.conj(u, np.full(n, g)))
        ch = np.unique(G.conj(u, np.full(n, h)))
        direct = np.bincount(G.mul(cg[:, None], ch[None, :]).ravel(), minlength=n)
        assert denom == len(cg) * len(ch) and np.array_equal(counts, direct)


def test_class_product_report_fields(G3):
    r = class_product_report(G3, 3, 7)
    assert 0 <= r["stat_dist_to_uniform"] <= 1
    assert r["q_times_max_class_prob"] == pytest.approx(3 * r["max_class_prob"])
    c = trace_to_class_check(G3, 3, 7)
    assert set(c) == {"trace_dist", "class_dist"}


def test_collision_matches_direct_loop(G3):
    O = oracles.OracleGroup(_ofield(3))
    assert 24 * collision_gamma(G3).lhs_exact - 1 == oracles.collision_gamma(O)


# gamma = |G| E_a LHS(a) - 1; q = 3 confirmed by the direct loop above, q = 5 by sampling
GAMMA = {3: Fraction(2851, 1296), 5: Fraction(345331, 2160000)}


@pytest.mark.parametrize("q", sorted(GAMMA))
def test_frozen_gamma(q):
    G = sl2_build(q)
    v = collision_gamma(G)
    assert G.order * v.lhs_exact - 1 == GAMMA[q]
    per = collision_per_class(G)
    avg = sum(Fraction(c.size, G.order) * Fraction(r["gamma"]) for c, r in zip(G.classes, per))
    assert float(avg) == pytest.approx(float(GAMMA[q]), rel=1e-12)


def test_collision_mc_band():
    G = sl2_build(5)
    ex = collision_gamma(G)
    mc = collision_gamma(G, mode="mc", n_samples=2_000_000, seed=3)
    assert abs(mc.lhs - ex.lhs) < 4 * mc.stderr
    one = collision_lhs(G, 7, mode="mc", n_samples=500_000, seed=1)
    assert abs(one.lhs - collision_lhs(G, 7).lhs) < 4 * one.stderr


def test_collision_lower_bound():
    for q in (2, 3, 4, 5, 7):
        G = sl2_build(q)
        assert collision_gamma(G).lhs_exact >= Fraction(1, G.order)


@pytest.mark.parametrize("q", [2, 3])
def test_reduction_chain(q):
    r = reduction_identity_check(sl2_build(q), n_pairs=20)
    assert r.ok, r.checks

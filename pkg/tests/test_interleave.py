from __future__ import annotations

import itertools
import json
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gmix.dist import Carrier, SubsetIndicator, goodness, random_subset
from gmix.group import sl2_build
from gmix.interleave import (
    Protocol, ProtocolError, box_norm, box_norm_of_d_mc, box_power_fraction, box_power_from_mu,
    box_power_from_mu_exact, conditioned_enumeration, constant_protocol, d_table, dist_interleaved2,
    eps_vectors, input_axes, interleaved2, interleavedK, mu_tuple_dist, mu_tuple_mc, product_grid,
    product_protocol, protocol_discrepancy, random_protocol, s_tuple_dist, s_tuple_marginal,
    sample_conditioned,
)
import oracles

seeds = st.integers(0, 2**32 - 1)


def test_interleaved_products(G3):
    a, b = [1, 2, 3], [4, 5, 6]
    want = G3.prod([1, 4, 2, 5, 3, 6])
    assert interleaved2(G3, a, b) == want
    assert interleavedK(G3, [a, b]) == want
    batch = np.array([[a, b], [b, a]])
    assert interleavedK(G3, batch).tolist() == [want, G3.prod([4, 1, 5, 2, 6, 3])]
    with pytest.raises(ValueError):
        interleaved2(G3, [1], [1, 2])


def test_interleaved_law_matches_loop(G2):
    c = Carrier(G2, 2)
    rng = np.random.default_rng(0)
    A = random_subset(c, 0.4, rng)
    B = random_subset(c, 0.6, rng)
    law = dist_interleaved2(A, B)
    cnt = Counter()
    for x in A.members():
        for y in B.members():
            cnt[interleaved2(G2, c.decode(int(x)), c.decode(int(y)))] += 1
    assert law.denom == A.cardinality * B.cardinality
    assert {g: int(law.counts[g]) for g in range(6) if law.counts[g]} == dict(cnt)


def test_interleaved_mc_within_band(G3):
    c = Carrier(G3, 2)
    rng = np.random.default_rng(1)
    A, B = random_subset(c, 0.3, rng), random_subset(c, 0.3, rng)
    ex = dist_interleaved2(A, B)
    mc = dist_interleaved2(A, B, "mc", n_samples=400_000, seed=5)
    z = np.abs(mc.weights - ex.weights) / mc.stderr
    assert z.max() < 5


def test_full_sets_give_uniform(G3):
    c = Carrier(G3, 2)
    full = SubsetIndicator(c, np.ones(c.size, bool))
    law = dist_interleaved2(full, full)
    assert len(set(law.counts.tolist())) == 1


# -- s-tuples and the mu law ----------------------------------------------------------

def test_eps_vector_order():
    assert eps_vectors(2) == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_mu_law_matches_enumeration_q2_t2(G2):
    """Direct enumeration of all 6^8 choices of the eight G^2-entries."""
    mu = mu_tuple_dist(G2, 2, 2)
    want = oracles.mu_law(lambda a, b: int(G2.mul(a, b)), G2.identity, 6, 2, 2)
    assert mu.denom == 6**8 and sum(want.values()) == 6**8
    assert len(want) == np.count_nonzero(mu.counts)
    assert all(int(mu.counts[mu.carrier.encode(k)]) == v for k, v in want.items())


def test_mu_law_matches_enumeration_q3_t1(G3):
    mu = mu_tuple_dist(G3, 2, 1)
    want = oracles.mu_law(lambda a, b: int(G3.mul(a, b)), G3.identity, 24, 2, 1)
    assert all(int(mu.counts[mu.carrier.encode(k)]) * 24**4 == v * mu.denom for k, v in want.items())
    assert s_tuple_dist(G3, 2).counts.tolist() == mu.counts.tolist()


def test_mu_mc_cross_check(G3):
    mu = mu_tuple_dist(G3, 2, 2)
    emp = mu_tuple_mc(G3, 2, 2, 400_000, seed=8)
    # four coordinates; check every single-coordinate and pair marginal
    for coords in [(0,), (3,), (0, 3), (1, 2)]:
        from gmix.dist import marginal

        e, m = marginal(emp, coords), marginal(mu, coords)
        z = np.abs(e.weights - m.weights) / np.maximum(e.stderr, 1e-9)
        assert z.max() < 5.5


@pytest.mark.parametrize("k", [2, 3])
def test_s_tuple_pairwise_uniform(G3, k):
    for pair in itertools.combinations(range(1 << k), 2):
        assert goodness(s_tuple_marginal(G3, k, pair), 2).eps_exact == 0


def test_s_tuple_marginal_rejects_bad_coords(G3):
    with pytest.raises(ValueError):
        s_tuple_marginal(G3, 2, (2, 1))
    with pytest.raises(ValueError):
        s_tuple_marginal(G3, 2, (0, 4))


# goodness of the mu law at q = 3, k = 2, frozen from the exact runs
ALPHA_HAT = {1: Fraction(23), 2: Fraction(6)}


def test_frozen_alpha_hat(G3):
    for t, want in ALPHA_HAT.items():
        assert goodness(mu_tuple_dist(G3, 2, t), 4).eps_exact == want


# -- box norm ------------------------------------------------------------------------

@settings(max_examples=25)
@given(seeds, st.sampled_from([(5, 6), (3, 4, 3), (2, 3, 2, 2), (7,)]))
def test_box_norm_matches_direct_oracle(seed, shape):
    f = np.random.default_rng(seed).normal(size=shape)
    got = box_norm(f, mode="exact")
    want = oracles.box_power(f)
    assert abs(got.power - want) <= 1e-12 * max(abs(want), 1e-300) + 1e-15


def test_box_norm_mc_band():
    f = np.random.default_rng(3).normal(size=(6, 5, 4))
    ex = box_norm(f, mode="exact")
    mc = box_norm(f, mode="mc", n_samples=300_000, seed=1)
    assert abs(mc.power - ex.power) < 4 * mc.stderr


def test_box_norm_auto_switch():
    f = np.ones((10, 10))
    assert box_norm(f).mode == "exact"
    assert box_norm(f, budget=10, n_samples=1000).mode == "mc"
    assert box_norm(f).value == pytest.approx(1.0)


def _correlation_instance(rng, nx=6, ny=5):
    f = rng.normal(size=(nx, ny))
    u = rng.normal(size=nx)
    v = rng.normal(size=ny)
    return f, u, v


def _l2(x):
    return float(np.sqrt(np.mean(np.asarray(x) ** 2)))


@given(seeds)
def test_box_norm_bounds_product_correlation(seed):
    f, u, v = _correlation_instance(np.random.default_rng(seed))
    corr = abs(float(np.mean(f * u[:, None] * v[None, :])))
    assert corr <= box_norm(f, mode="exact").value * _l2(u) * _l2(v) * (1 + 1e-12)


@given(seeds)
def test_square_box_norm_bounds_correlation(seed):
    f, u, v = _correlation_instance(np.random.default_rng(seed))
    g = f @ f.T / f.shape[1]
    corr = abs(float(np.mean(f * u[:, None] * v[None, :])))
    assert corr <= box_norm(g, mode="exact").value ** 0.5 * _l2(u) * _l2(v) * (1 + 1e-12)


def balanced_table(rng, n: int, layers: int) -> np.ndarray:
    """Sum of random permutation matrices: every row and column sums to ``layers``."""
    F = np.zeros((n, n), dtype=np.int64)
    for _ in range(layers):
        F[np.arange(n), rng.permutation(n)] += 1
    return F


@given(seeds, st.integers(2, 9), st.integers(1, 5))
def test_balanced_shift_identity_exact(seed, n, layers):
    F = balanced_table(np.random.default_rng(seed), n, layers)
    # with delta = layers / n, n f = n F - layers is an integer table
    lhs = box_power_fraction(n * F - layers)
    rhs = n**4 * box_power_fraction(F) - layers**4
    assert lhs == rhs


def test_box_power_fraction_rejects_floats():
    with pytest.raises(ValueError):
        box_power_fraction(np.ones((2, 2)))


# -- the d table and the mu route to its box norm --------------------------------------

@pytest.mark.parametrize("t", [1, 2])
def test_d_box_power_equals_mu_sum(G3, t):
    mu = mu_tuple_dist(G3, 2, t)
    prods = product_grid(G3, 2, t)
    rng = np.random.default_rng(t)
    for _ in range(3):
        g, h = (int(x) for x in rng.choice(24, 2, replace=False))
        direct = box_norm(d_table(prods, g, h), mode="exact").power
        via_mu = box_power_from_mu_exact(mu, g, h)
        assert abs(direct - float(via_mu)) <= 1e-12 * float(via_mu)
        assert abs(box_power_from_mu(mu, g, h) - float(via_mu)) <= 1e-12 * float(via_mu)


def test_frozen_d_box_power(G3):
    # q = 3, k = 2, t = 2, (g, h) = (identity, -identity); frozen from the 576 x 576 d table
    mu = mu_tuple_dist(G3, 2, 2)
    assert box_power_from_mu_exact(mu, G3.identity, G3.neg_identity) == Fraction(1, 6912)


def test_d_box_power_mc(G3):
    mu = mu_tuple_dist(G3, 2, 2)
    est = box_norm_of_d_mc(G3, 2, 2, 0, 1, 400_000, seed=2)
    assert abs(est.power - box_power_from_mu(mu, 0, 1)) < 4 * est.stderr


# -- protocols -----------------------------------------------------------------------

@given(seeds, st.sampled_from([(2, 6), (3, 4), (2, 9)]), st.integers(0, 4))
def test_random_protocol_partitions(seed, kn, bits):
    k, n = kn
    P = random_protocol(k, n, bits, np.random.default_rng(seed))
    P.check_partition()
    assert P.num_leaves == 2**bits
    grid = sum(P.leaf_indicator(j).astype(int) for j in range(P.num_leaves))
    assert (grid == 1).all()


def test_protocol_json_round_trip():
    P = random_protocol(3, 4, 3, np.random.default_rng(0))
    Q = Protocol.from_json(json.dumps(P.to_json()))
    assert np.array_equal(P.evaluate(), Q.evaluate())
    R = Protocol.from_json({"k": 2, "axis_size": 3, "leaves": [
        {"rectangle": [[0, 1], [0, 1, 2]], "output": 1},
        {"rectangle": [[2], [0, 1, 2]], "output": 0}]})
    assert R.evaluate().tolist() == [[1, 1, 1], [1, 1, 1], [0, 0, 0]]


def test_overlapping_leaves_rejected():
    with pytest.raises(ProtocolError):
        Protocol.from_json({"k": 2, "axis_size": 2, "leaves": [
            {"rectangle": [[0, 1], [0, 1]]}, {"rectangle": [[0], [0]]}]})
    with pytest.raises(ProtocolError):
        Protocol.from_json({"k": 2, "axis_size": 2, "leaves": [{"rectangle": [[0, 5], [0, 1]]}]})


def test_product_protocol_evaluates_to_product():
    A = np.array([1, 0, 1, 1], bool)
    B = np.array([0, 1, 1], bool)
    with pytest.raises(ProtocolError):
        product_protocol(A, B)
    B = np.array([0, 1, 1, 0], bool)
    assert np.array_equal(product_protocol(A, B).evaluate(), np.outer(A, B))


def test_conditioned_inputs(G3):
    rng = np.random.default_rng(0)
    x = sample_conditioned(G3, 3, 2, 7, rng, 1000)
    assert (interleavedK(G3, x) == 7).all()
    full = conditioned_enumeration(G3, 2, 1, 7)
    brute = {(a, b) for a in range(24) for b in range(24) if G3.mul(a, b) == 7}
    assert {(int(r[0, 0]), int(r[1, 0])) for r in full} == brute
    assert len(full) == 24


def _brute_p(G, P, g):
    """E[P(x) | product = g] by scanning every input at t = 1."""
    n = G.order
    tot = hit = 0
    for xs in itertools.product(range(n), repeat=P.k):
        if G.prod(list(xs)) == g:
            tot += 1
            hit += int(P.evaluate([np.array([v]) for v in xs])[0])
    return Fraction(hit, tot)


def test_discrepancy_matches_brute_force(G2):
    P = random_protocol(3, 6, 3, np.random.default_rng(4))
    r = protocol_discrepancy(G2, P, 1, 0, 1, mode="exact")
    assert r.p_g == pytest.approx(float(_brute_p(G2, P, 0)), abs=1e-15)
    assert r.p_h == pytest.approx(float(_brute_p(G2, P, 1)), abs=1e-15)
    assert r.within_bound


def test_discrepancy_mc_matches_exact(G3):
    P = random_protocol(2, 24, 2, np.random.default_rng(6))
    ex = protocol_discrepancy(G3, P, 1, 2, 9, mode="exact")
    mc = protocol_discrepancy(G3, P, 1, 2, 9, mode="mc", n_samples=200_000, seed=1, box_mode="exact")
    assert abs(ex.p_g - mc.p_g) < 0.02 and abs(ex.discrepancy - mc.discrepancy) < 5 * mc.stderr + 1e-3
    assert mc.box_norm_d == pytest.approx(ex.box_norm_d)


def test_constant_protocol_has_no_discrepancy(G3):
    r = protocol_discrepancy(G3, constant_protocol(2, 24), 1, 0, 5)
    assert r.discrepancy == 0 and r.leaves == 1


def test_input_axes(G3):
    x = np.array([[[1, 2], [3, 4]]])
    axes = input_axes(G3, x)
    c = Carrier(G3, 2)
    assert [int(a[0]) for a in axes] == [c.encode((1, 2)), c.encode((3, 4))]

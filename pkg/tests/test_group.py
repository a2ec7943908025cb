from __future__ import annotations

from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gmix.group import GroupTooLarge, SL2, class_census, classes, sl2_build
from gmix.finite_field import field_of_order
from oracles import OracleField, OracleGroup, conjugacy_classes


def _oracle(q):
    F = field_of_order(q)
    return OracleGroup(OracleField(F.p, F.e, F.modulus))


@pytest.mark.parametrize("q", [2, 3, 4, 5])
def test_multiplication_matches_oracle(q):
    G = sl2_build(q)
    O = _oracle(q)
    # map oracle indices to package indices through the matrix entries
    to_pkg = np.array([G.index_of(*m) for m in O.elements])
    assert sorted(to_pkg.tolist()) == list(range(G.order))
    table = np.array(O.table)
    assert np.array_equal(G.mul(to_pkg[:, None], to_pkg[None, :]), to_pkg[table])
    assert np.array_equal(G.inv(to_pkg), to_pkg[O.inverse])


@pytest.mark.parametrize("q", [2, 3, 4, 5])
def test_classes_match_oracle(q):
    G = sl2_build(q)
    F = field_of_order(q)
    ours = {frozenset(G.matrix(int(x)) for x in c.members) for c in G.classes}
    theirs = set(conjugacy_classes(OracleField(F.p, F.e, F.modulus)))
    assert ours == theirs


# class counts and sizes, frozen from the oracle runs above
CENSUS = {
    2: [1, 2, 3],
    3: [1, 1, 4, 4, 4, 4, 6],
    4: [1, 12, 15, 20, 12],
    5: [1, 1, 12, 12, 12, 12, 20, 20, 30],
}


@pytest.mark.parametrize("q", sorted(CENSUS))
def test_frozen_census(q):
    G = sl2_build(q)
    assert Counter(int(s) for s in G.class_sizes) == Counter(CENSUS[q])


@pytest.mark.parametrize("q", [2, 3, 4, 5, 7, 8, 9, 11, 13])
def test_order_and_class_count(q):
    G = sl2_build(q)
    assert G.order == q**3 - q
    expected = q + 4 if q % 2 else q + 1
    assert len(G.classes) == expected
    assert int(G.class_sizes.sum()) == G.order


@pytest.mark.parametrize("q", [3, 5, 7, 9])
def test_trace_class_function(q):
    G = sl2_build(q)
    for c in G.classes:
        assert len(set(G.trace_table[c.members].tolist())) == 1
        assert c.trace == G.trace(c.representative)


def test_central_elements():
    for q in (3, 5, 7):
        G = sl2_build(q)
        central = [x for x in range(G.order) if G.is_central(x)]
        assert sorted(central) == sorted({G.identity, G.neg_identity})
    G = sl2_build(4)
    assert G.identity == G.neg_identity


def test_census_payload():
    c = class_census(sl2_build(5))
    assert c["order"] == 120 and c["num_classes"] == 9
    assert c["min_nontrivial_size"] == 12
    assert c["num_trivial_classes"] == 2
    assert classes(sl2_build(5)) is sl2_build(5).classes


def test_perms_are_rows_and_columns(G3):
    for z in (0, 5, 17):
        assert np.array_equal(G3.right_mult_perm(z), G3.mul(np.arange(24), z))
        assert np.array_equal(G3.left_mult_perm(z), G3.mul(z, np.arange(24)))


def test_direct_product_path_matches_table():
    F = field_of_order(5)
    a = SL2(F, mul_table=False)
    b = sl2_build(5)
    x, y = np.meshgrid(np.arange(120), np.arange(120), indexing="ij")
    assert np.array_equal(a.mul(x, y), b.mul(x, y))


def test_oversized_group_refused():
    with pytest.raises(GroupTooLarge):
        sl2_build(field_of_order(256))


def test_corrupted_table_is_a_copy(G3):
    before = int(G3.mul(1, 2))
    z = (before + 1) % G3.order
    bad = G3.with_table_entry(1, 2, z)
    assert bad.mul(1, 2) == z
    assert G3.mul(1, 2) == before
    assert bad is not sl2_build(3)


@given(st.sampled_from([5, 7, 8, 9, 11, 13]), st.data())
def test_group_axioms_random(q, data):
    G = sl2_build(q)
    x, y, z = (data.draw(st.integers(0, G.order - 1)) for _ in range(3))
    assert G.mul(G.mul(x, y), z) == G.mul(x, G.mul(y, z))
    assert G.mul(x, G.inv(x)) == G.identity
    assert G.mul(G.identity, x) == x
    # trace is a class function
    assert G.trace(G.conj(y, x)) == G.trace(x)
    assert G.class_id[G.conj(y, x)] == G.class_id[x]
    # det 1 and inverse as the adjugate
    a1, a2, a3, a4 = G.matrix(x)
    F = G.field
    assert F.sub(F.mul(a1, a4), F.mul(a2, a3)) == 1
    assert G.matrix(G.inv(x)) == (a4, F.neg(a2), F.neg(a3), a1)

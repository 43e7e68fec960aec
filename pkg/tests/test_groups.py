import itertools
from math import gcd, lcm

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cosetshift.errors import (
    DuplicateElementError,
    GroupError,
    NoIdentityError,
    NoInverseError,
    NonAssociativeError,
    NotAutomorphismError,
)
from cosetshift.groups import (
    automorphism_order,
    build_automorphism,
    build_group,
    coset_labels,
    cosets,
    cyclic_sum,
    direct_product,
    image_subgroup,
    intersect,
    is_normal,
    is_subgroup,
    multiplication_automorphism,
    orbits,
    permutation_cycles,
    subgroup_from_members,
    subgroup_generated,
    symmetric_group,
    whole_group,
)
from models import small_groups


def test_small_group_tables_are_groups():
    for name, g in small_groups().items():
        t = g.table
        assert sorted(set(t.ravel().tolist())) == list(range(g.order)), name
        for a in range(g.order):
            assert g.mul(a, g.inv(a)) == g.identity
            assert g.mul(g.identity, a) == a


def test_cyclic_sum_names_and_order():
    g = cyclic_sum([4, 2])
    assert g.elements[:5] == ("0.0", "1.0", "2.0", "3.0", "0.1")
    assert g.mul(g.index("3.1"), g.index("2.1")) == g.index("1.0")


def test_symmetric_group_is_nonabelian():
    g = symmetric_group(3)
    assert g.order == 6
    assert not np.array_equal(g.table, g.table.T)


@pytest.mark.parametrize("elements, table, err", [
    (["a", "a"], [[0, 1], [1, 0]], DuplicateElementError),
    (["a", "b"], [[1, 1], [1, 1]], NoIdentityError),
    (["e", "a", "b"], [[0, 1, 2], [1, 1, 1], [2, 1, 0]], NoInverseError),
    (["e", "a", "b"], [[0, 1, 2], [1, 0, 0], [2, 0, 0]], GroupError),
])
def test_bad_tables(elements, table, err):
    with pytest.raises(err):
        build_group(elements, table)


def test_non_associative_loop():
    # a Latin square with identity 0 that is not associative (order 5 loop)
    table = [[0, 1, 2, 3, 4],
             [1, 0, 3, 4, 2],
             [2, 4, 0, 1, 3],
             [3, 2, 4, 0, 1],
             [4, 3, 1, 2, 0]]
    with pytest.raises(NonAssociativeError):
        build_group("abcde", table)


def test_table_by_names():
    g = build_group(["e", "x"], [["e", "x"], ["x", "e"]])
    assert g.mul(1, 1) == 0


def test_subgroups_and_cosets():
    g = cyclic_sum([4, 2])
    h = subgroup_generated(g, [g.index("2.0")])
    assert h.names() == ["0.0", "2.0"]
    blocks = cosets(g, h)
    assert len(blocks) == 4
    assert sorted(x for b in blocks for x in b) == list(range(8))
    _, lab = coset_labels(g, h)
    for b_i, b in enumerate(blocks):
        assert all(lab[x] == b_i for x in b)
    with pytest.raises(GroupError):
        subgroup_from_members(g, [0, 1])


def test_left_and_right_cosets_differ_in_s3():
    g = symmetric_group(3)
    h = subgroup_generated(g, [g.index("102")])
    assert not is_normal(g, h)
    assert cosets(g, h, "left") != cosets(g, h, "right")
    assert is_normal(g, subgroup_generated(g, [g.index("120")]))


def test_direct_product_indexing():
    a, b = cyclic_sum([2]), cyclic_sum([3])
    p = direct_product(a, b)
    for x1, y1, x2, y2 in itertools.product(range(2), range(3), range(2), range(3)):
        assert p.mul(x1 * 3 + y1, x2 * 3 + y2) == a.mul(x1, x2) * 3 + b.mul(y1, y2)


def test_automorphisms():
    g = cyclic_sum([9])
    t = multiplication_automorphism(g, 2)
    assert automorphism_order(t) == 6
    assert sorted(len(o) for o in orbits(t)) == [1, 2, 6]
    with pytest.raises(NotAutomorphismError):
        build_automorphism(g, [0, 2, 1, 3, 4, 5, 6, 7, 8])
    with pytest.raises(NotAutomorphismError):
        build_automorphism(g, {"0": "0"})
    h = subgroup_generated(g, [3])
    assert image_subgroup(t, h).members == h.members


def test_permutation_cycles():
    assert permutation_cycles([1, 2, 0, 4, 3, 5]) == [(0, 1, 2), (3, 4), (5,)]


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(sorted(small_groups())), st.lists(st.integers(0, 7), max_size=3),
       st.lists(st.integers(0, 7), max_size=3))
def test_generated_subgroups_property(name, s1, s2):
    g = small_groups()[name]
    h1 = subgroup_generated(g, [s % g.order for s in s1])
    h2 = subgroup_generated(g, [s % g.order for s in s2])
    assert is_subgroup(g, h1.members)
    assert g.order % h1.order == 0
    k = intersect(h1, h2)
    assert is_subgroup(g, k.members)
    assert set(k.members) == set(h1.members) & set(h2.members)
    blocks = cosets(g, h1)
    assert len(blocks) * h1.order == g.order
    assert whole_group(g).order == g.order


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(2, 5), min_size=1, max_size=3), st.integers(1, 20))
def test_multiplication_is_automorphism_when_unit(moduli, k):
    g = cyclic_sum(moduli)
    if gcd(k, lcm(*moduli)) != 1:
        with pytest.raises(NotAutomorphismError):
            multiplication_automorphism(g, k)
        return
    t = multiplication_automorphism(g, k)
    for a in range(g.order):
        for b in range(g.order):
            assert t(g.mul(a, b)) == g.mul(t(a), t(b))

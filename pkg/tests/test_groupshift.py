import itertools
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cosetshift.errors import (
    IdentityLoopMissingError,
    NotProductClosedError,
    NotSameCosetError,
    NotSeparatingError,
    NotSurjectiveError,
)
from cosetshift.gallery import dlim_3adic_truncation, sigma_a
from cosetshift.groups import (
    cyclic_sum,
    identity_automorphism,
    is_subgroup,
    multiplication_automorphism,
    subgroup_generated,
    whole_group,
)
from cosetshift.groupshift import (
    GroupShiftModel,
    bracket,
    check_bracket,
    check_follower_factorization,
    check_product_structure,
    code_finite_system,
    full_group_shift,
    local_stable_words,
    local_unstable_words,
    sample_group_shift,
    validate_group_shift,
    words_product_closed,
)
import cosetshift.groupshift as gsmod
from cosetshift.shifts import is_word, vertex_shift, words
from models import corpus_groups, small_groups


def test_sigma_a_identity_sets():
    m = sigma_a()
    a = m.alphabet_group
    assert m.f_e.names() == ["0.0", "1.0", "2.0", "3.0"]
    assert sorted(m.p_e.names()) == ["0.0", "1.1", "2.0", "3.1"]
    assert len(m.edges) == 32
    assert m.edge_subgroup().order == 32
    for s in range(a.order):
        fol = set(m.shift.succ[s])
        assert fol == {a.mul(m.shift.succ[s][0], h) for h in m.f_e.members}


def test_validation_errors():
    a = cyclic_sum([2])
    with pytest.raises(IdentityLoopMissingError):
        validate_group_shift(a, [(0, 1), (1, 0)])
    b = cyclic_sum([4])
    with pytest.raises(NotProductClosedError):
        validate_group_shift(b, [(0, 0), (1, 1), (2, 3), (3, 2)])
    with pytest.raises(NotSurjectiveError):
        validate_group_shift(b, [(0, 0), (2, 2), (0, 2), (2, 0)])


def test_windows_have_the_identity_where_promised():
    m = sigma_a()
    e = m.identity
    for d in range(1, 6):
        ws, wu = local_stable_words(m, d), local_unstable_words(m, d)
        for w in ws.words:
            assert all(w[i] == e for i in range(d) if i + ws.offset >= 0)
            assert is_word(m.shift, w)
        for w in wu.words:
            assert all(w[i] == e for i in range(d) if i + wu.offset <= 0)


def test_bracket_splices():
    m = sigma_a()
    ws = words(m.shift, 5)
    w1 = next(w for w in ws if w[2] == 0)
    w2 = next(w for w in reversed(ws) if w[2] == 0)
    out = bracket(m, w1, w2, 2)
    assert out[:2] == w2[:2] and out[2:] == w1[2:]
    other = next(w for w in ws if w[2] != 0)
    with pytest.raises(NotSameCosetError):
        bracket(m, w1, other, 2)


def test_bracket_needs_only_a_shared_centre():
    # joining at a shared symbol keeps a one-step shift's words, group or not
    a = cyclic_sum([2])
    x = vertex_shift(["0.", "1."], [(0, 0), (0, 1), (1, 0)])
    m = GroupShiftModel(a, x, frozenset(x.edges()))
    assert bracket(m, (0, 0, 1), (1, 0, 0), 1) == (1, 0, 1)
    with pytest.raises(ValueError):
        bracket(m, (0, 1), (0, 1), 1)


def _oracle_product_structure(m, d):
    """Exhaustive search for w = u * s with u, s of the right shape."""
    a, e = m.alphabet_group, m.identity
    ws = words(m.shift, 2 * d + 1)
    us = [w for w in ws if all(w[i] == e for i in range(d + 1))]
    ss = [w for w in ws if all(w[i] == e for i in range(d, 2 * d + 1))]
    for w in ws:
        if w[d] != e:
            continue
        for order in ("us", "su"):
            found = any(
                tuple(a.mul(x, y) if order == "us" else a.mul(y, x) for x, y in zip(u, s)) == w
                for u in us for s in ss)
            if not found:
                return False
    return True


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_product_structure_matches_exhaustive_oracle(seed):
    rng = random.Random(seed)
    g = rng.choice([x for x in small_groups().values() if x.order <= 4])
    m = sample_group_shift(g, rng, rng.randint(1, 3))
    for d in (1, 2):
        assert check_product_structure(m, d).passed == _oracle_product_structure(m, d)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_random_models_are_group_shifts(seed):
    rng = random.Random(seed)
    g = rng.choice(corpus_groups())
    m = sample_group_shift(g, rng, rng.randint(1, 3))
    assert is_subgroup(m.alphabet_group, m.f_e.members)
    assert is_subgroup(m.alphabet_group, m.p_e.members)
    assert m.f_e.order == len(m.edges) // m.order == m.p_e.order
    assert words_product_closed(m, 3)
    assert check_bracket(m, 2).passed
    assert check_follower_factorization(m, 2).passed


def test_follower_factorization_details():
    rep = check_follower_factorization(sigma_a(), 2)
    assert rep.passed
    assert rep.details["fp_eq_pf"]
    assert all(rep.details["depth_1"].values())


def test_coded_permutation_system():
    c = dlim_3adic_truncation(2)
    g = c.source[0]
    assert c.shift.size == g.order == 27
    assert len(c.itinerary) == 27
    m = c.as_group_shift()
    assert m.f_e.order == 1 and m.p_e.order == 1


def test_non_separating_partition():
    g = cyclic_sum([3])
    with pytest.raises(NotSeparatingError):
        code_finite_system(g, identity_automorphism(g), whole_group(g))


def test_coarse_partition_can_separate():
    g = cyclic_sum([9])
    h = subgroup_generated(g, [3])
    with pytest.raises(NotSeparatingError):
        code_finite_system(g, multiplication_automorphism(g, 2), h)
    c = code_finite_system(g, multiplication_automorphism(g, 4), subgroup_generated(g, []))
    assert c.shift.size == 9


def test_full_shift_words_closed():
    m = full_group_shift(small_groups()["S3"])
    assert m.f_e.order == 6
    assert words_product_closed(m, 2)
    assert len(list(itertools.islice(words(m.shift, 2), 100))) == 36


def test_counting_shortcut_agrees_with_enumeration(monkeypatch):
    rng = random.Random(5)
    for _ in range(12):
        g = rng.choice([x for x in corpus_groups() if x.order <= 8])
        m = sample_group_shift(g, rng, 2)
        e = m.identity
        f = np.unique(gsmod._encode(gsmod._window_set(m, 1, {0: set(m.f_e.members)}), m.order))
        h = gsmod._window_set(m, 1, {0: e})
        th = gsmod._window_set(m, 1, {-1: e})
        for xs, ys in ((th, h), (h, th), (h, h)):
            listed = np.array_equal(f, gsmod._set_product(m, xs, ys))
            monkeypatch.setattr(gsmod, "CHECK_BUDGET", 0)
            assert gsmod._product_equals(m, f, xs, ys) == listed
            monkeypatch.undo()

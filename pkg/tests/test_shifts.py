import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cosetshift.errors import NotAWordError, NotStabilizedError, ShiftError
from cosetshift.shifts import (
    BlockMap,
    block_entropy,
    compose,
    determinism,
    finite_type_shift,
    follower,
    full_shift,
    higher_block,
    is_word,
    markov_memory,
    path_count,
    permutation_shift,
    predecessor,
    shift_from_matrix,
    vertex_shift,
    word_array,
    words,
)
from models import brute_words

matrices = st.integers(1, 4).flatmap(
    lambda k: st.lists(st.lists(st.booleans(), min_size=k, max_size=k), min_size=k, max_size=k))


def golden_mean():
    return vertex_shift("ab", [("a", "a"), ("a", "b"), ("b", "a")])


def test_golden_mean_counts_are_fibonacci():
    x = golden_mean()
    assert [path_count(x, n) for n in range(1, 8)] == [2, 3, 5, 8, 13, 21, 34]
    assert not block_entropy(x, 6).geometric


def test_stripping_removes_transient_symbols():
    x = vertex_shift("abc", [("a", "a"), ("a", "b"), ("c", "a")])
    assert x.alphabet == ("a",)
    with pytest.raises(ShiftError):
        vertex_shift("ab", [("a", "b")])


def test_follower_and_predecessor():
    x = golden_mean()
    assert follower(x, (1,)) == (0,)
    assert follower(x, (0,)) == (0, 1)
    assert predecessor(x, (1,)) == (0,)
    with pytest.raises(NotAWordError):
        follower(x, (1, 1))


def test_full_and_permutation_shift():
    assert block_entropy(full_shift(3), 5).base == 3
    p = permutation_shift(["a", "b", "c"], [1, 2, 0])
    d = determinism(p)
    assert d.is_permutation and d.cycle_lengths == (3,)
    assert not determinism(golden_mean()).forward


@settings(max_examples=80, deadline=None)
@given(matrices, st.integers(1, 5))
def test_word_enumeration_matches_brute_force(mat, n):
    try:
        x = shift_from_matrix([str(i) for i in range(len(mat))], mat)
    except ShiftError:
        return
    adj = x.adj.tolist()
    oracle = brute_words(adj, n)
    assert sorted(words(x, n)) == oracle
    assert path_count(x, n) == len(oracle)
    for s in range(x.size):
        assert path_count(x, n, start=s) == sum(1 for w in oracle if w[0] == s)
        assert path_count(x, n, start=s, reverse=True) == sum(1 for w in oracle if w[-1] == s)
    for w in oracle[:5]:
        assert is_word(x, w)


def test_finite_type_shift_memory():
    # every a is followed by bb, so what may follow b depends on the symbol before it
    x = finite_type_shift("ab", ["aa", "aba"])
    assert x.block_length == 2
    assert markov_memory(x, 4) == 2
    # forbidding aa and bab kills every a, leaving a single point
    assert markov_memory(finite_type_shift("ab", ["aa", "bab"]), 4) == 0
    assert markov_memory(golden_mean(), 3) == 1
    assert markov_memory(full_shift(2), 3) == 0


def test_memory_not_stabilized():
    x = finite_type_shift("ab", ["abbba"])
    with pytest.raises(NotStabilizedError):
        markov_memory(x, 2)
    assert markov_memory(x, 4) == 4


@settings(max_examples=40, deadline=None)
@given(matrices, st.integers(2, 4))
def test_higher_block_round_trip(mat, n):
    try:
        x = shift_from_matrix([str(i) for i in range(len(mat))], mat)
    except ShiftError:
        return
    rec, fwd, inv = higher_block(x, n)
    assert markov_memory(rec, 2) <= 1
    w = word_array(x, n + 4)
    img = fwd.apply(w)
    assert rec.adj[img[:, :-1], img[:, 1:]].all()
    assert np.array_equal(inv.apply(img), w[:, : img.shape[1]])
    assert path_count(rec, 3) == path_count(x, n + 2)


def test_block_map_compose_windows():
    shift_left = BlockMap(0, 1, lambda win: win[:, 1])
    double = BlockMap(1, 0, lambda win: (win[:, 0] + win[:, 1]) % 2)
    c = compose(double, shift_left)
    assert (c.memory, c.anticipation) == (1, 1)
    w = np.array([0, 1, 1, 0, 1])
    assert c.apply_word(w) == double.apply_word(shift_left.apply_word(w))


def test_from_table_marks_unknown_windows():
    m = BlockMap.from_table(0, 1, 2, {(0, 1): 5}, target_size=6)
    assert m.apply_word([0, 1, 1]) == (5, -1)

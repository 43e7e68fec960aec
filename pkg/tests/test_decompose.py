import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from cosetshift.decompose import (
    compute_fpk,
    construction1,
    construction2,
    decompose_driver,
    initial_state,
    verify_certificate,
)
from cosetshift.errors import IterationLimitError, PreconditionK1Error, PreconditionK2Error
from cosetshift.gallery import dlim_3adic_truncation, sigma_a
from cosetshift.groupshift import full_group_shift, sample_group_shift
from cosetshift.shifts import block_entropy, path_count
from models import brute_words, corpus_groups, small_groups


def test_sigma_a_steps():
    m = sigma_a()
    c = decompose_driver(m)
    assert c.emitted == (2, 2)
    assert c.residual == (1,)
    assert [(s.kind, s.side) for s in c.steps] == [("split", None), ("amalgamate", "follower"), ("split", None)]
    assert (c.inverse.memory, c.inverse.anticipation) == (0, 1)
    assert c.amalgamation_index == 2
    rep = verify_certificate(m.shift, c, n_max=8)
    assert rep.passed
    assert [got for _, got, _ in rep.counts] == [8 * 4 ** (n - 1) for n in range(1, 9)]


def test_construction_preconditions():
    s = initial_state(sigma_a())
    with pytest.raises(PreconditionK2Error):
        construction2(s)
    s1, factor, (fwd, inv) = construction1(s)
    assert factor == 2
    with pytest.raises(PreconditionK1Error):
        construction1(s1)
    f, p, k = compute_fpk(s1)
    assert k.order == s1.h_cur.order
    s2, (fwd2, inv2) = construction2(s1, "follower")
    assert s2.shift_cur.size == s1.shift_cur.size // 2
    with pytest.raises(ValueError):
        construction2(s1, "sideways")


def test_split_maps_are_inverse():
    s = initial_state(sigma_a())
    _, factor, (fwd, inv) = construction1(s)
    w = tuple(range(s.size))
    assert inv.apply_word(fwd.apply_word(w)) == w


def test_amalgamation_inverse_reads_ahead():
    s1, _, _ = construction1(initial_state(sigma_a()))
    s2, (fwd, inv) = construction2(s1, "follower")
    assert (inv.memory, inv.anticipation) == (0, 1)
    for w in brute_words(s1.shift_cur.adj.tolist(), 4):
        img = fwd.apply_word(w)
        assert inv.apply_word(img) == w[:-1]


@pytest.mark.parametrize("name", sorted(small_groups()))
def test_full_shifts_split_once(name):
    g = small_groups()[name]
    c = decompose_driver(full_group_shift(g))
    assert c.emitted == (g.order,)
    assert len(c.steps) == 1 and c.steps[0].kind == "split"
    assert c.residual_shift.size == 1


def test_permutation_has_no_steps():
    c = decompose_driver(dlim_3adic_truncation(1).as_group_shift())
    assert c.emitted == ()
    assert sorted(c.residual) == [1, 2]


def test_iteration_limit():
    with pytest.raises(IterationLimitError):
        decompose_driver(sigma_a(), max_steps=1)


def _conjugacy_oracle(m, c, n):
    """Exhaustive check on every word of length ``n`` of both shifts."""
    orig = brute_words(m.shift.adj.tolist(), n)
    prod = brute_words(c.product.adj.tolist(), n)
    images = set()
    for w in orig:
        img = c.forward.apply_word(w)
        assert all(c.product.adj[x, y] for x, y in zip(img, img[1:]))
        back = c.inverse.apply_word(img)
        lo = c.inverse.memory
        assert back == w[lo:lo + len(back)]
        images.add(img)
    # forward is onto the product's words: every product word has a preimage
    assert images == set(prod)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_tiny_models_against_exhaustive_oracle(seed):
    rng = random.Random(seed)
    g = rng.choice([x for x in small_groups().values() if x.order <= 4])
    m = sample_group_shift(g, rng, rng.randint(1, 3))
    c = decompose_driver(m)
    for n in range(1, 6):
        _conjugacy_oracle(m, c, n)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_random_models_verify(seed):
    rng = random.Random(seed)
    m = sample_group_shift(rng.choice(corpus_groups()), rng, rng.randint(1, 3))
    c = decompose_driver(m)
    assert math.prod(c.emitted) == m.f_e.order
    assert block_entropy(m.shift, 5).base == c.full_shift_size
    for st_ in c.steps:
        if st_.kind == "amalgamate":
            assert st_.side == "follower"
    rep = verify_certificate(m.shift, c, n_max=5)
    assert rep.passed, rep.failures


def test_certificate_decode():
    c = decompose_driver(sigma_a())
    for code in range(c.product.size):
        parts = c.decode(code)
        assert len(parts) == 1 + len(c.emitted)
        assert all(0 <= v < d for v, d in zip(parts[1:], c.emitted))


def test_verification_catches_tampering():
    m = sigma_a()
    c = decompose_driver(m)
    other = full_group_shift(small_groups()["Z2"])
    assert not verify_certificate(other.shift, c, n_max=4).passed
    # same alphabet size, different edges: the counts no longer factor
    same_size = full_group_shift(m.alphabet_group)
    rep = verify_certificate(same_size.shift, c, n_max=4)
    assert not rep.passed and not rep.counts_ok
    assert path_count(same_size.shift, 3) == 512

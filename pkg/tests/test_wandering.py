import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cosetshift.errors import (
    BadCertificateError,
    EmptyTruncationError,
    RadiusTooSmallError,
    RuleError,
    WanderingError,
)
from cosetshift.wandering import (
    COLLAPSED,
    COUNTEREXAMPLE,
    INCONCLUSIVE,
    TOTALLY_WANDERING,
    GeneratedGraph,
    MatrixSystem,
    RankCertificate,
    check_certificate,
    classify_blocks,
    cycle_plus_q3_graph,
    default_certificate,
    dual_entropy,
    format_rule,
    integer_det,
    matrix_no_periodics,
    parse_rule,
    path_counts,
    q3_graph,
    q3xq3_graph,
    rule,
    successors,
    totally_wandering,
    truncate,
    z2_system,
)


# an independent model of Q3 / Z3: a coset is a rational q in [0, 1) with a power-of-3 denominator

def _state_of(q: Fraction):
    k, n, digit_place = 0, 0, 1
    d = q.denominator
    while d > 1:
        d //= 3
        k += 1
    x = q
    for _ in range(k):
        x *= 3
        digit = int(x) % 3
        n += digit * digit_place
        digit_place *= 3
        x -= int(x)
    return ("Q", (k, n))


def _cosets(k_max):
    for k in range(k_max + 1):
        for num in range(3 ** k):
            q = Fraction(num, 3 ** k)
            if k == 0 or q.denominator == 3 ** k:
                yield q


def test_q3_matches_rational_model():
    g = q3_graph()
    for q in _cosets(5):
        s = _state_of(q)
        assert successors(g, s) == [_state_of((3 * q) % 1)]
        pre = sorted({_state_of((q + j) / 3) for j in range(3)})
        assert successors(g, s, reverse=True) == pre


def test_q3_follower_and_predecessor_sizes():
    t = truncate(q3_graph(), 4)
    succ, pred = t.succ(), t.pred()
    interior = [i for i in range(t.size) if i not in t.boundary]
    assert interior
    assert {len(succ[i]) for i in interior} == {1}
    assert {len(pred[i]) for i in interior} == {3}


def test_q3xq3_degrees_and_truncation():
    g = q3xq3_graph()
    t = truncate(g, 3)
    succ, pred = t.succ(), t.pred()
    for i in range(t.size):
        if i not in t.boundary:
            assert len(succ[i]) == 3 and len(pred[i]) == 3
    assert t.base == t.index[("P", (0, 0, 0, 0))]
    assert all(g.norm(s) <= 3 for s in t.states)


def test_truncation_needs_a_root():
    g = q3_graph()
    far = GeneratedGraph("far", g.classes, g.dims, g.norm_dims, g.rules, ("Q", (5, 200)), (), (), g.variables)
    with pytest.raises(EmptyTruncationError):
        truncate(far, 2)


def test_path_counts_match_matrix_powers():
    g = q3xq3_graph()
    t = truncate(g, 6)
    adj = t.adjacency().astype(object)
    start = t.index[g.base]
    v = np.zeros(t.size, dtype=object)
    v[start] = 1
    fwd, bwd = v.copy(), v.copy()
    want_f, want_b = [], []
    for _ in range(5):
        fwd = adj.T.dot(fwd)
        bwd = adj.dot(bwd)
        want_f.append(int(fwd.sum()))
        want_b.append(int(bwd.sum()))
    assert list(path_counts(g, g.base, 5)) == want_f
    assert list(path_counts(g, g.base, 5, reverse=True)) == want_b


def test_dual_entropy_q3xq3():
    g = q3xq3_graph()
    d = dual_entropy(g, g.base, 12, default_certificate(g))
    assert d.forward_counts == tuple(3 ** n for n in range(1, 13))
    assert d.forward_base == 3 and d.backward_base == 3
    assert d.measure_entropy_bound == 0
    assert d.verdict == TOTALLY_WANDERING


def test_dual_entropy_q3_is_lopsided():
    g = q3_graph()
    d = dual_entropy(g, g.base, 8)
    assert d.forward_counts == (1,) * 8
    assert d.backward_counts == tuple(3 ** n for n in range(1, 9))
    assert d.forward_base == 1 and d.backward_base == 3
    assert d.verdict is None and d.measure_entropy_bound is None


def test_certificates():
    g = q3_graph()
    assert totally_wandering(g, default_certificate(g), 3).status == TOTALLY_WANDERING
    wrong_way = RankCertificate({"Q": ((1, 0), 0)})
    assert not check_certificate(g, wrong_way).ok
    assert totally_wandering(g, wrong_way, 3).status == INCONCLUSIVE
    with pytest.raises(BadCertificateError):
        check_certificate(g, RankCertificate({"Q": ((0, 1), 0)}))
    with pytest.raises(BadCertificateError):
        check_certificate(g, RankCertificate({}))


def test_cycle_is_a_counterexample():
    g = cycle_plus_q3_graph(4)
    v = totally_wandering(g, default_certificate(g), 2)
    assert v.status == COUNTEREXAMPLE
    assert sorted(v.cycle) == ["C(0)", "C(1)", "C(2)", "C(3)"]


def test_cycle_states_must_be_declared_exceptions():
    g = cycle_plus_q3_graph(3)
    cert = default_certificate(g)
    assert check_certificate(g, cert).ok
    no_exc = RankCertificate(cert.rank)
    assert not check_certificate(g, no_exc).ok


def test_classify_blocks_three_parts():
    g = cycle_plus_q3_graph(4)
    b = classify_blocks(g, 3, default_certificate(g))
    names = b.truncation.names()
    t = {names[i] for i in b.t_part}
    c = {names[i] for i in b.c_part}
    assert t == {"Q(0,0)"}
    assert c == {"C(0)", "C(1)", "C(2)", "C(3)", "Q(0,0)"}
    assert t <= c
    assert b.quotient.states[0] == COLLAPSED
    assert len(b.w_part) + 1 == b.quotient.size
    assert set(b.by_state().values()) == {"T", "C", "W"}


def test_classify_radius_too_small():
    g = q3xq3_graph()
    with pytest.raises(RadiusTooSmallError):
        classify_blocks(g, 0)


def _leibniz(mat):
    n = len(mat)
    total = 0
    for perm in itertools.permutations(range(n)):
        inversions = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        term = (-1) ** inversions
        for i in range(n):
            term *= mat[i][perm[i]]
        total += term
    return total


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 4).flatmap(
    lambda n: st.lists(st.lists(st.integers(-9, 9), min_size=n, max_size=n), min_size=n, max_size=n)))
def test_integer_det_matches_leibniz(mat):
    assert integer_det(mat) == _leibniz(mat)


def test_z2_has_no_periodic_points():
    v = matrix_no_periodics(z2_system(), 50)
    assert v.passed and v.first_zero is None
    assert v.determinants[0] == -1
    assert all(d != 0 for d in v.determinants)


def test_rotation_has_period_four():
    v = matrix_no_periodics(MatrixSystem(2, ((0, -1), (1, 0))), 8)
    assert not v.passed and v.first_zero == 4


def test_matrix_must_be_unimodular():
    with pytest.raises(WanderingError):
        MatrixSystem(2, ((2, 0), (0, 1)))


@pytest.mark.parametrize("builder", [q3_graph, q3xq3_graph, cycle_plus_q3_graph])
def test_rule_text_round_trip(builder):
    g = builder()
    for r in g.rules:
        text = format_rule(r, g.variables)
        again = parse_rule(text, g.variables)
        assert again == r, text


def test_parse_rule_examples():
    variables = {"Q": ("k", "n")}
    r = parse_rule("d1: Q(k, n) -> Q(k - 1, (n - 1)/3) when k >= 1, n % 3 == 1", variables)
    ok, y = r.forward(np.array([[2, 4], [2, 5], [0, 1]]))
    assert ok.tolist() == [True, False, False]
    assert y[0].tolist() == [1, 1]
    ok, x = r.backward(np.array([[1, 1]]))
    assert ok[0] and x[0].tolist() == [2, 4]
    for bad in ("no colon", "x: Q(k, n) Q(k, n)", "x: Q(n, k) -> Q(k, n)", "x: Z(k, n) -> Q(k, n)",
                "x: Q(k, n) -> Q(k*n, n)", "x: Q(k, n) -> Q(k, n) when k"):
        with pytest.raises(RuleError):
            parse_rule(bad, variables)


def test_singular_rule_rejected():
    with pytest.raises(RuleError):
        rule("flat", "Q", "Q", [[1, 0], [0, 0]], [0, 0])


def test_fixed_state_needs_self_loop():
    g = q3_graph()
    with pytest.raises(WanderingError):
        GeneratedGraph("bad", g.classes, g.dims, g.norm_dims, g.rules, g.base, (("Q", (1, 1)),), (), g.variables)

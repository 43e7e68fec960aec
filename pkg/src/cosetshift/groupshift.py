"""Group shifts on a finite alphabet group and the coding of finite systems.

A group shift here is a vertex shift whose alphabet is a finite group ``A``
and whose edge set is a subgroup of ``A x A``.  Its points form a compact
group under symbolwise multiplication and the shift map is an automorphism
of it.  The compact open subgroup used for coding is "identity at
coordinate 0", so cosets are simply symbols.

Window convention: a window of depth ``d`` is a word of length ``2d + 1``
laid out on coordinates ``-d .. d``; array position ``i`` holds coordinate
``i - d``, so coordinate 0 (the present) sits at position ``d``.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    GroupShiftError,
    IdentityLoopMissingError,
    NotProductClosedError,
    NotSameCosetError,
    NotSeparatingError,
    NotSurjectiveError,
    SpliceNotAWordError,
)
from .groups import (
    FiniteGroup,
    GroupAutomorphism,
    Subgroup,
    automorphism_order,
    coset_labels,
    direct_product,
    trivial_subgroup,
)
from .shifts import VertexShift, is_word, word_array

CHECK_BUDGET = 200_000


@dataclass(frozen=True, eq=False)
class GroupShiftModel:
    alphabet_group: FiniteGroup
    shift: VertexShift
    edges: frozenset
    f_e: Subgroup | None = None
    p_e: Subgroup | None = None

    @property
    def identity(self) -> int:
        return self.alphabet_group.identity

    @property
    def order(self) -> int:
        return self.alphabet_group.order

    def edge_subgroup(self) -> Subgroup:
        """The edge set as a subgroup of the direct product ``A x A``."""
        a = self.alphabet_group
        prod = direct_product(a, a)
        return Subgroup(prod, tuple(sorted(s * a.order + t for s, t in self.edges)))

    def __repr__(self):
        return f"GroupShiftModel(order={self.order}, edges={len(self.edges)})"


def _edge_pairs(a: FiniteGroup, edges) -> set[tuple[int, int]]:
    out = set()
    for s, t in edges:
        s = a.index(s) if isinstance(s, str) else int(s)
        t = a.index(t) if isinstance(t, str) else int(t)
        out.add((s, t))
    return out


def _product_closure_violation(a: FiniteGroup, pairs: set) -> tuple | None:
    """Return two edges whose product is not an edge, or ``None``.

    Greedily picks generators from ``pairs`` and saturates; every element
    produced is a product of an element already shown to lie in the
    closure and a generator, so any escape is a genuine witness.
    """
    n = a.order
    code = {s * n + t for s, t in pairs}
    reached = {a.identity * n + a.identity}
    gens = []
    tab = a.table
    for c in sorted(code):
        if c in reached:
            continue
        gens.append(c)
        frontier = list(reached)
        while frontier:
            nxt = []
            for x in frontier:
                xs, xt = divmod(x, n)
                for g in gens:
                    gs, gt = divmod(g, n)
                    y = int(tab[xs, gs]) * n + int(tab[xt, gt])
                    if y not in code:
                        return (xs, xt), (gs, gt)
                    if y not in reached:
                        reached.add(y)
                        nxt.append(y)
            frontier = nxt
    return None


def validate_group_shift(a: FiniteGroup, edges: Iterable) -> GroupShiftModel:
    """Check that ``edges`` is a subgroup of ``A x A`` with onto projections.

    Records ``f(e)`` and ``p(e)`` and confirms that every follower set is a
    left coset of ``f(e)`` and every predecessor set a left coset of ``p(e)``.
    """
    pairs = _edge_pairs(a, edges)
    e = a.identity
    if (e, e) not in pairs:
        raise IdentityLoopMissingError(f"edge ({a.name(e)}, {a.name(e)}) is missing")
    bad = _product_closure_violation(a, pairs)
    if bad is not None:
        (s1, t1), (s2, t2) = bad
        raise NotProductClosedError(
            f"({a.name(s1)}->{a.name(t1)}) * ({a.name(s2)}->{a.name(t2)}) = "
            f"({a.name(a.mul(s1, s2))}->{a.name(a.mul(t1, t2))}) is not an edge")
    src = {s for s, _ in pairs}
    tgt = {t for _, t in pairs}
    if len(src) != a.order or len(tgt) != a.order:
        missing = sorted(set(range(a.order)) - (src & tgt))
        raise NotSurjectiveError(f"symbols {[a.name(m) for m in missing]} lack an outgoing or incoming edge")

    adj = np.zeros((a.order, a.order), dtype=bool)
    for s, t in pairs:
        adj[s, t] = True
    shift = VertexShift(a.elements, adj, designation=a)
    f_e = Subgroup(a, shift.succ[e])
    p_e = Subgroup(a, shift.pred[e])
    for sym in range(a.order):
        for sets, base, kind in ((shift.succ, f_e, "follower"), (shift.pred, p_e, "predecessor")):
            members = sets[sym]
            coset = {a.mul(members[0], h) for h in base.members}
            if coset != set(members):
                raise GroupShiftError(f"{kind} set of {a.name(sym)} is not a coset of its identity {kind} set")
    return GroupShiftModel(a, shift, frozenset(pairs), f_e, p_e)


def full_group_shift(a: FiniteGroup) -> GroupShiftModel:
    return validate_group_shift(a, [(s, t) for s in range(a.order) for t in range(a.order)])


def sample_group_shift(a: FiniteGroup, rng: random.Random, n_generators: int = 2) -> GroupShiftModel:
    """Random edge subgroup of ``A x A`` with both projections onto ``A``.

    Random generator pairs are saturated; symbols missing from a projection
    get an extra generator until both projections are onto.
    """
    n = a.order
    tab = a.table

    def close(gens):
        reached = {a.identity * n + a.identity}
        frontier = list(reached)
        while frontier:
            nxt = []
            for x in frontier:
                xs, xt = divmod(x, n)
                for gs, gt in gens:
                    y = int(tab[xs, gs]) * n + int(tab[xt, gt])
                    if y not in reached:
                        reached.add(y)
                        nxt.append(y)
            frontier = nxt
        return reached

    gens = [(rng.randrange(n), rng.randrange(n)) for _ in range(n_generators)]
    while True:
        codes = close(gens)
        src = {c // n for c in codes}
        tgt = {c % n for c in codes}
        if len(src) == n and len(tgt) == n:
            break
        if len(src) < n:
            s = rng.choice(sorted(set(range(n)) - src))
            gens.append((s, rng.randrange(n)))
        else:
            t = rng.choice(sorted(set(range(n)) - tgt))
            gens.append((rng.randrange(n), t))
    return validate_group_shift(a, [divmod(c, n) for c in codes])


# coding of finite systems ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CodedSystem:
    """Finite group ``source[0]`` with automorphism ``source[1]`` coded by cosets of ``source[2]``.

    ``itinerary[g]`` is one period of the coset sequence ``x_i = T^i(g) H``
    starting at ``i = 0``; the bi-infinite itinerary repeats it.
    """

    source: tuple[FiniteGroup, GroupAutomorphism, Subgroup]
    shift: VertexShift
    itinerary: tuple[tuple[int, ...], ...]
    coset_label: tuple[int, ...] = field(repr=False)

    def as_group_shift(self) -> GroupShiftModel:
        """The point-level group shift ``{(g, T g)}``, conjugate to the coded system."""
        g, t, _ = self.source
        return validate_group_shift(g, [(x, t(x)) for x in range(g.order)])


def code_finite_system(g: FiniteGroup, t: GroupAutomorphism, h: Subgroup | None = None) -> CodedSystem:
    """Code ``(g, t)`` by the left-coset partition of ``h``.

    Raises :class:`NotSeparatingError` if two elements share an itinerary.
    """
    h = trivial_subgroup(g) if h is None else h
    blocks, label = coset_labels(g, h)
    period = automorphism_order(t)
    seen = {}
    itins = []
    for x in range(g.order):
        seq = []
        y = x
        for _ in range(period):
            seq.append(int(label[y]))
            y = t(y)
        key = tuple(seq)
        if key in seen:
            raise NotSeparatingError(
                f"elements {g.name(seen[key])} and {g.name(x)} have the same itinerary")
        seen[key] = x
        orbit = 1
        y = t(x)
        while y != x:
            y = t(y)
            orbit += 1
        itins.append(key[:orbit])
    names = [g.name(b[0]) if h.order == 1 else f"{g.name(b[0])}H" for b in blocks]
    adj = np.zeros((len(blocks), len(blocks)), dtype=bool)
    for x in range(g.order):
        adj[label[x], label[t(x)]] = True
    shift = VertexShift(tuple(names), adj)
    return CodedSystem((g, t, h), shift, tuple(itins), tuple(int(v) for v in label))


# local stable / unstable structure -----------------------------------------------

@dataclass(frozen=True)
class WindowedWords:
    """Words together with the coordinate of their first symbol."""

    offset: int
    words: tuple[tuple[int, ...], ...]

    def __len__(self):
        return len(self.words)


def _constrained(m: GroupShiftModel, length: int, fixed: dict[int, int]) -> np.ndarray:
    """Words of the given length whose positions ``fixed`` hold prescribed symbols."""
    x = m.shift
    first = [fixed[0]] if 0 in fixed else list(range(x.size))
    out = np.asarray(first, dtype=np.int64)[:, None]
    for pos in range(1, length):
        allowed = np.asarray([fixed[pos]] if pos in fixed else range(x.size), dtype=np.int64)
        rows, cols = np.nonzero(x.adj[out[:, -1]][:, allowed])
        out = np.hstack([out[rows], allowed[cols][:, None]])
    return out


def local_stable_words(m: GroupShiftModel, depth: int) -> WindowedWords:
    """Depth-``d`` window onto the local stable set of the identity.

    Words of length ``d`` on coordinates ``-(d // 2) .. ceil(d/2) - 1`` with
    the identity at every coordinate ``>= 0``.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    offset = -(depth // 2)
    e = m.identity
    fixed = {pos: e for pos in range(depth) if pos + offset >= 0}
    arr = _constrained(m, depth, fixed)
    return WindowedWords(offset, tuple(tuple(int(v) for v in r) for r in arr))


def local_unstable_words(m: GroupShiftModel, depth: int) -> WindowedWords:
    """Mirror of :func:`local_stable_words`: identity at every coordinate ``<= 0``."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    offset = -(math.ceil(depth / 2) - 1)
    e = m.identity
    fixed = {pos: e for pos in range(depth) if pos + offset <= 0}
    arr = _constrained(m, depth, fixed)
    return WindowedWords(offset, tuple(tuple(int(v) for v in r) for r in arr))


def bracket(m: GroupShiftModel, w1: Sequence[int], w2: Sequence[int], depth: int) -> tuple[int, ...]:
    """Splice agreeing with ``w1`` on coordinates ``>= 0`` and ``w2`` on ``<= 0``."""
    w1, w2 = tuple(w1), tuple(w2)
    size = 2 * depth + 1
    if len(w1) != size or len(w2) != size:
        raise ValueError(f"bracket needs two words of length {size}")
    if w1[depth] != w2[depth]:
        raise NotSameCosetError(f"centre symbols differ: {w1[depth]} vs {w2[depth]}")
    out = w2[:depth] + w1[depth:]
    if not is_word(m.shift, out):
        raise SpliceNotAWordError(f"splice {out} is not a word")
    return out


@dataclass
class CheckReport:
    name: str
    passed: bool
    depth: int | None = None
    checked: int = 0
    witnesses: list = field(default_factory=list)
    details: dict = field(default_factory=dict)


def _halves(m: GroupShiftModel, depth: int, centre: int):
    """Left halves ending at ``centre`` and right halves starting at it, both of length ``depth + 1``."""
    left = _constrained(m, depth + 1, {depth: centre})
    right = _constrained(m, depth + 1, {0: centre})
    return left, right


def _rows_are_words(x: VertexShift, arr: np.ndarray) -> np.ndarray:
    if arr.shape[1] < 2:
        return np.ones(len(arr), dtype=bool)
    return x.adj[arr[:, :-1], arr[:, 1:]].all(axis=1)


def check_product_structure(m: GroupShiftModel, depth: int) -> CheckReport:
    """Depth-``d`` check that each identity-centred window is ``u*s`` and ``s*u``.

    ``u`` ranges over windows with the identity on coordinates ``<= 0`` and
    ``s`` over windows with the identity on coordinates ``>= 0``.  Multiplying
    symbolwise, the only candidate factorisation of ``w`` takes ``u`` to be
    ``w`` on the positive side and ``s`` to be ``w`` on the negative side, so
    the check is that both candidates are words and that both products give
    back ``w``.  Small windows are enumerated pair by pair; larger ones use
    that ``u`` depends only on the right half of ``w`` and ``s`` only on the
    left half.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    a, x, e = m.alphabet_group, m.shift, m.identity
    left, right = _halves(m, depth, e)
    report = CheckReport("product_structure", True, depth)
    ee = np.full(depth, e, dtype=np.int64)
    u_cand = np.hstack([np.tile(ee, (len(right), 1)), right]) if len(right) else np.zeros((0, 2 * depth + 1), dtype=np.int64)
    s_cand = np.hstack([left, np.tile(ee, (len(left), 1))]) if len(left) else np.zeros((0, 2 * depth + 1), dtype=np.int64)
    u_ok = _rows_are_words(x, u_cand)
    s_ok = _rows_are_words(x, s_cand)
    n_pairs = len(left) * len(right)
    report.details["identity_centred_words"] = n_pairs
    if n_pairs <= CHECK_BUDGET:
        li, ri = np.meshgrid(np.arange(len(left)), np.arange(len(right)), indexing="ij")
        li, ri = li.ravel(), ri.ravel()
        w = np.hstack([left[li][:, :depth], right[ri]])
        u, s = u_cand[ri], s_cand[li]
        us = a.table[u, s]
        su = a.table[s, u]
        good = u_ok[ri] & s_ok[li] & (us == w).all(axis=1) & (su == w).all(axis=1)
        report.checked = len(w)
        for k in np.nonzero(~good)[0][:5]:
            report.witnesses.append(tuple(int(v) for v in w[k]))
        report.passed = bool(good.all())
        report.details["mode"] = "pairwise"
    else:
        report.checked = len(left) + len(right)
        for k in np.nonzero(~u_ok)[0][:5]:
            report.witnesses.append(("right half", tuple(int(v) for v in right[k])))
        for k in np.nonzero(~s_ok)[0][:5]:
            report.witnesses.append(("left half", tuple(int(v) for v in left[k])))
        report.passed = bool(u_ok.all() and s_ok.all())
        report.details["mode"] = "halves"
    return report


def check_bracket(m: GroupShiftModel, depth: int) -> CheckReport:
    """Run :func:`bracket` over every distinct centre-matched splice at ``depth``.

    A splice ``[w1, w2]`` only depends on the left half of ``w2`` and the
    right half of ``w1``, so the distinct splices are the pairs of halves
    sharing a centre symbol.
    """
    x = m.shift
    report = CheckReport("bracket", True, depth)
    total = 0
    for c in range(x.size):
        left, right = _halves(m, depth, c)
        total += len(left) * len(right)
        if len(left) * len(right) <= CHECK_BUDGET:
            li, ri = np.meshgrid(np.arange(len(left)), np.arange(len(right)), indexing="ij")
            spl = np.hstack([left[li.ravel()][:, :depth], right[ri.ravel()]])
            ok = _rows_are_words(x, spl)
            bad = spl[~ok]
        else:
            # joined at a shared symbol, a splice is a word iff both halves are
            ok_l = _rows_are_words(x, left)
            ok_r = _rows_are_words(x, right)
            bad = [tuple(left[i]) for i in np.nonzero(~ok_l)[0]] + [tuple(right[i]) for i in np.nonzero(~ok_r)[0]]
        for wit in list(bad)[:3]:
            report.witnesses.append(tuple(int(v) for v in wit))
        if len(bad):
            report.passed = False
    report.checked = total
    return report


def _window_set(m: GroupShiftModel, depth: int, fixed_coords: dict[int, int | set]) -> np.ndarray:
    """Depth windows with coordinate constraints; values may be a symbol or a set of symbols."""
    size = 2 * depth + 1
    arr = word_array(m.shift, size)
    mask = np.ones(len(arr), dtype=bool)
    for coord, val in fixed_coords.items():
        col = arr[:, coord + depth]
        if isinstance(val, (set, frozenset, tuple, list)):
            mask &= np.isin(col, list(val))
        else:
            mask &= col == val
    return arr[mask]


def _encode(arr: np.ndarray, n: int) -> np.ndarray:
    weights = n ** np.arange(arr.shape[1] - 1, -1, -1, dtype=np.int64)
    return arr @ weights


def _set_product(m: GroupShiftModel, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    tab = m.alphabet_group.table
    prod = tab[xs[:, None, :], ys[None, :, :]].reshape(-1, xs.shape[1])
    return np.unique(_encode(prod, m.order))


def _product_equals(m: GroupShiftModel, target: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> bool:
    """Whether the set of products ``xs * ys`` is exactly ``target`` (sorted codes).

    Window sets of subgroups are subgroups of ``A**(2d+1)``.  For subgroups
    ``X, Y`` inside a subgroup ``F`` the product has ``|X||Y|/|X & Y|``
    elements, so once the pairs get too many the equality is decided by
    containment and that count instead of by listing every product.
    """
    if len(xs) * len(ys) <= CHECK_BUDGET:
        return np.array_equal(target, _set_product(m, xs, ys))
    cx, cy = np.unique(_encode(xs, m.order)), np.unique(_encode(ys, m.order))
    if not (np.isin(cx, target).all() and np.isin(cy, target).all()):
        return False
    common = len(np.intersect1d(cx, cy, assume_unique=True))
    return len(cx) * len(cy) == len(target) * common


def check_follower_factorization(m: GroupShiftModel, max_depth: int = 2) -> CheckReport:
    """Windowed check of the follower and predecessor set factorisations.

    At depth ``d`` every subgroup of the point group is replaced by the set
    of its windows on coordinates ``-d .. d``; symbolwise products of window
    sets are windows of products, so each identity becomes a finite set
    equality.  Depths run from 1 until two consecutive depths agree or the
    products get too large to enumerate.
    """
    e = m.identity
    f_e = set(m.f_e.members) if m.f_e else set(m.shift.succ[e])
    p_e = set(m.p_e.members) if m.p_e else set(m.shift.pred[e])
    report = CheckReport("follower_factorization", True)
    fp = {m.alphabet_group.mul(x, y) for x in f_e for y in p_e}
    pf = {m.alphabet_group.mul(y, x) for x in f_e for y in p_e}
    report.details["fp_eq_pf"] = fp == pf
    prev = None
    for d in range(1, max_depth + 1):
        if m.order * (max(len(f_e), len(p_e)) ** (2 * d)) > 4 * CHECK_BUDGET:
            report.details[f"depth_{d}"] = "skipped"
            break
        F = np.unique(_encode(_window_set(m, d, {0: f_e}), m.order))
        P = np.unique(_encode(_window_set(m, d, {0: p_e}), m.order))
        H = _window_set(m, d, {0: e})
        TH = _window_set(m, d, {-1: e})
        TinvH = _window_set(m, d, {1: e})
        THu = _window_set(m, d, {c: e for c in range(-d, 0)})        # identity at coords <= -1
        Hs = _window_set(m, d, {c: e for c in range(0, d + 1)})      # identity at coords >= 0
        Hu = _window_set(m, d, {c: e for c in range(-d, 1)})         # identity at coords <= 0
        TinvHs = _window_set(m, d, {c: e for c in range(1, d + 1)})  # identity at coords >= 1
        results = {
            "f=T(H)H": _product_equals(m, F, TH, H),
            "f=T(Hu)Hs": _product_equals(m, F, THu, Hs),
            "f=Hs.T(Hu)": _product_equals(m, F, Hs, THu),
            "f=H.T(H)": _product_equals(m, F, H, TH),
            "p=Tinv(H)H": _product_equals(m, P, TinvH, H),
            "p=Tinv(Hs)Hu": _product_equals(m, P, TinvHs, Hu),
            "p=Hu.Tinv(Hs)": _product_equals(m, P, Hu, TinvHs),
            "p=H.Tinv(H)": _product_equals(m, P, H, TinvH),
        }
        report.details[f"depth_{d}"] = results
        report.depth = d
        report.checked += len(results)
        if prev is not None and prev == results:
            break
        prev = results
    ok = report.details["fp_eq_pf"]
    for key, val in report.details.items():
        if key.startswith("depth_") and isinstance(val, dict):
            for name, res in val.items():
                if not res:
                    report.witnesses.append((key, name))
                    ok = False
    report.passed = bool(ok)
    return report


def words_product_closed(m: GroupShiftModel, n: int) -> bool:
    """Symbolwise product of any two words of length ``n`` is again a word."""
    arr = word_array(m.shift, n)
    if len(arr) ** 2 > 4 * CHECK_BUDGET:
        gens = arr[np.random.default_rng(0).choice(len(arr), size=min(len(arr), 64), replace=False)]
    else:
        gens = arr
    prod = m.alphabet_group.table[arr[:, None, :], gens[None, :, :]].reshape(-1, n)
    return bool(_rows_are_words(m.shift, prod).all())

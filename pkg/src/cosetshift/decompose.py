"""Reduction of a group shift to a full shift times a permutation.

The ambient alphabet group ``A`` stays fixed for the whole run.  Each step
replaces the current subgroup ``h`` by a larger one and recodes the shift on
left cosets of ``h``: an edge ``ah -> bh`` exists when some element of
``ah`` has an edge into ``bh``.

* splitting (``construction1``) applies while ``k = f & p`` is larger than
  ``h``.  It passes to cosets of ``k`` and emits a full shift on ``k/h``.
* amalgamation (``construction2``) applies once ``k = h``.  It passes to
  cosets of ``f`` (or ``p``).  The forward code is one-block and the inverse
  reads one extra symbol into the future (or the past).

The loop stops when ``f = p = h``, where the shift is a permutation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    AmbiguousAmalgamationError,
    DecompositionError,
    IterationLimitError,
    NotASubgroupError,
    PreconditionK1Error,
    PreconditionK2Error,
    SplitVerificationFailedError,
)
from .groups import (
    FiniteGroup,
    Subgroup,
    coset_labels,
    intersect,
    is_subgroup,
    trivial_subgroup,
)
from .groupshift import GroupShiftModel
from .shifts import BlockMap, VertexShift, block_entropy, determinism, path_count, word_array

log = logging.getLogger(__name__)

SPLIT_CHECK_LENGTH = 8
DEFAULT_WORD_BUDGET = 200_000


@dataclass(frozen=True)
class Step:
    kind: str                  # "split" or "amalgamate"
    side: str | None           # "follower" / "predecessor" for amalgamation
    factor: int                # emitted full-shift size (1 for amalgamation)
    index: int                 # [h_new : h_old]
    size_before: int
    size_after: int
    follower_before: int       # |f| / |h| before the step
    follower_after: int
    predecessor_before: int
    predecessor_after: int
    forward: np.ndarray = field(repr=False, compare=False)
    inverse: np.ndarray = field(repr=False, compare=False)


@dataclass(frozen=True, eq=False)
class ReductionState:
    ambient: FiniteGroup
    edge_adj: np.ndarray = field(repr=False)
    h_cur: Subgroup
    blocks: tuple[tuple[int, ...], ...] = field(repr=False)
    label: np.ndarray = field(repr=False)
    shift_cur: VertexShift
    history: tuple[Step, ...] = ()

    @property
    def size(self) -> int:
        return len(self.blocks)


def _coset_name(a: FiniteGroup, block: Sequence[int], trivial: bool) -> str:
    rep = a.name(block[0])
    return rep if trivial else f"[{rep}]"


def _state_for(ambient: FiniteGroup, edge_adj: np.ndarray, h: Subgroup, history=()) -> ReductionState:
    blocks, label = coset_labels(ambient, h)
    onehot = np.zeros((ambient.order, len(blocks)), dtype=np.int64)
    onehot[np.arange(ambient.order), label] = 1
    adj = (onehot.T @ edge_adj.astype(np.int64) @ onehot) > 0
    names = tuple(_coset_name(ambient, b, h.order == 1) for b in blocks)
    shift = VertexShift(names, adj)
    return ReductionState(ambient, edge_adj, h, tuple(blocks), np.asarray(label), shift, tuple(history))


def initial_state(m: GroupShiftModel) -> ReductionState:
    a = m.alphabet_group
    return _state_for(a, m.shift.adj, trivial_subgroup(a))


def compute_fpk(s: ReductionState) -> tuple[Subgroup, Subgroup, Subgroup]:
    """Identity-coset follower and predecessor groups and their intersection."""
    e = int(s.label[s.ambient.identity])
    out = []
    for kind, cosets in (("follower", s.shift_cur.succ[e]), ("predecessor", s.shift_cur.pred[e])):
        members = sorted(x for c in cosets for x in s.blocks[c])
        if not is_subgroup(s.ambient, members) or not s.h_cur.member_set <= set(members):
            raise NotASubgroupError(f"{kind} set of the identity coset is not a subgroup containing h")
        out.append(Subgroup(s.ambient, tuple(members)))
    f, p = out
    return f, p, intersect(f, p)


def _cosets_inside(s: ReductionState, big: Subgroup) -> list[int]:
    """Indices of the current cosets contained in ``big``, in coset order."""
    mem = big.member_set
    return [i for i, b in enumerate(s.blocks) if b[0] in mem]


def construction1(s: ReductionState):
    """Split off the full shift on ``k/h``.

    Returns the new state, the factor size and a one-block map pair between
    the old shift and the product of the new shift with the full shift.
    Product symbols are encoded as ``new_symbol * factor + kappa``.
    """
    f, p, k = compute_fpk(s)
    if k.order == s.h_cur.order:
        raise PreconditionK1Error("k equals the current subgroup; nothing to split")
    a = s.ambient
    new = _state_for(a, s.edge_adj, k)
    factor = k.order // s.h_cur.order
    inner = _cosets_inside(s, k)
    kappa_of = {c: i for i, c in enumerate(inner)}
    fwd = np.empty((s.size, 2), dtype=np.int64)
    for i, block in enumerate(s.blocks):
        j = int(new.label[block[0]])
        r = new.blocks[j][0]
        kappa = kappa_of[int(s.label[a.mul(a.inv(r), block[0])])]
        fwd[i] = (j, kappa)
    inv = np.full((new.size, factor), -1, dtype=np.int64)
    inv[fwd[:, 0], fwd[:, 1]] = np.arange(s.size)
    if (inv < 0).any():
        raise SplitVerificationFailedError("split map is not a bijection onto pairs")

    # the old graph must be the new graph with a free factor alongside
    expect = new.shift_cur.adj[fwd[:, 0][:, None], fwd[:, 0][None, :]]
    if not np.array_equal(expect, s.shift_cur.adj):
        i, j = np.argwhere(expect != s.shift_cur.adj)[0]
        raise SplitVerificationFailedError(
            f"edge {s.shift_cur.alphabet[i]}->{s.shift_cur.alphabet[j]} does not factor through the split")
    for n in range(1, SPLIT_CHECK_LENGTH + 1):
        if path_count(s.shift_cur, n) != path_count(new.shift_cur, n) * factor ** n:
            raise SplitVerificationFailedError(f"path counts do not factor at length {n}")
    f_old = f.order // s.h_cur.order
    nf, np_, _ = compute_fpk(new)
    if nf.order // k.order * factor != f_old:
        raise SplitVerificationFailedError("follower cardinality was not divided by the factor")

    step = Step("split", None, factor, factor, s.size, new.size,
                f_old, nf.order // k.order, p.order // s.h_cur.order, np_.order // k.order,
                fwd, inv)
    new = ReductionState(new.ambient, new.edge_adj, new.h_cur, new.blocks, new.label, new.shift_cur,
                         s.history + (step,))
    codes = fwd[:, 0] * factor + fwd[:, 1]
    decode = np.full(new.size * factor, -1, dtype=np.int64)
    decode[codes] = np.arange(s.size)
    maps = (BlockMap.one_block(codes, new.size * factor), BlockMap.one_block(decode, s.size))
    log.debug("split: factor %d, %d -> %d symbols", factor, s.size, new.size)
    return new, factor, maps


def construction2(s: ReductionState, side: str = "follower"):
    """Amalgamate each ``f``-coset (``p``-coset for ``side="predecessor"``) into one symbol.

    Returns the new state and a map pair: the one-block forward code and the
    two-block inverse reading ``(current, next)`` (or ``(previous, current)``).
    """
    if side not in ("follower", "predecessor"):
        raise ValueError("side must be 'follower' or 'predecessor'")
    f, p, k = compute_fpk(s)
    if k.order != s.h_cur.order:
        raise PreconditionK2Error("k is larger than the current subgroup; split first")
    big = f if side == "follower" else p
    if big.order == s.h_cur.order:
        raise PreconditionK2Error(f"{side} group equals the current subgroup; nothing to amalgamate")
    new = _state_for(s.ambient, s.edge_adj, big)
    fwd = np.asarray([int(new.label[b[0]]) for b in s.blocks], dtype=np.int64)
    nbrs = s.shift_cur.succ if side == "follower" else s.shift_cur.pred
    inv = np.full((new.size, new.size), -1, dtype=np.int64)
    for i in range(s.size):
        targets = {int(fwd[j]) for j in nbrs[i]}
        members = {x for j in nbrs[i] for x in s.blocks[j]}
        if len(targets) != 1 or len(members) != big.order:
            raise AmbiguousAmalgamationError(
                f"{side} set of {s.shift_cur.alphabet[i]} is not a single coset of the {side} group")
        t = targets.pop()
        key = (fwd[i], t) if side == "follower" else (t, fwd[i])
        if inv[key] >= 0:
            raise AmbiguousAmalgamationError(
                f"{s.shift_cur.alphabet[inv[key]]} and {s.shift_cur.alphabet[i]} share a {side} set")
        inv[key] = i

    # inverse must land on old words and undo the forward code
    old2 = word_array(s.shift_cur, 2)
    got = inv[fwd[old2[:, 0]], fwd[old2[:, 1]]]
    want = old2[:, 0] if side == "follower" else old2[:, 1]
    if not np.array_equal(got, want):
        raise AmbiguousAmalgamationError("two-block inverse does not undo the coset map")
    new3 = word_array(new.shift_cur, 3)
    left = inv[new3[:, 0], new3[:, 1]]
    right = inv[new3[:, 1], new3[:, 2]]
    if (left < 0).any() or (right < 0).any() or not s.shift_cur.adj[left, right].all():
        raise AmbiguousAmalgamationError("two-block inverse leaves the old shift")

    nf, np_, _ = compute_fpk(new)
    card = (f.order // s.h_cur.order, p.order // s.h_cur.order)
    card_new = (nf.order // big.order, np_.order // big.order)
    if card != card_new:
        raise DecompositionError(f"amalgamation changed follower/predecessor cardinalities {card} -> {card_new}")
    index = big.order // s.h_cur.order
    step = Step("amalgamate", side, 1, index, s.size, new.size,
                card[0], card_new[0], card[1], card_new[1], fwd, inv)
    new = ReductionState(new.ambient, new.edge_adj, new.h_cur, new.blocks, new.label, new.shift_cur,
                         s.history + (step,))
    mapping = {(int(x), int(y)): int(inv[x, y]) for x, y in np.argwhere(inv >= 0)}
    if side == "follower":
        back = BlockMap.from_table(0, 1, new.size, mapping, s.size)
    else:
        back = BlockMap.from_table(1, 0, new.size, mapping, s.size)
    maps = (BlockMap.one_block(fwd, new.size), back)
    log.debug("amalgamate (%s): %d -> %d symbols", side, s.size, new.size)
    return new, maps


# certificates ---------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DecompositionCertificate:
    """Full-shift factors, permutation residual and the conjugacy between them.

    A product symbol is ``(residual state, kappa_1, ..., kappa_r)`` encoded
    in mixed radix with the residual state most significant.
    """

    emitted: tuple[int, ...]
    residual: tuple[int, ...]                    # cycle lengths
    residual_shift: VertexShift
    product: VertexShift
    forward: BlockMap
    inverse: BlockMap
    steps: tuple[Step, ...]
    original_size: int

    @property
    def full_shift_size(self) -> int:
        return math.prod(self.emitted)

    @property
    def amalgamation_index(self) -> int:
        """Product of the coset indices of the amalgamation steps."""
        return math.prod(s.index for s in self.steps if s.kind == "amalgamate")

    def decode(self, code: int) -> tuple[int, ...]:
        out = []
        for d in reversed(self.emitted):
            code, r = divmod(code, d)
            out.append(r)
        return (code, *reversed(out))


def _composite_maps(original_label: np.ndarray, steps: Sequence[Step], residual_size: int):
    emitted = [s.factor for s in steps if s.kind == "split"]
    radix = math.prod(emitted)

    s = original_label.copy()
    kappas = []
    for st in steps:
        if st.kind == "split":
            kappas.append(st.forward[s, 1])
            s = st.forward[s, 0]
        else:
            s = st.forward[s]
    code = s
    for d, kap in zip(emitted, kappas):
        code = code * d + kap
    forward = BlockMap.one_block(code, residual_size * radix)

    memory = sum(1 for st in steps if st.kind == "amalgamate" and st.side == "predecessor")
    anticipation = sum(1 for st in steps if st.kind == "amalgamate" and st.side == "follower")
    to_symbol = np.empty(len(original_label), dtype=np.int64)
    to_symbol[original_label] = np.arange(len(original_label))

    def rule(win: np.ndarray) -> np.ndarray:
        win = np.asarray(win, dtype=np.int64)
        bad = (win < 0).any(axis=1) | (win >= residual_size * radix).any(axis=1)
        rest = np.where(win < 0, 0, win) % max(residual_size * radix, 1)
        parts = []
        for d in reversed(emitted):
            rest, r = np.divmod(rest, d)
            parts.append(r)
        parts.reverse()
        cur = rest
        lo = 0                      # column of cur[:, 0] within the window
        split_no = len(emitted)
        for st in reversed(steps):
            if st.kind == "split":
                split_no -= 1
                kap = parts[split_no][:, lo:lo + cur.shape[1]]
                cur = st.inverse[cur, kap]
            else:
                cur = st.inverse[cur[:, :-1], cur[:, 1:]]
                if st.side == "predecessor":
                    lo += 1
            bad |= (cur < 0).any(axis=1)
            cur = np.where(cur < 0, 0, cur)
        out = to_symbol[cur[:, 0]]
        out[bad] = -1
        return out

    inverse = BlockMap(memory, anticipation, rule, len(original_label))
    return forward, inverse


def _product_shift(residual: VertexShift, steps: Sequence[Step], blocks_by_step) -> VertexShift:
    adj = residual.adj.astype(np.int64)
    names = list(residual.alphabet)
    for st, labels in zip([s for s in steps if s.kind == "split"], blocks_by_step):
        adj = np.kron(adj, np.ones((st.factor, st.factor), dtype=np.int64))
        names = [f"{n}|{lab}" for n in names for lab in labels]
    return VertexShift(tuple(names), adj > 0)


def decompose_driver(m: GroupShiftModel, max_steps: int | None = None) -> DecompositionCertificate:
    """Split while ``k > h``, else amalgamate (follower side first) until ``f = p = h``."""
    state = initial_state(m)
    limit = m.order if max_steps is None else max_steps
    kappa_names = []
    for _ in range(limit + 1):
        f, p, k = compute_fpk(state)
        h = state.h_cur.order
        if f.order == h and p.order == h:
            break
        if len(state.history) >= limit:
            raise IterationLimitError(f"no permutation residual after {limit} steps")
        if k.order > h:
            inner = _cosets_inside(state, k)
            kappa_names.append([state.ambient.name(state.blocks[c][0]) for c in inner])
            state, _, _ = construction1(state)
        elif f.order > h:
            state, _ = construction2(state, "follower")
        else:
            state, _ = construction2(state, "predecessor")

    det = determinism(state.shift_cur)
    if not det.is_permutation:
        raise DecompositionError("residual is not a permutation")
    steps = state.history
    emitted = tuple(s.factor for s in steps if s.kind == "split")
    original_label = initial_state(m).label
    forward, inverse = _composite_maps(np.asarray(original_label), steps, state.size)
    product = _product_shift(state.shift_cur, steps, kappa_names)
    cycles = tuple(len(c) for c in det.cycles)
    cert = DecompositionCertificate(emitted, cycles, state.shift_cur, product, forward, inverse,
                                    steps, m.order)

    f0 = len(m.shift.succ[m.identity])
    if cert.full_shift_size != f0:
        raise DecompositionError(f"emitted sizes multiply to {cert.full_shift_size}, expected {f0}")
    growth = block_entropy(m.shift, 4)
    if growth.base is None or growth.base != cert.full_shift_size:
        raise DecompositionError(f"block growth base {growth.base} differs from {cert.full_shift_size}")
    return cert


# verification ---------------------------------------------------------------------

@dataclass
class VerificationReport:
    passed: bool
    counts: list[tuple[int, int, int]] = field(default_factory=list)   # (n, original, predicted)
    counts_ok: bool = True
    roundtrip_ok: bool = True
    roundtrip_lengths: list[tuple[int, str]] = field(default_factory=list)
    structural_ok: bool = True
    failures: list[str] = field(default_factory=list)


def _roundtrip(src: VertexShift, dst: VertexShift, there: BlockMap, back: BlockMap,
               n: int) -> tuple[bool, str]:
    """``back . there`` is the identity on ``n``-words of ``src`` and lands in ``dst``."""
    w = word_array(src, n)
    img = there.apply(w)
    if (img < 0).any() or (img >= dst.size).any():
        return False, "image outside the target alphabet"
    if img.shape[1] >= 2 and not dst.adj[img[:, :-1], img[:, 1:]].all():
        return False, "image is not a word of the target"
    rec = back.apply(img)
    lo = there.memory + back.memory
    hi = lo + rec.shape[1]
    if rec.shape[1] and not np.array_equal(rec, w[:, lo:hi]):
        return False, "round trip does not return the input"
    return True, ""


def verify_certificate(original: VertexShift, c: DecompositionCertificate, n_max: int = 8,
                       word_budget: int = DEFAULT_WORD_BUDGET) -> VerificationReport:
    """Independent checks on a certificate.

    (a) for ``n <= n_max``, the word counts of the original equal
        ``R * I * D**n``, where ``R`` is the residual size, ``D`` the full
        shift size and ``I`` the product of the amalgamation indices;
    (b) inverse after forward (and forward after inverse) is the identity on
        every word up to ``n_max``.  Lengths whose word count exceeds
        ``word_budget`` are skipped.  Both composites are sliding codes with
        window ``w = memory + anticipation + 1``, so a pass at length ``w``
        already covers every longer word, and that length is always checked.
    (c) both maps are sliding block codes, hence commute with the shift.
    """
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    rep = VerificationReport(True)
    if original.size != c.original_size:
        rep.passed = rep.structural_ok = False
        rep.failures.append(f"(c) certificate is for {c.original_size} symbols, shift has {original.size}")
        return rep
    r = c.residual_shift.size
    for n in range(1, n_max + 1):
        got = path_count(original, n)
        want = r * c.amalgamation_index * c.full_shift_size ** n
        rep.counts.append((n, got, want))
        if got != want:
            rep.counts_ok = False
            rep.failures.append(f"(a) length {n}: {got} words, product form predicts {want}")

    w = c.inverse.window
    lengths = sorted({n for n in range(1, n_max + 1)} | {w, w + 1})
    for n in lengths:
        for label, src, dst, there, back in (
                ("inverse.forward", original, c.product, c.forward, c.inverse),
                ("forward.inverse", c.product, original, c.inverse, c.forward)):
            if n < there.window + back.window - 1 and n not in (w, w + 1):
                continue
            count = path_count(src, n)
            if count > word_budget and n > w + 1:
                rep.roundtrip_lengths.append((n, f"{label}: skipped ({count} words)"))
                continue
            ok, why = _roundtrip(src, dst, there, back, n)
            rep.roundtrip_lengths.append((n, f"{label}: {'ok' if ok else why}"))
            if not ok:
                rep.roundtrip_ok = False
                rep.failures.append(f"(b) {label} at length {n}: {why}")

    if not (isinstance(c.forward, BlockMap) and isinstance(c.inverse, BlockMap)):
        rep.structural_ok = False
        rep.failures.append("(c) maps are not sliding block codes")
    rep.passed = rep.counts_ok and rep.roundtrip_ok and rep.structural_ok
    return rep

"""Finite-alphabet vertex shifts and shifts of finite type.

A :class:`VertexShift` is a one-step Markov shift given by a 0/1 transition
matrix on a finite alphabet.  A :class:`FiniteTypeShift` is given by a list
of forbidden words and may have memory larger than one; it only feeds
:func:`markov_memory` and :func:`higher_block`, which turn it into a vertex
shift.

Symbols are referred to by their index in ``alphabet`` and words are tuples
of indices.  All enumerations are lexicographic in the index order and all
counts are exact integers.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .errors import NotAWordError, NotStabilizedError, ShiftError, SizeLimitError
from .groups import permutation_cycles

logger = logging.getLogger(__name__)

DEFAULT_WORD_LIMIT = 10**7


def word_limit() -> int:
    """Enumeration cap; override with the ``COSETSHIFT_MAX_WORDS`` environment variable."""
    raw = os.environ.get("COSETSHIFT_MAX_WORDS")
    return int(raw) if raw else DEFAULT_WORD_LIMIT


@dataclass(frozen=True, eq=False)
class VertexShift:
    """One-step Markov shift: symbol ``i`` may be followed by ``j`` iff ``adj[i, j]``.

    Build instances with :func:`vertex_shift`, which strips symbols that
    cannot occur in any bi-infinite point.
    """

    alphabet: tuple[str, ...]
    adj: np.ndarray
    designation: Any = None

    def __post_init__(self):
        self.adj.setflags(write=False)

    def __len__(self):
        return len(self.alphabet)

    @property
    def size(self) -> int:
        return len(self.alphabet)

    @cached_property
    def _index(self):
        return {s: i for i, s in enumerate(self.alphabet)}

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"no symbol named {name!r}") from None

    @cached_property
    def succ(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(np.nonzero(row)[0].tolist()) for row in self.adj)

    @cached_property
    def pred(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(np.nonzero(col)[0].tolist()) for col in self.adj.T)

    def edges(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in np.argwhere(self.adj)]

    def edge_count(self) -> int:
        return int(self.adj.sum())

    def __eq__(self, other):
        if not isinstance(other, VertexShift):
            return NotImplemented
        return self.alphabet == other.alphabet and np.array_equal(self.adj, other.adj)

    def __hash__(self):
        return hash((self.alphabet, self.adj.tobytes()))

    def __repr__(self):
        return f"VertexShift(symbols={self.size}, edges={self.edge_count()})"


def vertex_shift(alphabet: Sequence[str], edges: Iterable, designation=None, strip: bool = True) -> VertexShift:
    """Build a vertex shift from an alphabet and ``(source, target)`` pairs.

    Pairs may use names or indices.  Symbols without an incoming or outgoing
    edge (after iterated removal) are dropped with a logged warning.
    """
    alphabet = tuple(str(a) for a in alphabet)
    if len(set(alphabet)) != len(alphabet):
        raise ShiftError("duplicate symbols in alphabet")
    index = {a: i for i, a in enumerate(alphabet)}
    adj = np.zeros((len(alphabet), len(alphabet)), dtype=bool)
    for s, t in edges:
        s = index[s] if isinstance(s, str) else int(s)
        t = index[t] if isinstance(t, str) else int(t)
        adj[s, t] = True
    return shift_from_matrix(alphabet, adj, designation, strip)


def shift_from_matrix(alphabet: Sequence[str], adj, designation=None, strip: bool = True) -> VertexShift:
    alphabet = tuple(alphabet)
    adj = np.array(adj, dtype=bool)
    if adj.shape != (len(alphabet), len(alphabet)):
        raise ShiftError("adjacency matrix shape does not match the alphabet")
    if strip:
        keep = np.ones(len(alphabet), dtype=bool)
        while True:
            sub = adj[np.ix_(keep, keep)]
            ok = sub.any(axis=1) & sub.any(axis=0)
            if ok.all():
                break
            idx = np.nonzero(keep)[0]
            keep[idx[~ok]] = False
        if not keep.all():
            dropped = [alphabet[i] for i in np.nonzero(~keep)[0]]
            logger.warning("stripping %d symbol(s) that occur in no point: %s", len(dropped), dropped)
            alphabet = tuple(a for a, k in zip(alphabet, keep) if k)
            adj = adj[np.ix_(keep, keep)]
        if not alphabet:
            raise ShiftError("the shift is empty")
    return VertexShift(alphabet, adj.copy(), designation)


def full_shift(symbols) -> VertexShift:
    if isinstance(symbols, int):
        symbols = [str(i) for i in range(symbols)]
    n = len(symbols)
    return VertexShift(tuple(symbols), np.ones((n, n), dtype=bool))


def permutation_shift(alphabet: Sequence[str], image: Sequence[int]) -> VertexShift:
    n = len(alphabet)
    adj = np.zeros((n, n), dtype=bool)
    adj[np.arange(n), np.asarray(image)] = True
    return VertexShift(tuple(alphabet), adj)


@dataclass(frozen=True, eq=False)
class FiniteTypeShift:
    """Shift of finite type given by forbidden words over ``alphabet``.

    Internally it is presented by the graph on allowed blocks of length
    ``block_length`` (longest forbidden word minus one, at least one), pruned
    to the part that supports bi-infinite paths.
    """

    alphabet: tuple[str, ...]
    forbidden: tuple[tuple[int, ...], ...]

    @property
    def size(self) -> int:
        return len(self.alphabet)

    @cached_property
    def block_length(self) -> int:
        return max([1] + [len(w) - 1 for w in self.forbidden])

    @cached_property
    def _presentation(self):
        m = self.block_length
        bad = {w for w in self.forbidden}

        def allowed(w):
            return not any(w[i:j] in bad for i in range(len(w)) for j in range(i + 1, len(w) + 1))

        blocks = [b for b in _all_tuples(self.size, m) if allowed(b)]
        index = {b: i for i, b in enumerate(blocks)}
        adj = np.zeros((len(blocks), len(blocks)), dtype=bool)
        for b in blocks:
            for a in range(self.size):
                w = b + (a,)
                if allowed(w) and w[1:] in index:
                    adj[index[b], index[w[1:]]] = True
        sep = "" if all(len(a) == 1 for a in self.alphabet) else "~"
        keep = _essential_mask(adj)
        if not keep.any():
            raise ShiftError("the shift of finite type is empty")
        kept = [blocks[i] for i in np.nonzero(keep)[0]]
        names = tuple(sep.join(self.alphabet[s] for s in b) for b in kept)
        return kept, VertexShift(names, adj[np.ix_(keep, keep)])

    @property
    def blocks(self) -> list[tuple[int, ...]]:
        return self._presentation[0]

    @property
    def block_graph(self) -> VertexShift:
        return self._presentation[1]


def finite_type_shift(alphabet: Sequence[str], forbidden: Iterable[Sequence]) -> FiniteTypeShift:
    alphabet = tuple(str(a) for a in alphabet)
    index = {a: i for i, a in enumerate(alphabet)}
    words = []
    for w in forbidden:
        words.append(tuple(index[s] if isinstance(s, str) else int(s) for s in w))
    return FiniteTypeShift(alphabet, tuple(sorted(set(words))))


def _all_tuples(k, n):
    if n == 0:
        return [()]
    arr = np.indices((k,) * n).reshape(n, -1).T
    return [tuple(int(x) for x in row) for row in arr]


def _essential_mask(adj):
    keep = np.ones(adj.shape[0], dtype=bool)
    while True:
        sub = adj[np.ix_(keep, keep)]
        ok = sub.any(axis=1) & sub.any(axis=0)
        if ok.all():
            return keep
        idx = np.nonzero(keep)[0]
        keep[idx[~ok]] = False
        if not keep.any():
            return keep


# words ------------------------------------------------------------------------

def word_array(x, n: int, limit: int | None = None) -> np.ndarray:
    """All words of length ``n`` as a ``(count, n)`` integer array, lexicographic."""
    if n < 0:
        raise ValueError("word length must be non-negative")
    limit = word_limit() if limit is None else limit
    if isinstance(x, FiniteTypeShift):
        return _fts_word_array(x, n, limit)
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)
    count = path_count(x, n)
    if count > limit:
        raise SizeLimitError(f"{count} words of length {n} exceed the limit of {limit}")
    out = np.arange(x.size, dtype=np.int64)[:, None]
    succ = [np.asarray(s, dtype=np.int64) for s in x.succ]
    deg = np.asarray([len(s) for s in succ])
    for _ in range(n - 1):
        last = out[:, -1]
        reps = deg[last]
        nxt = np.concatenate([succ[s] for s in last]) if len(last) else np.zeros(0, dtype=np.int64)
        out = np.hstack([np.repeat(out, reps, axis=0), nxt[:, None]])
    return out


def _fts_word_array(x: FiniteTypeShift, n: int, limit: int) -> np.ndarray:
    m = x.block_length
    blocks = np.asarray(x.blocks, dtype=np.int64).reshape(len(x.blocks), m)
    if n <= m:
        return np.unique(blocks[:, :n], axis=0) if n else np.zeros((1, 0), dtype=np.int64)
    paths = word_array(x.block_graph, n - m + 1, limit)
    first = blocks[paths[:, :], 0]
    tail = blocks[paths[:, -1], 1:]
    out = np.hstack([first, tail])
    # lexicographic order is inherited from the block order of the graph
    order = np.lexsort(out.T[::-1])
    return out[order]


def words(x, n: int, limit: int | None = None) -> list[tuple[int, ...]]:
    """Words of length ``n`` that occur in some point of ``x``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return [tuple(int(v) for v in row) for row in word_array(x, n, limit)]


def is_word(x, w: Sequence[int]) -> bool:
    w = tuple(int(s) for s in w)
    if isinstance(x, FiniteTypeShift):
        return w in _language(x, len(w))
    if any(not 0 <= s < x.size for s in w):
        return False
    return all(x.adj[a, b] for a, b in zip(w, w[1:]))


def _language(x: FiniteTypeShift, n: int) -> frozenset:
    cache = x.__dict__.setdefault("_lang_cache", {})
    if n not in cache:
        cache[n] = frozenset(tuple(int(v) for v in row) for row in word_array(x, n))
    return cache[n]


def _check_word(x, w):
    w = tuple(int(s) for s in w)
    if w and not is_word(x, w):
        raise NotAWordError(f"{w} is not a word of the shift")
    return w


def follower(x, w: Sequence[int]) -> tuple[int, ...]:
    """Sorted symbols ``a`` such that ``w + (a,)`` is a word."""
    w = _check_word(x, w)
    if isinstance(x, FiniteTypeShift):
        lang = _language(x, len(w) + 1)
        return tuple(a for a in range(x.size) if w + (a,) in lang)
    if not w:
        return tuple(range(x.size))
    return x.succ[w[-1]]


def predecessor(x, w: Sequence[int]) -> tuple[int, ...]:
    """Sorted symbols ``a`` such that ``(a,) + w`` is a word."""
    w = _check_word(x, w)
    if isinstance(x, FiniteTypeShift):
        lang = _language(x, len(w) + 1)
        return tuple(a for a in range(x.size) if (a,) + w in lang)
    if not w:
        return tuple(range(x.size))
    return x.pred[w[0]]


def _follower_table(x, n: int) -> dict:
    table: dict[tuple, set] = {}
    for row in word_array(x, n + 1):
        w = tuple(int(v) for v in row)
        table.setdefault(w[:-1], set()).add(w[-1])
    return {k: frozenset(v) for k, v in table.items()}


def markov_memory(x, max_n: int) -> int:
    """Least ``N <= max_n`` such that followers depend only on the last ``N`` symbols.

    For each candidate ``N`` every word of length ``N+1 .. max_n+1`` is
    compared against its length-``N`` suffix.  The comparison runs up to
    the memory bound of the presentation (one for a vertex shift, the block
    length for a forbidden-word shift), so the answer is exact: a shift whose
    memory exceeds ``max_n`` raises instead of passing on short words.
    """
    if max_n < 1:
        raise ValueError("max_n must be at least 1")
    horizon = max(max_n, x.block_length if isinstance(x, FiniteTypeShift) else 1)
    tables = {}

    def table(n):
        if n not in tables:
            tables[n] = _follower_table(x, n)
        return tables[n]

    for n in range(max_n + 1):
        base = table(n)
        ok = True
        for length in range(n + 1, horizon + 2):
            for w, fol in table(length).items():
                if base[w[length - n:]] != fol:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return n
    raise NotStabilizedError(f"follower sets still depend on more than {max_n} symbols")


# block maps ---------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BlockMap:
    """Sliding block code with a window of ``memory + 1 + anticipation`` symbols.

    ``rule`` takes an integer array of shape ``(count, window)`` and returns
    the ``count`` image symbols; ``-1`` marks a window outside the domain.
    """

    memory: int
    anticipation: int
    rule: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    target_size: int | None = None

    @property
    def window(self) -> int:
        return self.memory + 1 + self.anticipation

    def apply(self, w: np.ndarray) -> np.ndarray:
        """Image of a batch of words ``(count, L)``; the result has ``L - window + 1`` columns."""
        w = np.asarray(w, dtype=np.int64)
        if w.ndim == 1:
            return self.apply(w[None, :])[0]
        count, length = w.shape
        k = length - self.window + 1
        if k <= 0:
            return np.zeros((count, 0), dtype=np.int64)
        wins = np.lib.stride_tricks.sliding_window_view(w, self.window, axis=1)
        flat = wins.reshape(count * k, self.window)
        return np.asarray(self.rule(flat), dtype=np.int64).reshape(count, k)

    def apply_word(self, w: Sequence[int]) -> tuple[int, ...]:
        return tuple(int(v) for v in self.apply(np.asarray(w, dtype=np.int64)))

    @classmethod
    def from_table(cls, memory: int, anticipation: int, source_size: int, mapping: dict,
                   target_size: int | None = None) -> "BlockMap":
        window = memory + 1 + anticipation
        if source_size ** window <= 4_000_000:
            lut = np.full((source_size,) * window, -1, dtype=np.int64)
            for key, val in mapping.items():
                lut[tuple(key)] = val

            def rule(win, lut=lut):
                return lut[tuple(win.T)]
        else:
            frozen = dict(mapping)

            def rule(win, frozen=frozen):
                return np.fromiter((frozen.get(tuple(r), -1) for r in win.tolist()),
                                   dtype=np.int64, count=len(win))
        return cls(memory, anticipation, rule, target_size)

    @classmethod
    def one_block(cls, image: Sequence[int], target_size: int | None = None) -> "BlockMap":
        lut = np.asarray(image, dtype=np.int64)
        return cls(0, 0, lambda win: lut[win[:, 0]], target_size)


def compose(outer: BlockMap, inner: BlockMap) -> BlockMap:
    """``outer`` after ``inner``; windows add up."""

    def rule(win):
        return outer.apply(inner.apply(win))[:, 0]

    return BlockMap(inner.memory + outer.memory, inner.anticipation + outer.anticipation,
                    rule, outer.target_size)


def higher_block(x, n: int, limit: int | None = None) -> tuple[VertexShift, BlockMap, BlockMap]:
    """Standard ``n``-block presentation of ``x``.

    Returns the recoded vertex shift, the forward map (window ``(0, n-1)``)
    and the one-block inverse that reads off the first symbol of a block.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if isinstance(x, FiniteTypeShift) and n < x.block_length:
        raise ShiftError(f"block length {n} is below the memory bound {x.block_length}")
    blocks = word_array(x, n, limit)
    longer = word_array(x, n + 1, limit)
    index = {tuple(int(v) for v in b): i for i, b in enumerate(blocks)}
    adj = np.zeros((len(blocks), len(blocks)), dtype=bool)
    for w in longer:
        w = tuple(int(v) for v in w)
        adj[index[w[:-1]], index[w[1:]]] = True
    sep = "" if all(len(a) == 1 for a in x.alphabet) else "~"
    names = [sep.join(x.alphabet[s] for s in b) for b in index]
    recoded = VertexShift(tuple(names), adj)
    forward = BlockMap.from_table(0, n - 1, x.size, index, target_size=len(blocks))
    inverse = BlockMap.one_block(blocks[:, 0], target_size=x.size)
    return recoded, forward, inverse


# counting ---------------------------------------------------------------------

def _count_vectors(x: VertexShift, n: int, reverse: bool = False):
    """``v[i]`` = number of words of length ``n`` starting (ending, if reverse) at ``i``."""
    mat = x.adj.T if reverse else x.adj
    mat = mat.astype(np.int64)
    v = np.ones(x.size, dtype=np.int64)
    maxdeg = int(mat.sum(axis=1).max()) if x.size else 0
    for _ in range(n - 1):
        if v.dtype != object and int(v.max()) * max(maxdeg, 1) >= 2**62:
            v = v.astype(object)
            mat = mat.astype(object)
        v = mat.dot(v)
    return v


def path_count(x: VertexShift, n: int, start: int | None = None, reverse: bool = False) -> int:
    """Exact number of words of length ``n``, optionally starting at ``start``.

    With ``reverse=True`` the words are required to *end* at ``start``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if isinstance(x, FiniteTypeShift):
        if start is not None:
            raise ShiftError("start symbols are only supported on vertex shifts")
        return len(word_array(x, n))
    v = _count_vectors(x, n, reverse)
    if start is None:
        return int(sum(int(c) for c in v))
    return int(v[start])


@dataclass(frozen=True)
class GrowthReport:
    counts: tuple[int, ...]
    ratios: tuple[Fraction, ...]
    geometric: bool

    @property
    def log_ratios(self) -> tuple[float, ...]:
        return tuple(math.log(r) for r in self.ratios)

    @property
    def base(self) -> Fraction | None:
        """Exact growth base when the counts are geometric."""
        return self.ratios[0] if self.geometric and self.ratios else None

    @property
    def entropy(self) -> float | None:
        return math.log(self.base) if self.base is not None else None


def block_entropy(x: VertexShift, n_max: int) -> GrowthReport:
    """Word-count growth ``log(c(n+1)/c(n))`` for ``n < n_max``.

    The counts are geometric exactly when every ratio is the same rational
    number; the limit is then the log of that number.
    """
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    counts = tuple(path_count(x, n) for n in range(1, n_max + 1))
    ratios = tuple(Fraction(counts[i + 1], counts[i]) for i in range(len(counts) - 1))
    return GrowthReport(counts, ratios, len(set(ratios)) == 1)


@dataclass(frozen=True)
class Determinism:
    forward: bool
    backward: bool
    cycles: tuple[tuple[int, ...], ...] | None = None

    @property
    def is_permutation(self) -> bool:
        return self.forward and self.backward

    @property
    def cycle_lengths(self) -> tuple[int, ...] | None:
        return None if self.cycles is None else tuple(sorted(len(c) for c in self.cycles))


def determinism(x: VertexShift) -> Determinism:
    """Whether every symbol has exactly one follower / one predecessor.

    When both hold the shift is a permutation of its alphabet and its
    cycles are returned, each starting at its smallest index.
    """
    out = x.adj.sum(axis=1)
    inc = x.adj.sum(axis=0)
    fwd = bool((out == 1).all())
    bwd = bool((inc == 1).all())
    cycles = None
    if fwd and bwd:
        image = [int(np.argmax(row)) for row in x.adj]
        cycles = tuple(permutation_cycles(image))
    return Determinism(fwd, bwd, cycles)


def follower_cardinalities(x: VertexShift) -> tuple[set[int], set[int]]:
    """Distinct out-degrees and in-degrees."""
    return set(x.adj.sum(axis=1).tolist()), set(x.adj.sum(axis=0).tolist())

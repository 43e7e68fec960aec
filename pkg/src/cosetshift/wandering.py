"""Countable-state transition graphs described by affine index rules.

A state is a class name together with an integer index vector.  A rule
sends a state of its source class to ``A x + c`` in its target class, where
``A`` is a square invertible rational matrix.  The rule fires only when the
source satisfies the per-coordinate guards and the image is integral.
Because ``A`` is invertible, predecessors come from the inverse map.

Truncations keep the states whose index norm (the sum of absolute values
over the class's ``norm_dims``) is at most the radius and that can be
reached from the base, fixed and root states without leaving the ball.
"""

from __future__ import annotations

import ast
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import networkx as nx
import numpy as np

from .errors import (
    BadCertificateError,
    EmptyTruncationError,
    RadiusTooSmallError,
    RuleError,
    WanderingError,
)

State = tuple  # (class name, index tuple)

TOTALLY_WANDERING = "TOTALLY_WANDERING"
COUNTEREXAMPLE = "COUNTEREXAMPLE"
INCONCLUSIVE = "INCONCLUSIVE"

BOX_LIMIT = 100_000


def state_name(s: State) -> str:
    cls, idx = s
    return f"{cls}({','.join(str(v) for v in idx)})"


@dataclass(frozen=True)
class DimGuard:
    lo: int | None = None
    hi: int | None = None
    modulus: int | None = None
    residue: int | None = None

    def bounded(self) -> bool:
        return self.lo is not None and self.hi is not None

    def merge(self, other: "DimGuard") -> "DimGuard":
        lo = other.lo if self.lo is None else self.lo if other.lo is None else max(self.lo, other.lo)
        hi = other.hi if self.hi is None else self.hi if other.hi is None else min(self.hi, other.hi)
        mod, res = self.modulus, self.residue
        if other.modulus is not None:
            if mod is not None and (mod, res) != (other.modulus, other.residue):
                raise RuleError("only one congruence per coordinate is supported")
            mod, res = other.modulus, other.residue
        return DimGuard(lo, hi, mod, res)


def _frac_matrix(rows) -> tuple[tuple[Fraction, ...], ...]:
    return tuple(tuple(Fraction(v) for v in r) for r in rows)


def _integer_form(mat, vec):
    """Common-denominator integer form ``(A_num, c_num, den)`` of ``x -> A x + c``."""
    den = 1
    for v in itertools.chain(itertools.chain.from_iterable(mat), vec):
        den = math.lcm(den, v.denominator)
    a = np.array([[int(v * den) for v in r] for r in mat], dtype=np.int64).reshape(len(mat), len(mat))
    c = np.array([int(v * den) for v in vec], dtype=np.int64)
    return a, c, den


def _invert(mat) -> tuple[tuple[Fraction, ...], ...]:
    n = len(mat)
    aug = [list(r) + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(mat)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            raise RuleError("rule matrix is not invertible")
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        aug[col] = [v / p for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                fac = aug[r][col]
                aug[r] = [a - fac * b for a, b in zip(aug[r], aug[col])]
    return tuple(tuple(r[n:]) for r in aug)


@dataclass(frozen=True)
class Rule:
    name: str
    source: str
    target: str
    matrix: tuple[tuple[Fraction, ...], ...]
    offset: tuple[Fraction, ...]
    guards: tuple[DimGuard, ...]
    _fwd: tuple = field(init=False, repr=False, compare=False)
    _bwd: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mat = _frac_matrix(self.matrix)
        off = tuple(Fraction(v) for v in self.offset)
        d = len(mat)
        if any(len(r) != d for r in mat) or len(off) != d or len(self.guards) != d:
            raise RuleError(f"rule {self.name}: matrix, offset and guards must share one dimension")
        inv = _invert(mat) if d else ()
        inv_off = tuple(-sum(inv[i][j] * off[j] for j in range(d)) for i in range(d))
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "offset", off)
        object.__setattr__(self, "_fwd", _integer_form(mat, off))
        object.__setattr__(self, "_bwd", _integer_form(inv, inv_off))

    @property
    def dim(self) -> int:
        return len(self.offset)

    def guard_mask(self, x: np.ndarray) -> np.ndarray:
        mask = np.ones(len(x), dtype=bool)
        for i, g in enumerate(self.guards):
            col = x[:, i]
            if g.lo is not None:
                mask &= col >= g.lo
            if g.hi is not None:
                mask &= col <= g.hi
            if g.modulus is not None:
                mask &= np.mod(col, g.modulus) == g.residue
        return mask

    def _affine(self, x: np.ndarray, form) -> tuple[np.ndarray, np.ndarray]:
        a, c, den = form
        y = np.empty((len(x), len(c)), dtype=np.int64)
        for i in range(len(c)):
            col = np.full(len(x), c[i], dtype=np.int64)
            for j in np.nonzero(a[i])[0]:
                col += a[i, j] * x[:, j]
            y[:, i] = col
        ok = (np.mod(y, den) == 0).all(axis=1)
        return ok, y // den

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Rows of ``x`` where the rule fires, and their images."""
        x = np.asarray(x, dtype=np.int64).reshape(-1, self.dim)
        ok, y = self._affine(x, self._fwd)
        ok &= self.guard_mask(x)
        return ok, y

    def backward(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Rows of ``y`` that are images under the rule, and their preimages."""
        y = np.asarray(y, dtype=np.int64).reshape(-1, self.dim)
        ok, x = self._affine(y, self._bwd)
        ok &= self.guard_mask(x)
        return ok, x

    def source_box(self):
        """Integer points of the guard box, or ``None`` if some coordinate is unbounded."""
        if not all(g.bounded() for g in self.guards):
            return None
        ranges = [range(g.lo, g.hi + 1) for g in self.guards]
        if math.prod(len(r) for r in ranges) > BOX_LIMIT:
            return None
        pts = np.array(list(itertools.product(*ranges)), dtype=np.int64).reshape(-1, self.dim)
        return pts[self.guard_mask(pts)]


def rule(name: str, source: str, target: str, matrix, offset, guards: dict | None = None) -> Rule:
    """Convenience constructor; ``guards`` maps a coordinate to a dict of DimGuard fields."""
    d = len(offset)
    g = [DimGuard() for _ in range(d)]
    for i, spec in (guards or {}).items():
        g[i] = g[i].merge(DimGuard(**spec))
    return Rule(name, source, target, matrix, offset, tuple(g))


@dataclass(frozen=True, eq=False)
class GeneratedGraph:
    name: str
    classes: tuple[str, ...]
    dims: dict
    norm_dims: dict
    rules: tuple[Rule, ...]
    base: State
    fixed: tuple[State, ...]
    roots: tuple[State, ...] = ()
    variables: dict = field(default_factory=dict)

    def __post_init__(self):
        for r in self.rules:
            for c in (r.source, r.target):
                if c not in self.dims:
                    raise RuleError(f"rule {r.name} refers to unknown class {c}")
            if self.dims[r.source] != self.dims[r.target] or r.dim != self.dims[r.source]:
                raise RuleError(f"rule {r.name}: class dimensions do not match the rule")
        for s in (self.base, *self.fixed, *self.roots):
            if s[0] not in self.dims or len(s[1]) != self.dims[s[0]]:
                raise RuleError(f"state {state_name(s)} does not fit its class")
        for s in self.fixed:
            if s not in successors(self, s):
                raise WanderingError(f"declared fixed state {state_name(s)} has no self-loop")

    def norm(self, s: State) -> int:
        return sum(abs(int(s[1][i])) for i in self.norm_dims.get(s[0], ()))

    def __eq__(self, other):
        if not isinstance(other, GeneratedGraph):
            return NotImplemented
        return (self.classes, self.dims, self.norm_dims, set(self.rules), self.base,
                set(self.fixed), set(self.roots)) == (
            other.classes, other.dims, other.norm_dims, set(other.rules), other.base,
            set(other.fixed), set(other.roots))

    __hash__ = None


def _batch_step(g: GeneratedGraph, cls: str, x: np.ndarray, reverse: bool):
    """Yield ``(rows, target class, images)`` for every rule touching ``cls``."""
    for r in g.rules:
        if (r.target if reverse else r.source) != cls:
            continue
        ok, y = (r.backward if reverse else r.forward)(x)
        rows = np.nonzero(ok)[0]
        if len(rows):
            yield rows, (r.source if reverse else r.target), y[rows]


def successors(g: GeneratedGraph, s: State, reverse: bool = False) -> list[State]:
    x = np.asarray([s[1]], dtype=np.int64).reshape(1, -1)
    out = set()
    for _, cls, y in _batch_step(g, s[0], x, reverse):
        out.update((cls, tuple(int(v) for v in row)) for row in y)
    return sorted(out)


# truncation -----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TruncatedGraph:
    """Finite window onto a generated graph (or a quotient of one)."""

    name: str
    states: tuple[State, ...]
    edges: tuple[tuple[int, int], ...]
    boundary: frozenset
    base: int | None
    fixed: tuple[int, ...]
    radius: int | None = None
    ranks: tuple | None = None

    @property
    def size(self) -> int:
        return len(self.states)

    @property
    def index(self) -> dict:
        return {s: i for i, s in enumerate(self.states)}

    def names(self) -> list[str]:
        return [state_name(s) if isinstance(s, tuple) else str(s) for s in self.states]

    def succ(self) -> list[list[int]]:
        out = [[] for _ in self.states]
        for i, j in self.edges:
            out[i].append(j)
        return out

    def pred(self) -> list[list[int]]:
        out = [[] for _ in self.states]
        for i, j in self.edges:
            out[j].append(i)
        return out

    def digraph(self) -> nx.DiGraph:
        dg = nx.DiGraph()
        dg.add_nodes_from(range(self.size))
        dg.add_edges_from(self.edges)
        return dg

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.size, self.size), dtype=bool)
        for i, j in self.edges:
            adj[i, j] = True
        return adj


def _layer_expand(g: GeneratedGraph, frontier: dict, reverse: bool) -> dict:
    out: dict[str, list] = {}
    for cls, x in frontier.items():
        for _, tcls, y in _batch_step(g, cls, x, reverse):
            out.setdefault(tcls, []).append(y)
    return {c: np.unique(np.vstack(v), axis=0) for c, v in out.items()}


def _norms(g: GeneratedGraph, cls: str, x: np.ndarray) -> np.ndarray:
    dims = list(g.norm_dims.get(cls, ()))
    if not dims:
        return np.zeros(len(x), dtype=np.int64)
    return np.abs(x[:, dims]).sum(axis=1)


def truncate(g: GeneratedGraph, radius: int) -> TruncatedGraph:
    """Finite subgraph of states within ``radius`` connected to the root states."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    seeds = [s for s in dict.fromkeys((g.base, *g.fixed, *g.roots)) if g.norm(s) <= radius]
    if not seeds:
        raise EmptyTruncationError(f"no root state lies within radius {radius}")
    seen = set(seeds)
    frontier: dict[str, np.ndarray] = {}
    for cls, idx in seeds:
        frontier.setdefault(cls, []).append(idx)
    frontier = {c: np.asarray(v, dtype=np.int64).reshape(len(v), -1) for c, v in frontier.items()}
    while frontier:
        nxt: dict[str, list] = {}
        for reverse in (False, True):
            for cls, y in _layer_expand(g, frontier, reverse).items():
                y = y[_norms(g, cls, y) <= radius]
                for row in y:
                    s = (cls, tuple(int(v) for v in row))
                    if s not in seen:
                        seen.add(s)
                        nxt.setdefault(cls, []).append(s[1])
        frontier = {c: np.asarray(v, dtype=np.int64).reshape(len(v), -1) for c, v in nxt.items()}

    order = {c: i for i, c in enumerate(g.classes)}
    states = tuple(sorted(seen, key=lambda s: (order[s[0]], s[1])))
    index = {s: i for i, s in enumerate(states)}
    edges = set()
    boundary = set()
    by_class: dict[str, list[int]] = {}
    for i, s in enumerate(states):
        by_class.setdefault(s[0], []).append(i)
    for cls, members in by_class.items():
        x = np.asarray([states[i][1] for i in members], dtype=np.int64).reshape(len(members), -1)
        for reverse in (False, True):
            for rows, tcls, y in _batch_step(g, cls, x, reverse):
                for r, row in zip(rows, y):
                    t = index.get((tcls, tuple(int(v) for v in row)))
                    src = members[r]
                    if t is None:
                        boundary.add(src)
                    elif not reverse:
                        edges.add((src, t))
    return TruncatedGraph(g.name, states, tuple(sorted(edges)), frozenset(boundary),
                          index.get(g.base), tuple(index[s] for s in g.fixed if s in index), radius)


# builders ---------------------------------------------------------------------------

def _q3_drop_rules(cls: str = "Q") -> list[Rule]:
    """Multiplication by 3 on fractional digit strings: the first digit falls off."""
    out = []
    for c in range(3):
        out.append(rule(f"drop{c}", cls, cls, [[1, 0], [0, Fraction(1, 3)]], [-1, Fraction(-c, 3)],
                        {0: {"lo": 2 if c == 0 else 1}, 1: {"modulus": 3, "residue": c}}))
    out.append(rule("stay", cls, cls, [[1, 0], [0, 1]], [0, 0], {0: {"lo": 0, "hi": 0}, 1: {"lo": 0, "hi": 0}}))
    return out


def q3_graph() -> GeneratedGraph:
    """Cosets of the 3-adic integers in the 3-adic numbers under multiplication by 3.

    State ``Q(k, n)`` is the coset whose fractional part has exactly ``k``
    digits; ``n`` lists them in base 3 with the first digit after the point
    least significant, so ``3**(k-1) <= n < 3**k``.  ``Q(0, 0)`` is the
    subgroup itself.  Every state has one follower and three predecessors.
    """
    return GeneratedGraph("q3", ("Q",), {"Q": 2}, {"Q": (0,)}, tuple(_q3_drop_rules()),
                          ("Q", (0, 0)), (("Q", (0, 0)),), (), {"Q": ("k", "n")})


def _append_pieces():
    """Multiplication by 1/3: a new first digit ``j`` is pushed in front."""
    out = []
    for j in range(3):
        out.append((f"append{j}", [[1, 0], [0, 3]], [1, j], [{"lo": 1}, {}]))
    for j in (1, 2):
        out.append((f"up{j}", [[1, 0], [0, 1]], [1, j], [{"lo": 0, "hi": 0}, {"lo": 0, "hi": 0}]))
    out.append(("stay", [[1, 0], [0, 1]], [0, 0], [{"lo": 0, "hi": 0}, {"lo": 0, "hi": 0}]))
    return out


def _drop_pieces():
    out = []
    for c in range(3):
        out.append((f"drop{c}", [[1, 0], [0, Fraction(1, 3)]], [-1, Fraction(-c, 3)],
                    [{"lo": 2 if c == 0 else 1}, {"modulus": 3, "residue": c}]))
    out.append(("stay", [[1, 0], [0, 1]], [0, 0], [{"lo": 0, "hi": 0}, {"lo": 0, "hi": 0}]))
    return out


def q3xq3_graph() -> GeneratedGraph:
    """Product of multiplication by 1/3 on the first copy and by 3 on the second.

    State ``P(k1, n1, k2, n2)`` pairs two digit-string cosets as in
    :func:`q3_graph`.  Every state has three followers and three
    predecessors; the only cycle is the self-loop at ``P(0, 0, 0, 0)``.
    """
    rules = []
    for (n1, a1, c1, g1), (n2, a2, c2, g2) in itertools.product(_append_pieces(), _drop_pieces()):
        mat = [[a1[0][0], a1[0][1], 0, 0], [a1[1][0], a1[1][1], 0, 0],
               [0, 0, a2[0][0], a2[0][1]], [0, 0, a2[1][0], a2[1][1]]]
        guards = {i: gd for i, gd in enumerate(g1 + g2) if gd}
        rules.append(rule(f"{n1}.{n2}", "P", "P", mat, list(c1) + list(c2), guards))
    zero = ("P", (0, 0, 0, 0))
    return GeneratedGraph("q3xq3", ("P",), {"P": 4}, {"P": (0, 2)}, tuple(rules), zero, (zero,), (),
                          {"P": ("k1", "n1", "k2", "n2")})


def cycle_plus_q3_graph(length: int = 4) -> GeneratedGraph:
    """Disjoint sum of a ``length``-cycle and the 3-adic graph."""
    q = q3_graph()
    cyc = [rule("step", "C", "C", [[1]], [1], {0: {"lo": 0, "hi": length - 2}}),
           rule("wrap", "C", "C", [[1]], [-(length - 1)], {0: {"lo": length - 1, "hi": length - 1}})]
    return GeneratedGraph(f"cycle{length}+q3", ("C", "Q"), {"C": 1, "Q": 2}, {"C": (), "Q": (0,)},
                          tuple(cyc) + q.rules, q.base, q.fixed, (("C", (0,)),),
                          {"C": ("i",), "Q": ("k", "n")})


@dataclass(frozen=True)
class MatrixSystem:
    dimension: int
    matrix: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        mat = tuple(tuple(int(v) for v in r) for r in self.matrix)
        if len(mat) != self.dimension or any(len(r) != self.dimension for r in mat):
            raise WanderingError("matrix shape does not match the dimension")
        if abs(integer_det(mat)) != 1:
            raise WanderingError("matrix is not invertible over the integers")
        object.__setattr__(self, "matrix", mat)


def z2_system() -> MatrixSystem:
    return MatrixSystem(2, ((2, 1), (1, 1)))


def integer_det(mat: Sequence[Sequence[int]]) -> int:
    """Exact determinant by fraction-free (Bareiss) elimination."""
    a = [list(map(int, r)) for r in mat]
    n = len(a)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((r for r in range(k + 1, n) if a[r][k] != 0), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


@dataclass(frozen=True)
class MatrixVerdict:
    passed: bool
    determinants: tuple[int, ...]
    first_zero: int | None


def matrix_no_periodics(m: MatrixSystem, n_max: int) -> MatrixVerdict:
    """``det(M**n - I) != 0`` for ``1 <= n <= n_max``: no nonzero point of period ``n``."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    d = m.dimension
    power = [list(r) for r in m.matrix]
    dets = []
    first_zero = None
    for n in range(1, n_max + 1):
        shifted = [[power[i][j] - (i == j) for j in range(d)] for i in range(d)]
        det = integer_det(shifted)
        dets.append(det)
        if det == 0 and first_zero is None:
            first_zero = n
        power = [[sum(power[i][k] * m.matrix[k][j] for k in range(d)) for j in range(d)] for i in range(d)]
    return MatrixVerdict(first_zero is None, tuple(dets), first_zero)


# certificates and verdicts -------------------------------------------------------------

@dataclass(frozen=True)
class RankCertificate:
    """Affine rank per class, ``rank(s) = weights . index + const``.

    Along every rule the rank must change by a constant, strictly in
    ``direction``.  A rule may keep the rank constant only if its source box
    is finite and every edge it generates stays inside ``exceptions``
    (default: the declared fixed states).  Every cycle then lies in the
    exception set.
    """

    rank: dict
    exceptions: tuple[State, ...] | None = None
    direction: int = 1

    def value(self, s: State) -> Fraction:
        w, c = self.rank[s[0]]
        return sum(Fraction(a) * int(b) for a, b in zip(w, s[1])) + Fraction(c)


@dataclass
class CertificateCheck:
    ok: bool
    deltas: dict = field(default_factory=dict)
    problems: list = field(default_factory=list)


def check_certificate(g: GeneratedGraph, cert: RankCertificate) -> CertificateCheck:
    exceptions = set(g.fixed if cert.exceptions is None else cert.exceptions)
    out = CertificateCheck(True)
    for r in g.rules:
        if r.source not in cert.rank or r.target not in cert.rank:
            raise BadCertificateError(f"no rank given for the classes of rule {r.name}")
        ws, bs = cert.rank[r.source]
        wt, bt = cert.rank[r.target]
        ws = [Fraction(v) for v in ws]
        wt = [Fraction(v) for v in wt]
        d = r.dim
        coeff = [sum(wt[i] * r.matrix[i][j] for i in range(d)) - ws[j] for j in range(d)]
        if any(coeff):
            raise BadCertificateError(f"rank change along rule {r.name} is not constant")
        delta = sum(wt[i] * r.offset[i] for i in range(d)) + Fraction(bt) - Fraction(bs)
        out.deltas[r.name] = delta
        if delta * cert.direction > 0:
            continue
        if delta != 0:
            out.ok = False
            out.problems.append(f"rule {r.name} moves the rank the wrong way ({delta})")
            continue
        box = r.source_box()
        if box is None:
            out.ok = False
            out.problems.append(f"rule {r.name} keeps the rank constant on an unbounded box")
            continue
        ok, y = r.forward(box)
        for x, t in zip(box[ok], y[ok]):
            s = (r.source, tuple(int(v) for v in x))
            u = (r.target, tuple(int(v) for v in t))
            if s not in exceptions or u not in exceptions:
                out.ok = False
                out.problems.append(f"rule {r.name} keeps the rank constant on {state_name(s)} -> {state_name(u)}")
                break
    return out


@dataclass
class Verdict:
    status: str
    cycle: list | None = None
    summary: list = field(default_factory=list)
    truncation_size: int = 0


def _cyclic_components(t: TruncatedGraph) -> list[list[int]]:
    dg = t.digraph()
    loops = {i for i, j in t.edges if i == j}
    comps = [sorted(c) for c in nx.strongly_connected_components(dg) if len(c) > 1 or next(iter(c)) in loops]
    return sorted(comps)


def _witness_cycle(t: TruncatedGraph, comp: list[int]) -> list[int]:
    sub = t.digraph().subgraph(comp)
    start = comp[0]
    return [u for u, _ in nx.find_cycle(sub, source=start)]


def finite_wandering_verdict(t: TruncatedGraph) -> Verdict:
    """Cycle test on a finite graph: only self-loops at fixed states may be cyclic.

    When ``t.ranks`` is present the rank is also checked to increase along
    every edge that is not a fixed-state self-loop.
    """
    v = Verdict(TOTALLY_WANDERING, truncation_size=t.size)
    fixed = set(t.fixed)
    for comp in _cyclic_components(t):
        if len(comp) == 1 and comp[0] in fixed:
            continue
        cyc = _witness_cycle(t, comp)
        v.status = COUNTEREXAMPLE
        v.cycle = [t.names()[i] for i in cyc]
        v.summary.append(f"cycle of length {len(cyc)} through {v.cycle[0]}")
        return v
    v.summary.append(f"{t.size} states: the only cycles are self-loops at the {len(fixed)} fixed state(s)")
    if t.ranks is not None:
        bad = [(i, j) for i, j in t.edges
               if not (i == j and i in fixed) and t.ranks[i] is not None and t.ranks[j] is not None
               and not t.ranks[j] > t.ranks[i]]
        if bad:
            v.status = INCONCLUSIVE
            v.summary.append(f"rank fails to increase on {len(bad)} edge(s)")
        else:
            v.summary.append("rank increases along every other edge")
    return v


def totally_wandering(g: GeneratedGraph, cert: RankCertificate, radius: int) -> Verdict:
    """Cycle analysis of a truncation plus a rank certificate for the whole graph."""
    if radius < 1:
        raise ValueError("radius must be at least 1")
    t = truncate(g, radius)
    check = check_certificate(g, cert)
    v = finite_wandering_verdict(TruncatedGraph(t.name, t.states, t.edges, t.boundary, t.base, t.fixed, radius))
    if v.status == COUNTEREXAMPLE:
        return v
    if not check.ok:
        v.status = INCONCLUSIVE
        v.summary.extend(check.problems)
        return v
    exceptions = set(g.fixed if cert.exceptions is None else cert.exceptions)
    if exceptions - set(g.fixed):
        v.status = INCONCLUSIVE
        v.summary.append("certificate exceptions go beyond the fixed states")
        return v
    v.summary.append(f"rank certificate holds on all {len(g.rules)} rules; every cycle lies in the fixed states")
    return v


# building blocks -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BlockClassification:
    truncation: TruncatedGraph
    t_part: frozenset
    c_part: frozenset
    w_part: frozenset
    quotient: TruncatedGraph

    def label(self, i: int) -> str:
        if i in self.t_part:
            return "T"
        return "C" if i in self.c_part else "W"

    def by_state(self) -> dict:
        return {s: self.label(i) for i, s in enumerate(self.truncation.states)}


COLLAPSED = ("C*", ())


def classify_blocks(g: GeneratedGraph, radius: int, cert: RankCertificate | None = None) -> BlockClassification:
    """Split a truncation into transitive, permutative and wandering parts.

    T: states on a path from the base state's component back to it.
    C: states reachable from some cycle and co-reachable to some cycle.
    W: everything else.  The quotient collapses C to a single fixed state.
    """
    t = truncate(g, radius)
    if cert is not None:
        check = check_certificate(g, cert)
        if not check.ok:
            raise BadCertificateError("; ".join(check.problems))
        exceptions = set(g.fixed if cert.exceptions is None else cert.exceptions)
        inside = t.index
        for s in exceptions:
            if s not in inside or inside[s] in t.boundary:
                raise RadiusTooSmallError(f"exception state {state_name(s)} is not interior at radius {radius}")
    comps = _cyclic_components(t)
    on_cycle = {i for c in comps for i in c}
    if on_cycle & t.boundary:
        raise RadiusTooSmallError(f"a cycle touches the boundary at radius {radius}")
    dg = t.digraph()
    rev = dg.reverse(copy=False)

    def reach(graph, sources):
        out = set()
        for s in sources:
            if s not in out:
                out |= nx.descendants(graph, s) | {s}
        return out

    c_part = reach(dg, on_cycle) & reach(rev, on_cycle)
    if t.base is None:
        t_part = set()
    else:
        base_comp = next((c for c in comps if t.base in c), [t.base])
        t_part = reach(dg, base_comp) & reach(rev, base_comp)
    w_part = set(range(t.size)) - c_part - t_part

    w_sorted = sorted(w_part)
    new_index = {old: k + 1 for k, old in enumerate(w_sorted)}
    collapse = lambda i: 0 if i in c_part or i in t_part else new_index[i]
    edges = sorted({(collapse(i), collapse(j)) for i, j in t.edges})
    states = (COLLAPSED,) + tuple(t.states[i] for i in w_sorted)
    boundary = frozenset(new_index[i] for i in t.boundary if i in new_index)
    ranks = None
    if cert is not None:
        cvals = {cert.value(t.states[i]) for i in c_part | t_part}
        crank = cvals.pop() if len(cvals) == 1 else None
        ranks = (crank,) + tuple(cert.value(t.states[i]) for i in w_sorted)
    if cert is not None and cert.direction < 0 and ranks is not None:
        ranks = tuple(None if r is None else -r for r in ranks)
    quotient = TruncatedGraph(f"{t.name}/C", states, tuple(edges), boundary, 0,
                              (0,) if (0, 0) in edges else (), radius, ranks)
    return BlockClassification(t, frozenset(t_part), frozenset(c_part), frozenset(w_part), quotient)


# entropy ---------------------------------------------------------------------------------

@dataclass
class DualEntropy:
    forward_counts: tuple[int, ...]
    backward_counts: tuple[int, ...]
    forward_base: Fraction | None
    backward_base: Fraction | None
    measure_entropy_bound: float | None
    verdict: str | None

    @staticmethod
    def _log(base):
        return None if base is None else math.log(base)

    @property
    def forward_entropy(self) -> float | None:
        return self._log(self.forward_base)

    @property
    def backward_entropy(self) -> float | None:
        return self._log(self.backward_base)

    @property
    def growth_entropy(self) -> float | None:
        vals = [v for v in (self.forward_entropy, self.backward_entropy) if v is not None]
        return max(vals) if vals else None


def _merge_rows(y: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distinct rows of ``y`` with the weights of equal rows summed."""
    lo = y.min(axis=0)
    span = y.max(axis=0) - lo + 1
    if len(y) and math.prod(int(v) for v in span) < 2**62:
        key = np.zeros(len(y), dtype=np.int64)
        for col in range(y.shape[1]):
            key = key * int(span[col]) + (y[:, col] - lo[col])
        _, first, inv = np.unique(key, return_index=True, return_inverse=True)
        uniq = y[first]
    else:
        uniq, inv = np.unique(y, axis=0, return_inverse=True)
    inv = inv.ravel()
    if w.dtype == object:
        acc = np.zeros(len(uniq), dtype=object)
        np.add.at(acc, inv, w)
    else:
        acc = np.bincount(inv, weights=None if w is None else w, minlength=len(uniq))
        acc = np.rint(acc).astype(np.int64) if acc.dtype != np.int64 else acc
    return uniq, acc


def path_counts(g: GeneratedGraph, s: State, n_max: int, reverse: bool = False) -> tuple[int, ...]:
    """Exact number of ``n``-step paths leaving (or entering) ``s`` for ``n = 1 .. n_max``.

    The count is pushed forward layer by layer, merging equal states, so no
    truncation radius has to be chosen.  Weights switch to Python integers
    before they could overflow.
    """
    frontier = {s[0]: (np.asarray([s[1]], dtype=np.int64).reshape(1, -1), np.ones(1, dtype=np.int64))}
    fanout = max(1, len(g.rules))
    out = []
    for _ in range(n_max):
        rows_by_class: dict[str, list] = {}
        for cls, (x, w) in frontier.items():
            for rows, tcls, y in _batch_step(g, cls, x, reverse):
                rows_by_class.setdefault(tcls, []).append((y, w[rows]))
        frontier = {}
        total = 0
        for cls, parts in rows_by_class.items():
            y = np.vstack([p[0] for p in parts])
            w = np.concatenate([p[1] for p in parts])
            if w.dtype != object and int(w.max()) * fanout * len(w) >= 2**52:
                w = w.astype(object)
            uniq, acc = _merge_rows(y, w)
            frontier[cls] = (uniq, acc)
            total += int(sum(int(v) for v in acc)) if acc.dtype == object else int(acc.sum())
        out.append(total)
    return tuple(out)


def _geometric_base(counts: Sequence[int]) -> Fraction | None:
    if not counts or counts[0] == 0:
        return None if not counts else Fraction(0)
    ratios = {Fraction(counts[i + 1], counts[i]) for i in range(len(counts) - 1) if counts[i]}
    if len(ratios) == 1:
        return ratios.pop()
    if not ratios:
        return Fraction(counts[0])
    return None


def dual_entropy(g: GeneratedGraph, s: State, n_max: int, cert: RankCertificate | None = None,
                 radius: int = 2) -> DualEntropy:
    """Block-growth entropy from ``s`` in both directions next to the invariant-measure bound.

    The measure bound is 0 when the graph is certified totally wandering,
    since every invariant measure then sits on fixed points.
    """
    fwd = path_counts(g, s, n_max)
    bwd = path_counts(g, s, n_max, reverse=True)
    fb, bb = _geometric_base(fwd), _geometric_base(bwd)
    if fb is not None and fb.denominator != 1 or bb is not None and bb.denominator != 1:
        fb = fb if fb is None or fb.denominator == 1 else None
        bb = bb if bb is None or bb.denominator == 1 else None
    verdict = None
    bound = None
    if cert is not None:
        verdict = totally_wandering(g, cert, max(radius, 1)).status
        if verdict == TOTALLY_WANDERING:
            bound = 0.0
    return DualEntropy(fwd, bwd, fb, bb, bound, verdict)


def default_certificate(g: GeneratedGraph) -> RankCertificate | None:
    """Rank certificates for the bundled graphs, keyed by graph name."""
    if g.name == "q3":
        return RankCertificate({"Q": ((-1, 0), 0)})
    if g.name == "q3xq3":
        return RankCertificate({"P": ((1, 0, -1, 0), 0)})
    if g.name.startswith("cycle") and g.name.endswith("+q3"):
        length = int(g.name[len("cycle"):-len("+q3")])
        cyc = tuple(("C", (i,)) for i in range(length))
        return RankCertificate({"C": ((0,), 0), "Q": ((-1, 0), 0)}, g.fixed + cyc)
    return None


# rule text ---------------------------------------------------------------------------

def _affine(node, variables: Sequence[str]) -> tuple[list[Fraction], Fraction]:
    """Linear coefficients and constant of an arithmetic expression in ``variables``."""
    n = len(variables)
    if isinstance(node, ast.Constant) and isinstance(node.value, int) and not isinstance(node.value, bool):
        return [Fraction(0)] * n, Fraction(node.value)
    if isinstance(node, ast.Name):
        if node.id not in variables:
            raise RuleError(f"unknown variable {node.id}")
        coef = [Fraction(0)] * n
        coef[variables.index(node.id)] = Fraction(1)
        return coef, Fraction(0)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        c, k = _affine(node.operand, variables)
        sign = -1 if isinstance(node.op, ast.USub) else 1
        return [sign * v for v in c], sign * k
    if isinstance(node, ast.BinOp):
        lc, lk = _affine(node.left, variables)
        rc, rk = _affine(node.right, variables)
        if isinstance(node.op, ast.Add):
            return [a + b for a, b in zip(lc, rc)], lk + rk
        if isinstance(node.op, ast.Sub):
            return [a - b for a, b in zip(lc, rc)], lk - rk
        if isinstance(node.op, ast.Mult):
            if not any(lc):
                return [lk * v for v in rc], lk * rk
            if not any(rc):
                return [rk * v for v in lc], lk * rk
            raise RuleError("product of two variables is not affine")
        if isinstance(node.op, ast.Div):
            if any(rc) or rk == 0:
                raise RuleError("division must be by a nonzero constant")
            return [v / rk for v in lc], lk / rk
    raise RuleError(f"unsupported expression {ast.unparse(node)}")


def _state_expr(text: str):
    node = ast.parse(text.strip(), mode="eval").body
    if not isinstance(node, ast.Call) or not isinstance(node.func, ast.Name):
        raise RuleError(f"expected Class(args), got {text.strip()!r}")
    return node.func.id, node.args


def parse_rule(text: str, variables: dict) -> Rule:
    """Parse ``name: Src(k, n) -> Dst(k - 1, (n - 1)/3) when k >= 1, n % 3 == 1``.

    Source arguments must be the class's variable names; target arguments
    are affine expressions in them.  Guards are comparisons of a variable
    with integer constants, possibly chained, or ``var % m == r``.
    """
    name, sep, body = text.partition(":")
    if not sep:
        raise RuleError("rule needs a name followed by ':'")
    body, _, guard_text = body.partition(" when ")
    lhs, arrow, rhs = body.partition("->")
    if not arrow:
        raise RuleError("rule needs '->'")
    src, src_args = _state_expr(lhs)
    dst, dst_args = _state_expr(rhs)
    if src not in variables or dst not in variables:
        raise RuleError(f"unknown class in rule {name.strip()}")
    names = list(variables[src])
    if [a.id if isinstance(a, ast.Name) else None for a in src_args] != names:
        raise RuleError(f"source arguments must be {', '.join(names)}")
    if len(dst_args) != len(variables[dst]):
        raise RuleError(f"target {dst} takes {len(variables[dst])} arguments")
    mat, off = [], []
    for a in dst_args:
        c, k = _affine(a, names)
        mat.append(c)
        off.append(k)
    guards = [DimGuard() for _ in names]
    if guard_text.strip():
        for part in _split_top(guard_text):
            for dim, g in _parse_guard(part, names):
                guards[dim] = guards[dim].merge(g)
    return Rule(name.strip(), src, dst, mat, off, tuple(guards))


def _split_top(text: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip()]


def _int_const(node) -> int:
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
        return -_int_const(node.operand)
    if isinstance(node, ast.Constant) and isinstance(node.value, int):
        return node.value
    raise RuleError(f"expected an integer, got {ast.unparse(node)}")


def _parse_guard(text: str, names: list[str]) -> Iterable[tuple[int, DimGuard]]:
    node = ast.parse(text, mode="eval").body
    if not isinstance(node, ast.Compare):
        raise RuleError(f"guard {text!r} is not a comparison")
    if (isinstance(node.left, ast.BinOp) and isinstance(node.left.op, ast.Mod)
            and len(node.ops) == 1 and isinstance(node.ops[0], ast.Eq)):
        var = node.left.left
        if not isinstance(var, ast.Name) or var.id not in names:
            raise RuleError(f"guard {text!r} must test a variable")
        mod = _int_const(node.left.right)
        res = _int_const(node.comparators[0])
        if mod <= 0:
            raise RuleError("modulus must be positive")
        yield names.index(var.id), DimGuard(modulus=mod, residue=res % mod)
        return
    terms = [node.left, *node.comparators]
    for left, op, right in zip(terms, node.ops, terms[1:]):
        if isinstance(left, ast.Name):
            var, const, flip = left.id, _int_const(right), False
        elif isinstance(right, ast.Name):
            var, const, flip = right.id, _int_const(left), True
        else:
            raise RuleError(f"guard {text!r} must compare a variable with a constant")
        if var not in names:
            raise RuleError(f"unknown variable {var} in guard")
        kind = type(op)
        if flip:
            kind = {ast.Lt: ast.Gt, ast.Gt: ast.Lt, ast.LtE: ast.GtE, ast.GtE: ast.LtE}.get(kind, kind)
        dim = names.index(var)
        if kind is ast.Eq:
            yield dim, DimGuard(lo=const, hi=const)
        elif kind is ast.GtE:
            yield dim, DimGuard(lo=const)
        elif kind is ast.Gt:
            yield dim, DimGuard(lo=const + 1)
        elif kind is ast.LtE:
            yield dim, DimGuard(hi=const)
        elif kind is ast.Lt:
            yield dim, DimGuard(hi=const - 1)
        else:
            raise RuleError(f"unsupported comparison in guard {text!r}")


def format_rule(r: Rule, variables: dict) -> str:
    """Inverse of :func:`parse_rule`."""
    names = list(variables[r.source])

    def frac(v: Fraction) -> str:
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"

    def expr(row, const) -> str:
        terms = []
        den = math.lcm(*(v.denominator for v in (*row, const)))
        for v, n in zip(row, names):
            if v == 0:
                continue
            num = v * den
            coef = "" if abs(num) == 1 else f"{abs(num.numerator)}*"
            terms.append(("-" if num < 0 else "+", f"{coef}{n}"))
        if const or not terms:
            num = const * den
            terms.append(("-" if num < 0 else "+", str(abs(num.numerator))))
        out = ("-" if terms[0][0] == "-" else "") + terms[0][1]
        for sgn, t in terms[1:]:
            out += f" {sgn} {t}"
        if den == 1:
            return out
        return f"{out}/{den}" if len(terms) == 1 else f"({out})/{den}"

    args = ", ".join(expr(row, c) for row, c in zip(r.matrix, r.offset))
    guards = []
    for n, g in zip(names, r.guards):
        if g.lo is not None and g.lo == g.hi:
            guards.append(f"{n} == {g.lo}")
        elif g.lo is not None and g.hi is not None:
            guards.append(f"{g.lo} <= {n} <= {g.hi}")
        elif g.lo is not None:
            guards.append(f"{n} >= {g.lo}")
        elif g.hi is not None:
            guards.append(f"{n} <= {g.hi}")
        if g.modulus is not None:
            guards.append(f"{n} % {g.modulus} == {g.residue}")
    text = f"{r.name}: {r.source}({', '.join(names)}) -> {r.target}({args})"
    return text + (" when " + ", ".join(guards) if guards else "")

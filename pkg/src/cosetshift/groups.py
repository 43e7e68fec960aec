"""Finite groups given by multiplication tables, their subgroups and cosets.

Everything here is enumeration based.  Groups are capped at
``MAX_GROUP_ORDER`` elements, which is plenty for the desk-scale models
the rest of the package works with.

Coset blocks are always labelled by their smallest element index, and the
block containing the identity comes first.  Downstream code (the reduction
engine in particular) relies on that ordering for reproducible output.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DuplicateElementError,
    GroupError,
    NoIdentityError,
    NoInverseError,
    NonAssociativeError,
    NotAutomorphismError,
)

MAX_GROUP_ORDER = 4096
FULL_ASSOCIATIVITY_LIMIT = 64


@dataclass(frozen=True, eq=False)
class FiniteGroup:
    """A finite group on the indices ``0 .. n-1``.

    ``table[a, b]`` is the index of the product ``a*b``.  Use
    :func:`build_group` rather than calling the constructor directly; it
    checks the group axioms.
    """

    elements: tuple[str, ...]
    table: np.ndarray
    identity: int
    inverse: tuple[int, ...]
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self._index is None:
            object.__setattr__(self, "_index", {name: i for i, name in enumerate(self.elements)})

    @property
    def order(self) -> int:
        return len(self.elements)

    def __len__(self):
        return len(self.elements)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"no element named {name!r}") from None

    def name(self, i: int) -> str:
        return self.elements[i]

    def mul(self, a: int, b: int) -> int:
        return int(self.table[a, b])

    def inv(self, a: int) -> int:
        return self.inverse[a]

    def __eq__(self, other):
        if not isinstance(other, FiniteGroup):
            return NotImplemented
        return self.elements == other.elements and np.array_equal(self.table, other.table)

    def __hash__(self):
        return hash((self.elements, self.table.tobytes()))

    def __repr__(self):
        return f"FiniteGroup(order={self.order})"


@dataclass(frozen=True)
class Subgroup:
    parent: FiniteGroup
    members: tuple[int, ...]

    @property
    def order(self) -> int:
        return len(self.members)

    def __len__(self):
        return len(self.members)

    def __contains__(self, a: int) -> bool:
        return a in self.member_set

    @property
    def member_set(self) -> frozenset[int]:
        return frozenset(self.members)

    def names(self) -> list[str]:
        return [self.parent.name(a) for a in self.members]

    def __repr__(self):
        return f"Subgroup(order={self.order}, members={self.names()})"


@dataclass(frozen=True)
class GroupAutomorphism:
    group: FiniteGroup
    image: tuple[int, ...]

    def __call__(self, a: int) -> int:
        return self.image[a]

    def power(self, n: int) -> "GroupAutomorphism":
        if n < 0:
            inv = [0] * len(self.image)
            for a, b in enumerate(self.image):
                inv[b] = a
            base, n = tuple(inv), -n
        else:
            base = self.image
        img = tuple(range(len(base)))
        for _ in range(n):
            img = tuple(base[a] for a in img)
        return GroupAutomorphism(self.group, img)


# construction -------------------------------------------------------------

def build_group(elements: Sequence[str], table) -> FiniteGroup:
    """Validate a multiplication table and return the group it defines.

    ``table`` may hold element indices or element names.  Raises one of
    :class:`DuplicateElementError`, :class:`NoIdentityError`,
    :class:`NoInverseError` or :class:`NonAssociativeError`, each naming
    the first offending tuple.
    """
    elements = tuple(str(e) for e in elements)
    n = len(elements)
    if n == 0:
        raise GroupError("a group needs at least one element")
    if n > MAX_GROUP_ORDER:
        raise GroupError(f"group order {n} exceeds the cap of {MAX_GROUP_ORDER}")
    seen = {}
    for i, name in enumerate(elements):
        if name in seen:
            raise DuplicateElementError(f"element {name!r} appears at positions {seen[name]} and {i}")
        seen[name] = i

    rows = [list(r) for r in table]
    if len(rows) != n or any(len(r) != n for r in rows):
        raise GroupError(f"multiplication table must be {n}x{n}")
    arr = np.empty((n, n), dtype=np.int64)
    for i, row in enumerate(rows):
        for j, v in enumerate(row):
            if isinstance(v, str):
                if v not in seen:
                    raise GroupError(f"table entry ({elements[i]}, {elements[j]}) = {v!r} is not an element")
                v = seen[v]
            v = int(v)
            if not 0 <= v < n:
                raise GroupError(f"table entry ({i}, {j}) = {v} out of range")
            arr[i, j] = v

    identity = _find_identity(arr)
    if identity is None:
        raise NoIdentityError("no element e with e*a = a*e = a for all a; "
                              f"first candidate fails at {_identity_witness(arr, elements)}")
    inverse = []
    for a in range(n):
        hits = np.nonzero((arr[a, :] == identity) & (arr[:, a] == identity))[0]
        if len(hits) == 0:
            raise NoInverseError(f"element {elements[a]!r} has no two-sided inverse")
        inverse.append(int(hits[0]))

    bad = _associativity_violation(arr)
    if bad is not None:
        a, b, c = bad
        raise NonAssociativeError(
            f"(a*b)*c != a*(b*c) for (a, b, c) = ({elements[a]}, {elements[b]}, {elements[c]})")

    arr.setflags(write=False)
    return FiniteGroup(elements, arr, identity, tuple(inverse))


def _find_identity(arr):
    n = arr.shape[0]
    rng = np.arange(n)
    for e in range(n):
        if np.array_equal(arr[e, :], rng) and np.array_equal(arr[:, e], rng):
            return e
    return None


def _identity_witness(arr, elements):
    n = arr.shape[0]
    for a in range(n):
        if arr[0, a] != a:
            return f"({elements[0]}, {elements[a]})"
        if arr[a, 0] != a:
            return f"({elements[a]}, {elements[0]})"
    return f"({elements[0]},)"


def _associativity_violation(arr):
    n = arr.shape[0]
    if n <= FULL_ASSOCIATIVITY_LIMIT:
        candidates = range(n)
    else:
        candidates = _magma_generators(arr)
    # Light's test: the elements b with (ab)c = a(bc) for all a, c form a
    # submagma, so checking a generating set settles every b.
    for b in candidates:
        left = arr[arr[:, b], :]          # (a*b)*c
        right = arr[:, arr[b, :]]         # a*(b*c)
        diff = np.argwhere(left != right)
        if len(diff):
            a, c = diff[0]
            return int(a), int(b), int(c)
    return None


def _magma_generators(arr):
    n = arr.shape[0]
    closure = np.zeros(n, dtype=bool)
    gens = []
    for a in range(n):
        if closure[a]:
            continue
        gens.append(a)
        members = set(np.nonzero(closure)[0].tolist()) | {a}
        frontier = list(members)
        while frontier:
            new = set()
            cur = list(members)
            for x in frontier:
                for y in cur:
                    for z in (int(arr[x, y]), int(arr[y, x])):
                        if z not in members:
                            new.add(z)
            members |= new
            frontier = list(new)
        closure[list(members)] = True
    return gens


# subgroups and cosets ------------------------------------------------------

def subgroup_generated(g: FiniteGroup, seeds: Iterable[int] = ()) -> Subgroup:
    """Smallest subgroup containing ``seeds``, by saturation from the identity."""
    seeds = sorted({int(s) for s in seeds})
    for s in seeds:
        if not 0 <= s < g.order:
            raise GroupError(f"seed {s} is not an element index")
    members = {g.identity}
    frontier = [g.identity]
    while frontier:
        nxt = []
        for x in frontier:
            for s in seeds:
                y = int(g.table[x, s])
                if y not in members:
                    members.add(y)
                    nxt.append(y)
        frontier = nxt
    return Subgroup(g, tuple(sorted(members)))


def subgroup_from_members(g: FiniteGroup, members: Iterable[int]) -> Subgroup:
    """Wrap an explicit member set, checking it really is a subgroup."""
    ms = sorted({int(m) for m in members})
    if not is_subgroup(g, ms):
        raise GroupError(f"{[g.name(m) for m in ms]} is not a subgroup")
    return Subgroup(g, tuple(ms))


def is_subgroup(g: FiniteGroup, members: Iterable[int]) -> bool:
    ms = set(members)
    if g.identity not in ms:
        return False
    idx = np.fromiter(ms, dtype=np.int64)
    prods = g.table[np.ix_(idx, idx)]
    return set(np.unique(prods).tolist()) <= ms


def trivial_subgroup(g: FiniteGroup) -> Subgroup:
    return Subgroup(g, (g.identity,))


def whole_group(g: FiniteGroup) -> Subgroup:
    return Subgroup(g, tuple(range(g.order)))


def intersect(h1: Subgroup, h2: Subgroup) -> Subgroup:
    if h1.parent != h2.parent:
        raise GroupError("subgroups live in different groups")
    return Subgroup(h1.parent, tuple(sorted(h1.member_set & h2.member_set)))


def cosets(g: FiniteGroup, h: Subgroup, side: str = "left") -> list[tuple[int, ...]]:
    """Partition ``g`` into cosets of ``h``.

    Left cosets are ``a*h``, right cosets ``h*a``.  Each block is a sorted
    tuple, so ``block[0]`` is its minimal-index representative.  ``h`` comes
    first, the other blocks follow in order of representative.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    hm = np.asarray(h.members, dtype=np.int64)
    assigned = np.zeros(g.order, dtype=bool)
    blocks = []
    for a in range(g.order):
        if assigned[a]:
            continue
        block = g.table[a, hm] if side == "left" else g.table[hm, a]
        block = tuple(sorted(int(x) for x in block))
        assigned[list(block)] = True
        blocks.append(block)
    blocks.sort(key=lambda b: (g.identity not in b, b[0]))
    return blocks


def coset_labels(g: FiniteGroup, h: Subgroup, side: str = "left") -> tuple[list[tuple[int, ...]], np.ndarray]:
    """Blocks from :func:`cosets` plus an array mapping element -> block index."""
    blocks = cosets(g, h, side)
    label = np.empty(g.order, dtype=np.int64)
    for i, b in enumerate(blocks):
        label[list(b)] = i
    return blocks, label


def is_normal(g: FiniteGroup, h: Subgroup) -> bool:
    """Diagnostic only; no construction in the package depends on normality."""
    return cosets(g, h, "left") == cosets(g, h, "right")


def image_subgroup(t: GroupAutomorphism, h: Subgroup) -> Subgroup:
    return Subgroup(h.parent, tuple(sorted(t.image[a] for a in h.members)))


# automorphisms -------------------------------------------------------------

def build_automorphism(g: FiniteGroup, image: Sequence[int] | dict) -> GroupAutomorphism:
    """Validate an index permutation as an automorphism of ``g``."""
    if isinstance(image, dict):
        img = [None] * g.order
        for a, b in image.items():
            a = g.index(a) if isinstance(a, str) else int(a)
            b = g.index(b) if isinstance(b, str) else int(b)
            img[a] = b
        if any(v is None for v in img):
            missing = [g.name(a) for a, v in enumerate(img) if v is None]
            raise NotAutomorphismError(f"map is not total; missing {missing}")
    else:
        img = [int(v) for v in image]
    if len(img) != g.order or sorted(img) != list(range(g.order)):
        raise NotAutomorphismError("map is not a bijection of the group")
    arr = np.asarray(img, dtype=np.int64)
    lhs = arr[g.table]                       # T(a*b)
    rhs = g.table[np.ix_(arr, arr)]          # T(a)*T(b)
    bad = np.argwhere(lhs != rhs)
    if len(bad):
        a, b = bad[0]
        raise NotAutomorphismError(
            f"T({g.name(a)}*{g.name(b)}) != T({g.name(a)})*T({g.name(b)})")
    return GroupAutomorphism(g, tuple(img))


def identity_automorphism(g: FiniteGroup) -> GroupAutomorphism:
    return GroupAutomorphism(g, tuple(range(g.order)))


def permutation_cycles(image: Sequence[int]) -> list[tuple[int, ...]]:
    """Cycles of an index permutation, each starting at its smallest entry."""
    seen = [False] * len(image)
    out = []
    for start in range(len(image)):
        if seen[start]:
            continue
        cyc = []
        a = start
        while not seen[a]:
            seen[a] = True
            cyc.append(a)
            a = image[a]
        out.append(tuple(cyc))
    return out


def automorphism_order(t: GroupAutomorphism) -> int:
    """Least ``n >= 1`` with ``t**n`` the identity map."""
    return math.lcm(*(len(c) for c in permutation_cycles(t.image)))


def orbits(t: GroupAutomorphism) -> list[tuple[int, ...]]:
    return permutation_cycles(t.image)


# products and stock groups ----------------------------------------------------

def direct_product(g1: FiniteGroup, g2: FiniteGroup, sep: str = "|") -> FiniteGroup:
    """``g1 x g2`` with element ``(a, b)`` at index ``a * |g2| + b``."""
    n1, n2 = g1.order, g2.order
    if n1 * n2 > MAX_GROUP_ORDER:
        raise GroupError(f"product order {n1 * n2} exceeds the cap of {MAX_GROUP_ORDER}")
    names = [f"{a}{sep}{b}" for a in g1.elements for b in g2.elements]
    t1 = np.repeat(np.repeat(g1.table, n2, axis=0), n2, axis=1)
    t2 = np.tile(g2.table, (n1, n1))
    table = t1 * n2 + t2
    table.setflags(write=False)
    identity = g1.identity * n2 + g2.identity
    inverse = tuple(g1.inverse[a] * n2 + g2.inverse[b] for a in range(n1) for b in range(n2))
    return FiniteGroup(tuple(names), table, identity, inverse)


def cyclic_sum(moduli: Sequence[int]) -> FiniteGroup:
    """The abelian group ``Z/m1 + Z/m2 + ...`` with dotted element names.

    Elements are ordered lexicographically with the *last* coordinate
    varying slowest, so ``cyclic_sum([4, 2])`` lists ``0.0 1.0 2.0 3.0 0.1 ...``.
    """
    moduli = [int(m) for m in moduli]
    if not moduli or any(m < 1 for m in moduli):
        raise GroupError("moduli must be positive")
    coords = [tuple(reversed(c)) for c in itertools.product(*(range(m) for m in reversed(moduli)))]
    index = {c: i for i, c in enumerate(coords)}
    n = len(coords)
    if n > MAX_GROUP_ORDER:
        raise GroupError(f"group order {n} exceeds the cap of {MAX_GROUP_ORDER}")
    table = np.empty((n, n), dtype=np.int64)
    for i, a in enumerate(coords):
        for j, b in enumerate(coords):
            table[i, j] = index[tuple((x + y) % m for x, y, m in zip(a, b, moduli))]
    names = [".".join(str(x) for x in c) for c in coords]
    return build_group(names, table)


def cyclic_coordinates(g: FiniteGroup) -> list[tuple[int, ...]]:
    return [tuple(int(x) for x in name.split(".")) for name in g.elements]


def symmetric_group(n: int) -> FiniteGroup:
    """All permutations of ``0..n-1`` in one-line notation, composed right to left."""
    perms = list(itertools.permutations(range(n)))
    index = {p: i for i, p in enumerate(perms)}
    table = [[index[tuple(p[q[k]] for k in range(n))] for q in perms] for p in perms]
    return build_group(["".join(map(str, p)) for p in perms], table)


def multiplication_automorphism(g: FiniteGroup, factor: int) -> GroupAutomorphism:
    """``x -> factor * x`` on a group from :func:`cyclic_sum`."""
    moduli = [max(c[k] for c in cyclic_coordinates(g)) + 1 for k in range(len(cyclic_coordinates(g)[0]))]
    coords = cyclic_coordinates(g)
    index = {c: i for i, c in enumerate(coords)}
    img = [index[tuple((factor * x) % m for x, m in zip(c, moduli))] for c in coords]
    return build_automorphism(g, img)

"""Plain-text model descriptions.

Grammar (one construct per line)::

    # comment, also allowed after whitespace at the end of a line
    [kind name]                 section header; name is optional
    key = value                 entry; keys may repeat
        continuation            indented lines extend the previous value

Section kinds and their keys:

``group``
    ``elements`` plus ``table`` (one row per continuation line), or one of
    ``cyclic_sum = 4 2`` / ``symmetric = 3``.
``automorphism``
    ``group``, then ``map = a->b, ...`` or ``multiply = k``.
``subgroup``
    ``group``, ``members = a b ...``.
``shift``
    ``alphabet = a b ...``, ``edges = a->b, ...``.
``group_shift``
    ``group``, then ``edges = a->b, ...`` or ``full = yes``.
``coded_system``
    ``group``, ``automorphism``, optional ``subgroup`` (trivial if absent).
``generated_graph``
    repeated ``class = Name(v1, v2) norm v1``, repeated
    ``rule = name: Src(..) -> Dst(..) when ...``, ``base``, repeated
    ``fixed`` and ``root`` states written ``Name(i, j)``, optional repeated
    ``rank = Name: affine expression`` and ``exceptions = Name(..), ...``.
``matrix``
    ``rows = 2 1; 1 1``.
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import CosetShiftError, SectionInvalidError, SpecSyntaxError, UnresolvedReferenceError
from .groups import (
    build_automorphism,
    build_group,
    cyclic_sum,
    multiplication_automorphism,
    subgroup_from_members,
    symmetric_group,
)
from .groupshift import code_finite_system, full_group_shift, validate_group_shift
from .shifts import vertex_shift
from .wandering import GeneratedGraph, MatrixSystem, RankCertificate, _affine, parse_rule

KINDS = ("group", "automorphism", "subgroup", "shift", "group_shift", "coded_system",
         "generated_graph", "matrix")
REPEATABLE = {"rule", "class", "fixed", "root", "rank", "exceptions"}

_HEADER = re.compile(r"^\[\s*([A-Za-z_]+)(?:\s+([A-Za-z0-9_.+\-]+))?\s*\]$")
_ENTRY = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")


@dataclass
class Entry:
    key: str
    value: str
    line: int
    column: int


@dataclass
class Section:
    kind: str
    name: str
    line: int
    entries: list[Entry] = field(default_factory=list)

    def get(self, key: str, default=None) -> str | None:
        for e in self.entries:
            if e.key == key:
                return e.value
        return default

    def entry(self, key: str) -> Entry | None:
        return next((e for e in self.entries if e.key == key), None)

    def all(self, key: str) -> list[Entry]:
        return [e for e in self.entries if e.key == key]

    def require(self, key: str) -> Entry:
        e = self.entry(key)
        if e is None:
            raise SectionInvalidError(f"[{self.kind} {self.name}] needs '{key}'", self.line, 1)
        return e


@dataclass
class SpecFile:
    sections: list[Section]
    objects: dict
    certificates: dict = field(default_factory=dict)

    def section(self, name: str) -> Section:
        for s in self.sections:
            if s.name == name:
                return s
        raise KeyError(name)

    def of_kind(self, *kinds: str) -> list[Section]:
        return [s for s in self.sections if s.kind in kinds]

    def canonical(self) -> list:
        return [(s.kind, s.name, [(e.key, e.value) for e in s.entries]) for s in self.sections]


def _strip_comment(line: str) -> str:
    pos = line.find("#")
    return line if pos < 0 else line[:pos]


def _tokenize(text: str) -> list[Section]:
    sections: list[Section] = []
    current: Section | None = None
    last: Entry | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).rstrip()
        if not line.strip():
            continue
        if raw[:1] in (" ", "\t"):
            if last is None:
                raise SpecSyntaxError("continuation line without a preceding entry", lineno, 1)
            last.value = (last.value + "\n" + line.strip()).strip("\n")
            continue
        stripped = line.strip()
        if stripped.startswith("["):
            m = _HEADER.match(stripped)
            if not m:
                raise SpecSyntaxError(f"malformed section header {stripped!r}", lineno, 1)
            kind, name = m.group(1), m.group(2) or m.group(1)
            if kind not in KINDS:
                raise SpecSyntaxError(f"unknown section kind {kind!r}", lineno, 2)
            current = Section(kind, name, lineno)
            sections.append(current)
            last = None
            continue
        m = _ENTRY.match(stripped)
        if not m:
            raise SpecSyntaxError(f"expected 'key = value', got {stripped!r}", lineno, 1)
        if current is None:
            raise SpecSyntaxError("entry outside of any section", lineno, 1)
        key = m.group(1)
        if key not in REPEATABLE and current.entry(key) is not None:
            raise SpecSyntaxError(f"duplicate key {key!r}", lineno, 1)
        last = Entry(key, m.group(2).strip(), lineno, m.start(2) + 1)
        current.entries.append(last)
    if not sections:
        raise SpecSyntaxError("no sections found", 1, 1)
    return sections


def _pairs(e: Entry) -> list[tuple[str, str]]:
    out = []
    for item in re.split(r"[,\n]", e.value):
        item = item.strip()
        if not item:
            continue
        a, arrow, b = item.partition("->")
        if not arrow or not a.strip() or not b.strip():
            raise SpecSyntaxError(f"expected 'a->b', got {item!r}", e.line, e.column)
        out.append((a.strip(), b.strip()))
    return out


def _ints(e: Entry) -> list[int]:
    try:
        return [int(v) for v in e.value.split()]
    except ValueError:
        raise SpecSyntaxError(f"expected integers, got {e.value!r}", e.line, e.column) from None


def _state(text: str, e: Entry):
    try:
        node = ast.parse(text.strip(), mode="eval").body
        if not isinstance(node, ast.Call) or not isinstance(node.func, ast.Name):
            raise ValueError
        idx = []
        for a in node.args:
            v = ast.literal_eval(a)
            if not isinstance(v, int):
                raise ValueError
            idx.append(v)
        return node.func.id, tuple(idx)
    except (ValueError, SyntaxError):
        raise SpecSyntaxError(f"expected a state like Name(0, 1), got {text.strip()!r}", e.line, e.column) from None


def _states(e: Entry) -> list:
    out, depth, cur = [], 0, ""
    for ch in e.value:
        depth += ch == "("
        depth -= ch == ")"
        if ch == "," and depth == 0:
            out.append(cur)
            cur = ""
        else:
            cur += ch
    out.append(cur)
    return [_state(t, e) for t in out if t.strip()]


def _ref(spec_objects: dict, kinds: dict, sec: Section, key: str, kind: str):
    e = sec.require(key)
    name = e.value.strip()
    if name not in spec_objects or kinds[name] != kind:
        raise UnresolvedReferenceError(f"no {kind} section named {name!r}", e.line, e.column)
    return spec_objects[name]


def _element(g, name: str, e: Entry) -> int:
    try:
        return g.index(name)
    except (KeyError, ValueError):
        raise UnresolvedReferenceError(f"group has no element {name!r}", e.line, e.column) from None


def _build_group(sec: Section):
    if sec.entry("cyclic_sum"):
        return cyclic_sum(_ints(sec.entry("cyclic_sum")))
    if sec.entry("symmetric"):
        (n,) = _ints(sec.entry("symmetric"))
        return symmetric_group(n)
    elems = sec.require("elements").value.split()
    t = sec.require("table")
    rows = [r.split() for r in t.value.splitlines() if r.strip()]
    index = {n: i for i, n in enumerate(elems)}
    try:
        table = [[index[v] for v in r] for r in rows]
    except KeyError as exc:
        raise UnresolvedReferenceError(f"table uses unknown element {exc.args[0]!r}", t.line, t.column) from None
    return build_group(elems, table)


def _build_graph(sec: Section, certs: dict):
    classes, dims, norms, variables = [], {}, {}, {}
    for e in sec.all("class"):
        m = re.match(r"^([A-Za-z_]\w*)\s*\(([^)]*)\)\s*(?:norm\s+(.*))?$", e.value)
        if not m:
            raise SpecSyntaxError(f"expected 'Name(v1, ...) norm v1 ...', got {e.value!r}", e.line, e.column)
        name = m.group(1)
        vs = [v.strip() for v in m.group(2).split(",") if v.strip()]
        norm_vars = (m.group(3) or "").split()
        if any(v not in vs for v in norm_vars):
            raise SpecSyntaxError("norm names a variable the class does not have", e.line, e.column)
        classes.append(name)
        dims[name] = len(vs)
        variables[name] = tuple(vs)
        norms[name] = tuple(vs.index(v) for v in norm_vars)
    rules = []
    for e in sec.all("rule"):
        try:
            rules.append(parse_rule(e.value, variables))
        except CosetShiftError as exc:
            raise SpecSyntaxError(str(exc), e.line, e.column) from None
        except SyntaxError:
            raise SpecSyntaxError(f"cannot parse rule {e.value!r}", e.line, e.column) from None
    base = _state(sec.require("base").value, sec.entry("base"))
    fixed = tuple(s for e in sec.all("fixed") for s in _states(e))
    roots = tuple(s for e in sec.all("root") for s in _states(e))
    g = GeneratedGraph(sec.name, tuple(classes), dims, norms, tuple(rules), base, fixed, roots, variables)
    rank = {}
    for e in sec.all("rank"):
        cls, _, expr = e.value.partition(":")
        cls = cls.strip()
        if cls not in variables:
            raise UnresolvedReferenceError(f"rank for unknown class {cls!r}", e.line, e.column)
        try:
            coef, const = _affine(ast.parse(expr.strip(), mode="eval").body, variables[cls])
        except (CosetShiftError, SyntaxError) as exc:
            raise SpecSyntaxError(f"bad rank expression: {exc}", e.line, e.column) from None
        rank[cls] = (tuple(coef), const)
    if rank:
        exc_states = [s for e in sec.all("exceptions") for s in _states(e)]
        certs[sec.name] = RankCertificate(rank, tuple(exc_states) if exc_states else None)
    return g


def _build_matrix(sec: Section):
    e = sec.require("rows")
    try:
        rows = tuple(tuple(int(v) for v in r.split()) for r in re.split(r"[;\n]", e.value) if r.strip())
    except ValueError:
        raise SpecSyntaxError("matrix rows must be integers", e.line, e.column) from None
    return MatrixSystem(len(rows), rows)


def parse_spec(text: str) -> SpecFile:
    """Parse and build every section; errors carry line and column."""
    sections = _tokenize(text)
    objects: dict = {}
    kinds: dict = {}
    certs: dict = {}
    for sec in sections:
        if sec.name in objects:
            raise SpecSyntaxError(f"duplicate section name {sec.name!r}", sec.line, 1)
        try:
            if sec.kind == "group":
                obj = _build_group(sec)
            elif sec.kind == "automorphism":
                g = _ref(objects, kinds, sec, "group", "group")
                if sec.entry("multiply"):
                    (k,) = _ints(sec.entry("multiply"))
                    obj = multiplication_automorphism(g, k)
                else:
                    e = sec.require("map")
                    obj = build_automorphism(g, {_element(g, a, e): _element(g, b, e) for a, b in _pairs(e)})
            elif sec.kind == "subgroup":
                g = _ref(objects, kinds, sec, "group", "group")
                e = sec.require("members")
                obj = subgroup_from_members(g, [_element(g, v, e) for v in e.value.split()])
            elif sec.kind == "shift":
                alphabet = sec.require("alphabet").value.split()
                e = sec.require("edges")
                pairs = _pairs(e)
                unknown = [v for p in pairs for v in p if v not in alphabet]
                if unknown:
                    raise UnresolvedReferenceError(f"edge uses unknown symbol {unknown[0]!r}", e.line, e.column)
                obj = vertex_shift(alphabet, pairs)
            elif sec.kind == "group_shift":
                g = _ref(objects, kinds, sec, "group", "group")
                if (sec.get("full") or "").lower() in ("yes", "true", "1"):
                    obj = full_group_shift(g)
                else:
                    e = sec.require("edges")
                    obj = validate_group_shift(g, [(_element(g, a, e), _element(g, b, e)) for a, b in _pairs(e)])
            elif sec.kind == "coded_system":
                g = _ref(objects, kinds, sec, "group", "group")
                t = _ref(objects, kinds, sec, "automorphism", "automorphism")
                h = _ref(objects, kinds, sec, "subgroup", "subgroup") if sec.entry("subgroup") else None
                if t.group != g or (h is not None and h.parent != g):
                    raise SectionInvalidError("automorphism and subgroup must live on the named group", sec.line, 1)
                obj = code_finite_system(g, t, h)
            elif sec.kind == "generated_graph":
                obj = _build_graph(sec, certs)
            else:
                obj = _build_matrix(sec)
        except (SpecSyntaxError, UnresolvedReferenceError, SectionInvalidError):
            raise
        except CosetShiftError as exc:
            raise SectionInvalidError(f"[{sec.kind} {sec.name}] {exc}", sec.line, 1) from exc
        objects[sec.name] = obj
        kinds[sec.name] = sec.kind
    return SpecFile(sections, objects, certs)


def render(spec: SpecFile) -> str:
    """Canonical text for a parsed spec; ``parse_spec(render(s))`` rebuilds ``s``."""
    out = []
    for sec in spec.sections:
        header = f"[{sec.kind}]" if sec.name == sec.kind else f"[{sec.kind} {sec.name}]"
        out.append(header)
        for e in sec.entries:
            lines = e.value.splitlines() or [""]
            if len(lines) == 1:
                out.append(f"{e.key} = {lines[0]}")
            else:
                out.append(f"{e.key} =")
                out.extend(f"    {ln}" for ln in lines)
        out.append("")
    return "\n".join(out)

"""Dispatch of CLI operations and their reports.

A report is an ordered list of ``(key, value)`` pairs plus a PASS/FAIL
status.  Wall-clock time is recorded on the object but never rendered, so
identical inputs give byte-identical output.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import gallery
from .decompose import decompose_driver, verify_certificate
from .dot import shift_to_dot, truncation_to_dot
from .errors import CosetShiftError
from .groups import automorphism_order
from .groupshift import (
    GroupShiftModel,
    check_bracket,
    check_follower_factorization,
    check_product_structure,
)
from .shifts import block_entropy, determinism, follower_cardinalities
from .specfile import SpecFile, parse_spec
from .wandering import (
    TOTALLY_WANDERING,
    check_certificate,
    classify_blocks,
    default_certificate,
    dual_entropy,
    finite_wandering_verdict,
    matrix_no_periodics,
    state_name,
    truncate,
)

OPERATIONS = ("validate", "decompose", "classify", "entropy", "export-dot", "examples")


@dataclass
class Flags:
    radius: int = 3
    nmax: int = 8
    verify_depth: int = 2
    section: str | None = None
    out: str | None = None


@dataclass
class RunReport:
    operation: str
    digest: str
    payload: list = field(default_factory=list)
    passed: bool = True
    timing: float = 0.0
    attachment: str | None = None

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def add(self, key: str, value) -> None:
        self.payload.append((key, _fmt(value)))

    def check(self, key: str, ok: bool) -> None:
        self.add(key, "ok" if ok else "FAILED")
        self.passed = self.passed and bool(ok)

    def render(self, fmt: str = "human") -> str:
        rows = [("operation", self.operation), ("input_sha256", self.digest), *self.payload,
                ("status", self.status)]
        if fmt == "machine":
            return "".join(f"{k}={v.replace(chr(10), ' | ')}\n" for k, v in rows)
        width = max(len(k) for k, _ in rows)
        out = []
        for k, v in rows:
            lines = v.splitlines() or [""]
            out.append(f"{k.ljust(width)} : {lines[0]}")
            out.extend(f"{'':{width}}   {ln}" for ln in lines[1:])
        return "\n".join(out) + "\n"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return f"{v:.12g}"
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v) if v else "-"
    return str(v)


def _log_text(base) -> str:
    if base is None:
        return "not geometric"
    if base == 0:
        return "-inf"
    return f"log {base} = {math.log(base):.12g}"


def _pick(spec: SpecFile, flags: Flags, kinds: tuple[str, ...]):
    if flags.section:
        try:
            sec = spec.section(flags.section)
        except KeyError:
            raise CosetShiftError(f"no section named {flags.section!r}") from None
        if sec.kind not in kinds:
            raise CosetShiftError(f"section {sec.name!r} is a {sec.kind}, expected one of {', '.join(kinds)}")
        return sec
    for sec in spec.sections:
        if sec.kind in kinds:
            return sec
    raise CosetShiftError(f"spec has no section of kind {' or '.join(kinds)}")


def _group_shift_of(obj):
    return obj if isinstance(obj, GroupShiftModel) else obj.as_group_shift()


# generated graphs come from rule sets, not from transcribed drawings
GRAPH_SOURCE = "model-derived from the section rules"


def _validate(spec: SpecFile, flags: Flags, rep: RunReport) -> None:
    for sec in spec.sections:
        obj = spec.objects[sec.name]
        tag = f"{sec.kind}.{sec.name}"
        if sec.kind == "group":
            rep.add(f"{tag}.order", obj.order)
        elif sec.kind == "automorphism":
            rep.add(f"{tag}.order", automorphism_order(obj))
        elif sec.kind == "subgroup":
            rep.add(f"{tag}.order", obj.order)
        elif sec.kind == "shift":
            outs, ins = follower_cardinalities(obj)
            rep.add(f"{tag}.symbols", obj.size)
            rep.add(f"{tag}.follower_sizes", sorted(outs))
            rep.add(f"{tag}.predecessor_sizes", sorted(ins))
        elif sec.kind == "group_shift":
            d = flags.verify_depth
            rep.add(f"{tag}.order", obj.order)
            rep.add(f"{tag}.f(e)", obj.f_e.names())
            rep.add(f"{tag}.p(e)", obj.p_e.names())
            rep.check(f"{tag}.product_structure@{d}", check_product_structure(obj, d).passed)
            rep.check(f"{tag}.bracket@{d}", check_bracket(obj, d).passed)
            rep.check(f"{tag}.follower_factorization", check_follower_factorization(obj).passed)
        elif sec.kind == "coded_system":
            det = determinism(obj.shift)
            rep.add(f"{tag}.states", obj.shift.size)
            rep.check(f"{tag}.separating", True)
            rep.add(f"{tag}.permutation", det.is_permutation)
            if det.is_permutation:
                rep.add(f"{tag}.cycle_lengths", sorted(det.cycle_lengths))
        elif sec.kind == "generated_graph":
            t = truncate(obj, flags.radius)
            rep.add(f"{tag}.graph_source", GRAPH_SOURCE)
            rep.add(f"{tag}.truncation@{flags.radius}", f"{t.size} states, {len(t.edges)} edges")
            cert = spec.certificates.get(sec.name)
            if cert is not None:
                chk = check_certificate(obj, cert)
                rep.check(f"{tag}.rank_certificate", chk.ok)
        elif sec.kind == "matrix":
            v = matrix_no_periodics(obj, flags.nmax)
            rep.check(f"{tag}.no_periodic_points@{flags.nmax}", v.passed)


def _decompose(spec: SpecFile, flags: Flags, rep: RunReport) -> None:
    sec = _pick(spec, flags, ("group_shift", "coded_system"))
    obj = spec.objects[sec.name]
    model = _group_shift_of(obj)
    cert = decompose_driver(model)
    rep.add("section", f"{sec.name} ({sec.kind})")
    rep.add("emitted", list(cert.emitted) or "none")
    rep.add("full_shift_size", cert.full_shift_size)
    rep.add("residual_states", cert.residual_shift.size)
    rep.add("residual_cycles", sorted(cert.residual))
    rep.add("inverse_window", f"memory {cert.inverse.memory}, anticipation {cert.inverse.anticipation}")
    steps = [f"{i + 1}. {s.kind}{'' if s.side is None else ' ' + s.side}: {s.size_before} -> {s.size_after} symbols"
             + (f", factor {s.factor}" if s.kind == "split" else f", index {s.index}")
             + f", f {s.follower_before}->{s.follower_after}, p {s.predecessor_before}->{s.predecessor_after}"
             for i, s in enumerate(cert.steps)]
    rep.add("steps", "\n".join(steps) or "none")
    ver = verify_certificate(model.shift, cert, flags.nmax)
    rep.add("word_counts", [c for _, c, _ in ver.counts])
    rep.check("word_count_equality", ver.counts_ok)
    rep.check("roundtrip_identity", ver.roundtrip_ok)
    rep.check("sliding_block_codes", ver.structural_ok)
    for f in ver.failures:
        rep.add("failure", f)


def _certificate_for(spec: SpecFile, name: str, graph):
    return spec.certificates.get(name) or default_certificate(graph)


def _classify(spec: SpecFile, flags: Flags, rep: RunReport):
    sec = _pick(spec, flags, ("generated_graph",))
    g = spec.objects[sec.name]
    cert = _certificate_for(spec, sec.name, g)
    cls = classify_blocks(g, flags.radius, cert)
    names = cls.truncation.names()
    rep.add("section", f"{sec.name} (generated_graph)")
    rep.add("graph_source", GRAPH_SOURCE)
    rep.add("radius", flags.radius)
    rep.add("states", cls.truncation.size)
    rep.add("T", sorted(names[i] for i in cls.t_part))
    rep.add("C", sorted(names[i] for i in cls.c_part))
    rep.add("W_count", len(cls.w_part))
    rep.check("T_within_C", cls.t_part <= cls.c_part)
    wider = classify_blocks(g, flags.radius + 2, cert)
    inner = [s for i, s in enumerate(cls.truncation.states) if i not in cls.truncation.boundary]
    a, b = cls.by_state(), wider.by_state()
    rep.check(f"radius_stable@{flags.radius + 2}", all(a[s] == b[s] for s in inner))
    v = finite_wandering_verdict(cls.quotient)
    rep.add("quotient_states", cls.quotient.size)
    rep.add("quotient_verdict", v.status)
    rep.check("quotient_totally_wandering", v.status == TOTALLY_WANDERING)
    return cls


def _entropy(spec: SpecFile, flags: Flags, rep: RunReport) -> None:
    sec = _pick(spec, flags, ("generated_graph", "group_shift", "coded_system", "shift"))
    obj = spec.objects[sec.name]
    rep.add("section", f"{sec.name} ({sec.kind})")
    if sec.kind == "generated_graph":
        rep.add("graph_source", GRAPH_SOURCE)
        cert = _certificate_for(spec, sec.name, obj)
        d = dual_entropy(obj, obj.base, flags.nmax, cert, flags.radius)
        rep.add("state", state_name(obj.base))
        rep.add("forward_counts", list(d.forward_counts))
        rep.add("backward_counts", list(d.backward_counts))
        rep.add("forward_growth", _log_text(d.forward_base))
        rep.add("backward_growth", _log_text(d.backward_base))
        rep.add("growth_entropy", "unknown" if d.growth_entropy is None else
                _log_text(max(b for b in (d.forward_base, d.backward_base) if b is not None)))
        rep.add("wandering_verdict", d.verdict or "no certificate")
        rep.add("measure_entropy_bound", "unknown" if d.measure_entropy_bound is None else
                f"{d.measure_entropy_bound:g}")
        rep.check("exact_geometric_growth", d.forward_base is not None and d.backward_base is not None)
        if cert is not None:
            rep.check("totally_wandering", d.verdict == TOTALLY_WANDERING)
    else:
        x = obj.shift
        g = block_entropy(x, max(flags.nmax, 2))
        rep.add("word_counts", list(g.counts))
        rep.add("growth_entropy", _log_text(g.base))
        rep.check("exact_geometric_growth", g.geometric)


def _export(spec: SpecFile, flags: Flags, rep: RunReport) -> None:
    sec = _pick(spec, flags, ("generated_graph", "group_shift", "coded_system", "shift"))
    obj = spec.objects[sec.name]
    if sec.kind == "generated_graph":
        cert = _certificate_for(spec, sec.name, obj)
        try:
            cls = classify_blocks(obj, flags.radius, cert)
            text = truncation_to_dot(cls.truncation, cls)
        except CosetShiftError:
            text = truncation_to_dot(truncate(obj, flags.radius))
    else:
        text = shift_to_dot(obj.shift, sec.name)
    rep.add("section", f"{sec.name} ({sec.kind})")
    if sec.kind == "generated_graph":
        rep.add("graph_source", GRAPH_SOURCE)
    rep.add("nodes", sum(1 for ln in text.splitlines() if "[label=" in ln))
    rep.add("edges", sum(1 for ln in text.splitlines() if "->" in ln))
    rep.add("dot_sha256", hashlib.sha256(text.encode()).hexdigest())
    if flags.out:
        Path(flags.out).write_text(text, encoding="utf-8")
        rep.add("written", flags.out)
    else:
        rep.attachment = text


def _examples(flags: Flags, rep: RunReport, name: str | None) -> None:
    entries = [gallery.GALLERY[name]] if name else list(gallery.GALLERY.values())
    for e in entries:
        rep.add(e.name, f"{e.kind}: {e.description}")
        text = gallery.spec_text(e.name)
        spec = parse_spec(text)
        obj = spec.objects[e.section]
        built = e.build()
        rep.check(f"{e.name}.matches_builder", _same(e.kind, obj, built))
        if flags.out:
            out = Path(flags.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / f"{e.name}.spec").write_text(text, encoding="utf-8")
        elif name:
            rep.attachment = text


def _same(kind: str, a, b) -> bool:
    if kind == "group_shift":
        return a.alphabet_group == b.alphabet_group and a.edges == b.edges
    if kind == "coded_system":
        return a.source[0] == b.source[0] and a.shift == b.shift and a.itinerary == b.itinerary
    return a == b


def run(operation: str, text: str | None, flags: Flags | None = None, example: str | None = None) -> RunReport:
    """Run one CLI operation on spec ``text`` and return its report."""
    flags = flags or Flags()
    if operation not in OPERATIONS:
        raise CosetShiftError(f"unknown operation {operation!r}")
    start = time.perf_counter()
    digest = hashlib.sha256((text or "").encode("utf-8")).hexdigest()
    rep = RunReport(operation, digest)
    if operation == "examples":
        if example is not None and example not in gallery.GALLERY:
            raise CosetShiftError(f"no example named {example!r}; try: {', '.join(gallery.GALLERY)}")
        _examples(flags, rep, example)
    else:
        spec = parse_spec(text or "")
        {"validate": _validate, "decompose": _decompose, "classify": _classify,
         "entropy": _entropy, "export-dot": _export}[operation](spec, flags, rep)
    rep.timing = time.perf_counter() - start
    return rep

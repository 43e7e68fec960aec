"""Graphviz export with a fixed node and edge order."""

from __future__ import annotations

from pathlib import Path

from .shifts import VertexShift
from .wandering import BlockClassification, TruncatedGraph

COLORS = {"T": "lightblue", "C": "palegreen", "W": "lightgrey"}


def _q(s: str) -> str:
    return '"' + str(s).replace('"', '\\"') + '"'


def shift_to_dot(x: VertexShift, name: str = "shift") -> str:
    lines = [f"digraph {_q(name)} {{", "  node [shape=circle];"]
    for i, sym in enumerate(x.alphabet):
        label = _q(f"{sym}\\nf={len(x.succ[i])} p={len(x.pred[i])}")
        lines.append(f"  {_q(sym)} [label={label}];")
    for i, j in x.edges():
        lines.append(f"  {_q(x.alphabet[i])} -> {_q(x.alphabet[j])};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def truncation_to_dot(t: TruncatedGraph, classification: BlockClassification | None = None) -> str:
    names = t.names()
    succ, pred = t.succ(), t.pred()
    labels = {}
    if classification is not None:
        labels = {i: classification.label(i) for i in range(t.size)}
    lines = [f"digraph {_q(t.name)} {{", "  node [shape=circle];"]
    for i, n in enumerate(names):
        label = _q(f"{n}\\nf={len(succ[i])} p={len(pred[i])}")
        attrs = [f"label={label}"]
        style = []
        if i in labels:
            style.append("filled")
            attrs.append(f"fillcolor={COLORS[labels[i]]}")
            attrs.append(f"group={labels[i]}")
        if i in t.boundary:
            style.append("dashed")
        if i in t.fixed:
            attrs.append("shape=doublecircle")
        if style:
            attrs.append(f"style={_q(','.join(style))}")
        lines.append(f"  {_q(n)} [{', '.join(attrs)}];")
    for i, j in t.edges:
        lines.append(f"  {_q(names[i])} -> {_q(names[j])};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_dot(obj, path, classification: BlockClassification | None = None, name: str = "shift") -> str:
    """Write the DOT text for a vertex shift or truncation to ``path`` and return it."""
    if isinstance(obj, TruncatedGraph):
        text = truncation_to_dot(obj, classification)
    elif isinstance(obj, VertexShift):
        text = shift_to_dot(obj, name)
    else:
        raise TypeError(f"cannot export {type(obj).__name__} as a graph")
    Path(path).write_text(text, encoding="utf-8")
    return text

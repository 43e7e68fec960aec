"""Bundled example models, as builder code and as spec files."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Callable

from .groups import cyclic_sum, multiplication_automorphism, symmetric_group
from .groupshift import GroupShiftModel, code_finite_system, full_group_shift, validate_group_shift
from .wandering import cycle_plus_q3_graph, q3_graph, q3xq3_graph, z2_system


def sigma_a() -> GroupShiftModel:
    """Z/4 + Z/2 with an edge a -> b exactly when b's second coordinate is a1 + a2 mod 2."""
    a = cyclic_sum([4, 2])
    coords = [tuple(int(v) for v in a.name(i).split(".")) for i in range(a.order)]
    edges = [(x, y) for x in range(a.order) for y in range(a.order)
             if coords[y][1] == (coords[x][0] + coords[x][1]) % 2]
    return validate_group_shift(a, edges)


def full_shift_s3() -> GroupShiftModel:
    return full_group_shift(symmetric_group(3))


def dlim_3adic_truncation(m: int = 2):
    """Multiplication by 2 on Z/3 + Z/9 + ... + Z/3^m, coded by single elements."""
    g = cyclic_sum([3 ** n for n in range(1, m + 1)])
    return code_finite_system(g, multiplication_automorphism(g, 2))


@dataclass(frozen=True)
class GalleryEntry:
    name: str
    kind: str
    section: str
    build: Callable
    description: str


GALLERY = {e.name: e for e in (
    GalleryEntry("sigma_a", "group_shift", "sigma_a", sigma_a,
                 "group shift on Z/4+Z/2 conjugate to the full 4-shift"),
    GalleryEntry("full_shift_s3", "group_shift", "full_s3", full_shift_s3,
                 "full shift on the symmetric group S3"),
    GalleryEntry("dlim_3adic_truncation", "coded_system", "dlim", dlim_3adic_truncation,
                 "multiplication by 2 on Z/3+Z/9, a pure permutation"),
    GalleryEntry("q3", "generated_graph", "q3", q3_graph,
                 "cosets of the 3-adic integers under multiplication by 3"),
    GalleryEntry("q3xq3", "generated_graph", "q3xq3", q3xq3_graph,
                 "multiplication by 1/3 and by 3 on two 3-adic copies"),
    GalleryEntry("z2_matrix", "matrix", "z2", z2_system,
                 "hyperbolic automorphism [[2,1],[1,1]] of Z^2"),
    GalleryEntry("cycle_plus_q3", "generated_graph", "cycle4+q3", cycle_plus_q3_graph,
                 "a 4-cycle next to the 3-adic graph: all three building blocks"),
)}


def spec_text(name: str) -> str:
    return resources.files("cosetshift").joinpath("specs").joinpath(f"{name}.spec").read_text(encoding="utf-8")

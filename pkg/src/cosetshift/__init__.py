"""Coset codings of group automorphisms as Markov shifts.

Finite group shifts are reduced to a full shift times a permutation with a
checkable conjugacy certificate, and countable-state graphs given by affine
rules are checked for total wandering and split into building blocks.
"""

from .decompose import DecompositionCertificate, decompose_driver, verify_certificate
from .errors import CosetShiftError
from .groups import FiniteGroup, Subgroup, GroupAutomorphism, build_group, cyclic_sum, symmetric_group
from .groupshift import GroupShiftModel, code_finite_system, validate_group_shift
from .shifts import VertexShift, vertex_shift
from .specfile import parse_spec, render
from .wandering import GeneratedGraph, RankCertificate, classify_blocks, dual_entropy, totally_wandering

__version__ = "0.1.0"

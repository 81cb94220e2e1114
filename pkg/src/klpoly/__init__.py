"""Parabolic Kazhdan-Lusztig polynomials via Bruhat maps, and the Lusztig
character formula for restricted weights of affine Weyl groups."""

from .laurent import EXACT, CoefficientRing, LaurentPoly, residue_ring
from .coxeter import CoxeterElement, CoxeterSystem
from .bruhatmap import BruhatMap, build as build_map
from .heckemod import ModuleElement
from .klsolver import CanonicalElement, Solver, SolverConfig, all_canonical, canonicalize

__version__ = "0.1.0"

__all__ = [
    "EXACT", "CoefficientRing", "LaurentPoly", "residue_ring",
    "CoxeterElement", "CoxeterSystem", "BruhatMap", "build_map", "ModuleElement",
    "CanonicalElement", "Solver", "SolverConfig", "all_canonical", "canonicalize",
]

"""
Core combinatorics of scalar Riemann monomials.

- permgroup: signed permutations and Schreier-Sims
- monomial: cases, monomials, slot symmetries
- canonicalizer: canonical forms under slot symmetries and dummy renaming
- enumerator: canonical invariant tables per case
"""

from .canonicalizer import canonicalize, canonicalize_lincomb
from .enumerator import CaseTable, InvariantId, enumerate_case, parse_invariant_id
from .errors import InvariantEngineError
from .monomial import Case, Factor, LinComb, Monomial, parse_case

__all__ = [
    "Case",
    "CaseTable",
    "Factor",
    "InvariantEngineError",
    "InvariantId",
    "LinComb",
    "Monomial",
    "canonicalize",
    "canonicalize_lincomb",
    "enumerate_case",
    "parse_case",
    "parse_invariant_id",
]

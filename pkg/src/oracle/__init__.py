"""Exact numeric evaluation of invariants on random metric jets"""

from .jet_evaluator import (CurvatureJet, Jet, JetEvaluator, JetMetric, curvature_jet, epsilon_at_origin,
                            evaluate, evaluate_monomial, riemann_via_sympy)

__all__ = [
    "CurvatureJet",
    "Jet",
    "JetEvaluator",
    "JetMetric",
    "curvature_jet",
    "epsilon_at_origin",
    "evaluate",
    "evaluate_monomial",
    "riemann_via_sympy",
]

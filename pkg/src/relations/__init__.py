"""Relation generation and triangular reduction"""

from .generators import Relation, RelationGenerator, dedupe, epsilon_pair_expansion, epsilon_self_contraction
from .reducer import COUNT_COLUMNS, STEP_NAMES, STEP_TAGS, RuleBase, StepCounts, apply, order_key, product_key, reduce

__all__ = [
    "COUNT_COLUMNS",
    "Relation",
    "RelationGenerator",
    "RuleBase",
    "STEP_NAMES",
    "STEP_TAGS",
    "StepCounts",
    "apply",
    "dedupe",
    "epsilon_pair_expansion",
    "epsilon_self_contraction",
    "order_key",
    "product_key",
    "reduce",
]

"""
Exact elimination of relations into triangular substitution rules.

Terms are invariant ids or products of ids (tuples, the empty tuple being
the constant 1). The pivot of a relation is its greatest term under the
global order; products rank below every single id, so they never become
pivots.
"""

import heapq
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Hashable, Iterable, List, Optional, Sequence, Tuple, Union

from core.enumerator import InvariantId
from core.errors import InconsistentRelationError, UnknownInvariantError
from core.monomial import LinComb

logger = logging.getLogger(__name__)

ProductKey = Tuple[InvariantId, ...]
Term = Union[InvariantId, ProductKey]

STEP_NAMES = ("Cyclic", "Bianchi", "Commute", "4D", "Duals")
STEP_TAGS = {"cyclic": "Cyclic", "bianchi": "Bianchi", "commute": "Commute", "dimdep": "4D", "dual": "Duals"}
COUNT_COLUMNS = ("Canon", "Invars") + STEP_NAMES


def order_key(term: Term) -> Tuple:
    """Global order: products lowest; ids by order, degree descending, lambdas, index"""
    if isinstance(term, InvariantId):
        case = term.case
        return (1, case.order, -case.degree, case.lambdas, case.dual, term.index)
    return (0, len(term), tuple(order_key(t) for t in term))


def product_key(factors: Iterable[InvariantId]) -> Term:
    ordered = tuple(sorted(factors, key=order_key))
    return ordered[0] if len(ordered) == 1 else ordered


class _Descending:
    __slots__ = ("key", "term")

    def __init__(self, term: Term):
        self.key = order_key(term)
        self.term = term

    def __lt__(self, other: "_Descending") -> bool:
        return self.key > other.key


def normalized(comb: LinComb) -> Tuple[Tuple[Term, Fraction], ...]:
    """Scale-free fingerprint: greatest term gets coefficient 1"""
    if not comb:
        return ()
    ordered = sorted(comb.items(), key=lambda kv: order_key(kv[0]), reverse=True)
    lead = ordered[0][1]
    return tuple((term, coeff / lead) for term, coeff in ordered)


class RuleBase:
    """Ordered substitution rules pivot -> combination of strictly lower terms"""

    def __init__(self):
        self.logger = logging.getLogger(__name__)
        self.rules: Dict[InvariantId, LinComb] = {}
        self.pivot_step: Dict[InvariantId, str] = {}
        self.skipped = 0
        self._normal_forms: Dict[InvariantId, LinComb] = {}

    def __contains__(self, ident: InvariantId) -> bool:
        return ident in self.rules

    def __len__(self) -> int:
        return len(self.rules)

    def pivots(self, step: Optional[str] = None) -> List[InvariantId]:
        return [p for p in self.rules if step is None or self.pivot_step[p] == step]

    def pivot_count(self, case, steps: Sequence[str]) -> int:
        return sum(1 for p, s in self.pivot_step.items() if p.case == case and s in steps)

    def set_rule(self, pivot: InvariantId, rhs: LinComb, step: str) -> None:
        for term in rhs.keys():
            if order_key(term) >= order_key(pivot):
                raise InconsistentRelationError(f"Rule for {pivot} references non-lower term {term}")
        self.rules[pivot] = rhs
        self.pivot_step[pivot] = step
        self._normal_forms.clear()

    def _expand_product(self, factors: ProductKey, full: bool = True) -> LinComb:
        expanded: Dict[Tuple[InvariantId, ...], Fraction] = {(): Fraction(1)}
        for factor in factors:
            if full:
                comb = self._normal_form(factor)
            else:
                comb = self.rules.get(factor, LinComb({factor: 1}))
            step: Dict[Tuple[InvariantId, ...], Fraction] = {}
            for prefix, c in expanded.items():
                for term, v in comb.items():
                    flat = (term,) if isinstance(term, InvariantId) else term
                    merged = prefix + flat
                    step[merged] = step.get(merged, Fraction(0)) + c * v
            expanded = step
        result = LinComb()
        for flat, coeff in expanded.items():
            result.add(product_key(flat) if flat else (), coeff)
        return result

    def _normal_form(self, ident: InvariantId) -> LinComb:
        if ident not in self.rules:
            return LinComb({ident: 1})
        if ident not in self._normal_forms:
            self._normal_forms[ident] = self.reduce_row(self.rules[ident])
        return self._normal_forms[ident]

    def reduce_row(self, row: Union[LinComb, Dict[Term, Fraction]]) -> LinComb:
        """Substitute pivots greatest-first until none remains"""
        items = row.items() if isinstance(row, (LinComb, dict)) else row
        work: Dict[Term, Fraction] = {}
        for term, coeff in items:
            work[term] = work.get(term, Fraction(0)) + Fraction(coeff)
        heap = [_Descending(term) for term in work]
        heapq.heapify(heap)
        result = LinComb()
        while heap:
            term = heapq.heappop(heap).term
            coeff = work.pop(term, Fraction(0))
            if coeff == 0:
                continue
            if isinstance(term, InvariantId):
                rule = self.rules.get(term)
                if rule is None:
                    result.add(term, coeff)
                    continue
                for lower, v in rule.items():
                    if lower in work:
                        work[lower] += coeff * v
                    else:
                        work[lower] = coeff * v
                        heapq.heappush(heap, _Descending(lower))
            elif not term:
                result.add(term, coeff)
            else:
                result.add_comb(self._expand_product(term), coeff)
        return result

    def add_relation(self, relation: LinComb, step: str) -> Optional[InvariantId]:
        """Eliminate one relation; returns the new pivot, or None when redundant"""
        reduced = self.reduce_row(relation)
        if not reduced:
            return None
        top = max(reduced.keys(), key=order_key)
        if not isinstance(top, InvariantId):
            if all(term == () for term in reduced.keys()):
                raise InconsistentRelationError(f"Relation reduces to the nonzero constant {reduced[()]}")
            self.skipped += 1
            self.logger.warning(f"Skipping {step} relation among products only ({len(reduced)} terms)")
            return None
        lead = reduced[top]
        rhs = LinComb({term: -coeff / lead for term, coeff in reduced.items() if term != top})
        self.rules[top] = rhs
        self.pivot_step[top] = step
        self._normal_forms.clear()
        self.logger.debug(f"{step}: new pivot {top} ({len(rhs)} terms)")
        return top

    def apply(self, x: LinComb) -> LinComb:
        return self.reduce_row(x)

    def apply_once(self, x: LinComb) -> LinComb:
        """One substitution pass with the stored (possibly non-expanded) rules"""
        result = LinComb()
        for term, coeff in x.items():
            if isinstance(term, InvariantId):
                result.add_comb(self.rules.get(term, LinComb({term: 1})), coeff)
            elif term:
                result.add_comb(self._expand_product(term, full=False), coeff)
            else:
                result.add(term, coeff)
        return result

    def is_reduced(self, x: LinComb) -> bool:
        for term in x.keys():
            factors = (term,) if isinstance(term, InvariantId) else term
            if any(f in self.rules for f in factors):
                return False
        return True

    def expanded_rule(self, pivot: InvariantId) -> LinComb:
        if pivot not in self.rules:
            raise UnknownInvariantError(f"{pivot} is not a pivot")
        return self._normal_form(pivot)


def reduce(relations: Iterable[LinComb], step: str, prior: Optional[RuleBase] = None) -> RuleBase:
    """Extend prior with the pivots of the given relations"""
    rulebase = prior if prior is not None else RuleBase()
    added = 0
    for relation in relations:
        if rulebase.add_relation(relation, step) is not None:
            added += 1
    logger.info(f"{step}: {added} new pivots, {len(rulebase)} rules in total")
    return rulebase


def apply(rulebase: RuleBase, x: LinComb) -> LinComb:
    return rulebase.apply(x)


@dataclass
class StepCounts:
    """Independent invariants of one case after each cumulative step"""
    case: object
    values: Dict[str, int] = field(default_factory=dict)

    @classmethod
    def compute(cls, case, canon: int, invars: int, rulebase: RuleBase, with_duals: bool = True) -> "StepCounts":
        values = {"Canon": canon, "Invars": invars}
        applied: List[str] = []
        for tag, column in STEP_TAGS.items():
            if tag == "dual" and (case.dual or not with_duals):
                continue
            applied.append(tag)
            values[column] = invars - rulebase.pivot_count(case, applied)
        return cls(case, values)

    def __getitem__(self, column: str) -> int:
        return self.values[column]

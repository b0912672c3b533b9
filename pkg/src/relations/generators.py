"""
Multiterm-symmetry relations among canonical invariants.

Each generator rewrites one table entry with an identity of the Riemann
tensor (cyclic, Bianchi, commutation of derivatives, antisymmetrisation
over d+1 indices, epsilon-pair expansion), canonicalizes every resulting
term and resolves it to an invariant id or a product of ids.
"""

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Hashable, Iterable, List, Mapping, Optional, Sequence, Tuple

from core.canonicalizer import canonicalize
from core.enumerator import CaseTable, InvariantId
from core.errors import DependencyError, MalformedInputError
from core.monomial import Case, Factor, LinComb, Monomial, is_product, split_components
from .reducer import Term, normalized, order_key, product_key

logger = logging.getLogger(__name__)

STEP_ORDER = ("cyclic", "bianchi", "commute", "dimdep", "dual")


@dataclass
class Relation:
    terms: LinComb
    step: str

    @property
    def product_terms(self) -> Dict[Term, Fraction]:
        return {t: c for t, c in self.terms.items() if not isinstance(t, InvariantId)}

    def ids(self) -> List[InvariantId]:
        found = []
        for term in self.terms.keys():
            found.extend([term] if isinstance(term, InvariantId) else term)
        return found


def permutation_sign(perm: Sequence[int]) -> int:
    sign = 1
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


def epsilon_self_contraction(signature_sign: int = -1, dimension: int = 4) -> int:
    """Value of eps_{abcd} eps^{abcd}: signature_sign * sum_s sgn(s) d^cycles(s)"""
    total = 0
    for perm in itertools.permutations(range(4)):
        seen, cycles = set(), 0
        for start in range(4):
            if start in seen:
                continue
            cycles += 1
            point = start
            while point not in seen:
                seen.add(point)
                point = perm[point]
        total += permutation_sign(perm) * dimension ** cycles
    return signature_sign * total


def epsilon_pair_expansion(signature_sign: int = -1) -> List[Tuple[Tuple[int, ...], int]]:
    """eps_{abcd} eps^{efgh} = s * sum_p sgn(p) delta^e_{p(a)} ...: (p, coefficient) pairs"""
    return [(perm, signature_sign * permutation_sign(perm)) for perm in itertools.permutations(range(4))]


def _relabel(m: Monomial, source: Dict[int, int]) -> Monomial:
    """New slot y carries the index that sat on slot source[y]"""
    n = len(m.pairing)
    move = list(range(n))
    for new_slot, old_slot in source.items():
        move[old_slot] = new_slot
    pairing = [0] * n
    for x, partner in enumerate(m.pairing):
        pairing[move[x]] = move[partner]
    return Monomial(m.case, tuple(pairing), 1)


class RelationGenerator:
    """Relations for the entries of a set of built case tables"""

    def __init__(self, tables: Mapping[Case, CaseTable], dimension: int = 4, signature_sign: int = -1):
        self.logger = logging.getLogger(__name__)
        self.tables = tables
        self.dimension = dimension
        self.signature_sign = signature_sign
        self._permutations = [(perm, permutation_sign(perm))
                              for perm in itertools.permutations(range(dimension + 1))]

    def table(self, case: Case) -> CaseTable:
        if case not in self.tables:
            raise DependencyError(f"Table for case {case} is not built", missing_case=case)
        return self.tables[case]

    def monomial(self, ident: InvariantId) -> Monomial:
        return self.table(ident.case).lookup(ident)

    def resolve(self, m: Monomial) -> Optional[Tuple[Term, Fraction]]:
        """Canonicalize and map to an id or a product of ids; None when zero"""
        canon = canonicalize(m)
        if canon.sign == 0:
            return None
        if not is_product(canon):
            return self.table(canon.case).reverse_lookup(canon.with_sign(1)), canon.sign
        coeff = canon.sign
        ids = []
        for part in split_components(canon.with_sign(1)):
            piece = canonicalize(part)
            if piece.sign == 0:
                return None
            coeff *= piece.sign
            ids.append(self.table(piece.case).reverse_lookup(piece.with_sign(1)))
        return product_key(ids), coeff

    def combine(self, terms: Iterable[Tuple[Fraction, Monomial]]) -> LinComb:
        result = LinComb()
        for coeff, m in terms:
            resolved = self.resolve(m)
            if resolved is not None:
                term, sign = resolved
                result.add(term, Fraction(coeff) * sign)
        return result

    def _emit(self, out: List[Relation], comb: LinComb, step: str) -> None:
        if comb:
            out.append(Relation(comb, step))

    def cyclic_relations(self, ident: InvariantId) -> List[Relation]:
        m = self.monomial(ident)
        out: List[Relation] = []
        for off in m.case.factor_offsets():
            terms = [
                (1, m),
                (1, _relabel(m, {off + 1: off + 2, off + 2: off + 3, off + 3: off + 1})),
                (1, _relabel(m, {off + 1: off + 3, off + 2: off + 1, off + 3: off + 2})),
            ]
            self._emit(out, self.combine(terms), "cyclic")
        return out

    def bianchi_relations(self, ident: InvariantId) -> List[Relation]:
        m = self.monomial(ident)
        out: List[Relation] = []
        for off, lam in zip(m.case.factor_offsets(), m.case.lambdas):
            if lam == 0:
                continue
            e = off + 4
            for a, b in ((off + 2, off + 3), (off, off + 1)):
                terms = [
                    (1, m),
                    (1, _relabel(m, {e: a, a: b, b: e})),
                    (1, _relabel(m, {e: b, a: e, b: a})),
                ]
                self._emit(out, self.combine(terms), "bianchi")
        return out

    def commutation_relations(self, ident: InvariantId) -> List[Relation]:
        """[D_y, D_x] T = sum_s R_{y x b_s}^e T(b_s -> e), outer derivatives by Leibniz"""
        m = self.monomial(ident)
        factors = m.factors()
        fresh = max(label for f in factors for label in f.labels) + 1
        out: List[Relation] = []
        for i, factor in enumerate(factors):
            if factor.kind != "R" or factor.order < 2:
                continue
            others = factors[:i] + factors[i + 1:]
            derivs = list(factor.derivatives)
            for k in range(len(derivs) - 1):
                x, y = derivs[k], derivs[k + 1]
                outer = derivs[k + 2:]
                swapped = derivs[:k] + [y, x] + outer
                terms = [(Fraction(1), m),
                         (Fraction(-1), Monomial.from_factors(others + [Factor("R", factor.head, tuple(swapped))]))]
                inner_slots = [("head", p) for p in range(4)] + [("deriv", p) for p in range(k)]
                for where, p in inner_slots:
                    head = list(factor.head)
                    inner = derivs[:k]
                    if where == "head":
                        b = head[p]
                        head[p] = fresh
                    else:
                        b = inner[p]
                        inner = inner[:p] + [fresh] + inner[p + 1:]
                    for mask in range(1 << len(outer)):
                        to_curvature = tuple(o for j, o in enumerate(outer) if mask >> j & 1)
                        to_tensor = tuple(o for j, o in enumerate(outer) if not mask >> j & 1)
                        curvature = Factor("R", (y, x, b, fresh), to_curvature)
                        tensor = Factor("R", tuple(head), tuple(inner) + to_tensor)
                        terms.append((Fraction(-1), Monomial.from_factors(others + [curvature, tensor])))
                self._emit(out, self.combine(terms), "commute")
        return out

    def _antisymmetric_groups(self, case: Case) -> List[Tuple[int, ...]]:
        groups = []
        for off in case.factor_offsets():
            groups.append((off, off + 1))
            groups.append((off + 2, off + 3))
        if case.dual:
            off = case.epsilon_offset
            groups.append(tuple(range(off, off + 4)))
        return groups

    def dimdep_relations(self, ident: InvariantId) -> List[Relation]:
        """Antisymmetrisation over every (d+1)-subset of slots vanishes in dimension d"""
        m = self.monomial(ident)
        n = m.case.n_slots
        size = self.dimension + 1
        if n < size:
            return []
        pairing = m.pairing
        groups = self._antisymmetric_groups(m.case)
        out: List[Relation] = []
        seen = set()
        for subset in itertools.combinations(range(n), size):
            members = set(subset)
            partners = tuple(sorted(pairing[x] for x in subset))
            if members.intersection(partners) or partners < subset:
                continue
            position = {slot: i for i, slot in enumerate(subset)}
            constraints = []
            for group in groups:
                inside = [position[s] for s in group if s in position]
                if len(inside) > 1:
                    constraints.append(inside)
            terms = []
            for perm, sign in self._permutations:
                if any(perm[a] > perm[b] for c in constraints for a, b in zip(c, c[1:])):
                    continue
                new = list(pairing)
                for i, slot in enumerate(subset):
                    partner = pairing[subset[perm[i]]]
                    new[slot], new[partner] = partner, slot
                terms.append((Fraction(sign), Monomial(m.case, tuple(new), 1)))
            comb = self.combine(terms)
            if comb:
                fingerprint = normalized(comb)
                if fingerprint not in seen:
                    seen.add(fingerprint)
                    out.append(Relation(comb, "dimdep"))
        return out

    def dual_pair_relations(self, a: InvariantId, b: InvariantId) -> Relation:
        """eps.eps = signature_sign * generalized delta: product (a.b) minus its expansion"""
        if not (a.case.dual and b.case.dual):
            raise MalformedInputError("Dual pair relations need two dual invariants")
        left, right = self.monomial(a), self.monomial(b)
        left_factors, right_factors = left.factors(), right.factors()
        left_eps, right_eps = left_factors[-1].head, right_factors[-1].head
        base_left = [Factor(f.kind, tuple(("l", x) for x in f.head), tuple(("l", x) for x in f.derivatives))
                     for f in left_factors[:-1]]
        terms = []
        for perm, coeff in epsilon_pair_expansion(self.signature_sign):
            rename = {right_eps[perm[i]]: ("l", left_eps[i]) for i in range(4)}

            def label(x):
                return rename.get(x, ("r", x))

            merged = base_left + [Factor(f.kind, tuple(label(x) for x in f.head), tuple(label(x) for x in f.derivatives))
                                  for f in right_factors[:-1]]
            terms.append((Fraction(coeff), Monomial.from_factors(merged)))
        comb = self.combine(terms).scaled(-1)
        comb.add(product_key([a, b]), 1)
        return Relation(comb, "dual")

    def relations_for(self, step: str, ident: InvariantId) -> List[Relation]:
        if step == "cyclic":
            return self.cyclic_relations(ident)
        if step == "bianchi":
            return self.bianchi_relations(ident)
        if step == "commute":
            return self.commutation_relations(ident)
        if step == "dimdep":
            return self.dimdep_relations(ident)
        raise MalformedInputError(f"Unknown relation step {step!r}")


def dedupe(relations: Iterable[Relation]) -> List[Relation]:
    """Drop relations equal up to an overall rational factor, keeping first occurrence"""
    seen = set()
    result = []
    for relation in relations:
        fingerprint = normalized(relation.terms)
        if fingerprint and fingerprint not in seen:
            seen.add(fingerprint)
            result.append(relation)
    return result

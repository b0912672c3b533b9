"""
Scalar Riemann monomials.

A monomial is a product of Riemann factors, each followed by its covariant
derivatives, plus at most one epsilon factor, with every slot contracted
to exactly one other slot. Slot layout (0-based): for each factor four
head slots then its derivative slots innermost first; epsilon slots last.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Hashable, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from .errors import FreeIndexError, MalformedInputError, UnsupportedCaseError
from .permgroup import (SignedBSGS, SignedPermutation, antisymmetric_generators, bsgs_build,
                        riemann_generators)

logger = logging.getLogger(__name__)

Rational = Union[int, Fraction]


@dataclass(frozen=True, order=True)
class Case:
    lambdas: Tuple[int, ...]
    dual: bool = False

    def __post_init__(self):
        lambdas = tuple(int(x) for x in self.lambdas)
        object.__setattr__(self, "lambdas", lambdas)
        if not lambdas and not self.dual:
            raise MalformedInputError("A case needs at least one Riemann factor")
        if any(x < 0 for x in lambdas):
            raise MalformedInputError(f"Negative derivative order in {lambdas}")
        if any(a > b for a, b in zip(lambdas, lambdas[1:])):
            raise MalformedInputError(f"Derivative orders must be nondecreasing: {lambdas}")

    @property
    def degree(self) -> int:
        return len(self.lambdas)

    @property
    def n_slots(self) -> int:
        return 4 * self.degree + sum(self.lambdas) + (4 if self.dual else 0)

    @property
    def order(self) -> int:
        return 2 * self.degree + sum(self.lambdas)

    @property
    def label(self) -> str:
        return "_".join(str(x) for x in self.lambdas)

    @property
    def n_blocks(self) -> int:
        return self.degree + (1 if self.dual else 0)

    def factor_offsets(self) -> List[int]:
        offsets, position = [], 0
        for lam in self.lambdas:
            offsets.append(position)
            position += 4 + lam
        return offsets

    @property
    def epsilon_offset(self) -> Optional[int]:
        return self.n_slots - 4 if self.dual else None

    def block_bounds(self) -> List[Tuple[int, int]]:
        """(start, stop) slot ranges of factors, then the epsilon block"""
        bounds = [(off, off + 4 + lam) for off, lam in zip(self.factor_offsets(), self.lambdas)]
        if self.dual:
            bounds.append((self.n_slots - 4, self.n_slots))
        return bounds

    def block_class(self, block: int) -> Union[int, str]:
        return "eps" if block >= self.degree else self.lambdas[block]

    def nondual(self) -> "Case":
        return Case(self.lambdas, False)

    def __str__(self) -> str:
        return "{" + ",".join(str(x) for x in self.lambdas) + "}" + ("*" if self.dual else "")


def parse_case(text: str, dual: bool = False) -> Case:
    text = text.strip().strip("{}[]")
    if text.endswith("*"):
        text, dual = text[:-1].strip("{}"), True
    try:
        lambdas = [int(part) for part in text.replace("_", ",").split(",") if part.strip() != ""]
    except ValueError:
        raise MalformedInputError(f"Cannot read case '{text}'")
    return Case(tuple(sorted(lambdas)), dual)


def _partitions(total: int, parts: int, minimum: int = 0) -> Iterator[Tuple[int, ...]]:
    if parts == 0:
        if total == 0:
            yield ()
        return
    for first in range(minimum, total // parts + 1):
        for rest in _partitions(total - first, parts - 1, first):
            yield (first,) + rest


def cases_of_order(order: int, dual: bool = False) -> List[Case]:
    """All cases of a given order with an even slot count, degree descending"""
    result = []
    for degree in range(order // 2, 0, -1):
        derivatives = order - 2 * degree
        if derivatives % 2:
            continue
        for lambdas in _partitions(derivatives, degree):
            result.append(Case(lambdas, dual))
    return result


@dataclass(frozen=True)
class Factor:
    """A Riemann head with its derivatives (innermost first), or an epsilon"""
    kind: str
    head: Tuple[Hashable, ...]
    derivatives: Tuple[Hashable, ...] = ()

    @property
    def labels(self) -> Tuple[Hashable, ...]:
        return tuple(self.head) + tuple(self.derivatives)

    @property
    def order(self) -> int:
        return len(self.derivatives)


@dataclass(frozen=True)
class Monomial:
    case: Case
    pairing: Tuple[int, ...]
    sign: Fraction = Fraction(1)

    def __post_init__(self):
        pairing = tuple(int(x) for x in self.pairing)
        object.__setattr__(self, "pairing", pairing)
        object.__setattr__(self, "sign", Fraction(self.sign))
        if len(pairing) != self.case.n_slots:
            raise MalformedInputError(f"Pairing has {len(pairing)} slots, case {self.case} needs {self.case.n_slots}")
        for slot, partner in enumerate(pairing):
            if partner == slot or not 0 <= partner < len(pairing) or pairing[partner] != slot:
                raise MalformedInputError(f"Pairing is not a fixed-point-free involution at slot {slot}")

    @classmethod
    def from_pairs(cls, case: Case, pairs: Iterable[Tuple[int, int]], sign: Rational = 1) -> "Monomial":
        pairing = [-1] * case.n_slots
        for a, b in pairs:
            pairing[a], pairing[b] = b, a
        return cls(case, tuple(pairing), Fraction(sign))

    @classmethod
    def from_labels(cls, case: Case, labels: Sequence[int], sign: Rational = 1) -> "Monomial":
        """Inverse of labels(): slots sharing a label are paired"""
        first: Dict[int, int] = {}
        pairing = [-1] * len(labels)
        for slot, label in enumerate(labels):
            if label in first:
                other = first.pop(label)
                pairing[slot], pairing[other] = other, slot
            else:
                first[label] = slot
        if first:
            raise MalformedInputError(f"Unpaired labels {sorted(first)}")
        return cls(case, tuple(pairing), Fraction(sign))

    @classmethod
    def from_factors(cls, factors: Sequence[Factor], sign: Rational = 1) -> "Monomial":
        riemanns = [f for f in factors if f.kind == "R"]
        epsilons = [f for f in factors if f.kind == "eps"]
        if len(epsilons) > 1:
            raise UnsupportedCaseError("At most one epsilon factor per monomial is supported")
        for f in factors:
            if f.kind not in ("R", "eps"):
                raise MalformedInputError(f"Unknown factor kind {f.kind!r}")
            if len(f.head) != 4 or (f.kind == "eps" and f.derivatives):
                raise MalformedInputError(f"Malformed factor {f}")
        ordered = sorted(riemanns, key=lambda f: f.order) + epsilons
        case = Case(tuple(f.order for f in ordered[:len(riemanns)]), bool(epsilons))
        labels = [label for f in ordered for label in f.labels]
        counts = Counter(labels)
        bad = sorted(str(label) for label, count in counts.items() if count != 2)
        if bad:
            raise FreeIndexError(f"Indices must appear exactly twice: {', '.join(bad)}")
        first_seen: Dict[Hashable, int] = {}
        pairing = [0] * len(labels)
        for slot, label in enumerate(labels):
            if label in first_seen:
                other = first_seen[label]
                pairing[slot], pairing[other] = other, slot
            else:
                first_seen[label] = slot
        return cls(case, tuple(pairing), Fraction(sign))

    def with_sign(self, sign: Rational) -> "Monomial":
        return Monomial(self.case, self.pairing, Fraction(sign))

    def labels(self) -> Tuple[int, ...]:
        """First-occurrence labels: slot -> 0, 1, 2, ... in order of first use"""
        result = [-1] * len(self.pairing)
        next_label = 0
        for slot, partner in enumerate(self.pairing):
            if result[slot] < 0:
                result[slot] = result[partner] = next_label
                next_label += 1
        return tuple(result)

    def factors(self) -> List[Factor]:
        labels = self.labels()
        result = []
        for off, lam in zip(self.case.factor_offsets(), self.case.lambdas):
            result.append(Factor("R", labels[off:off + 4], labels[off + 4:off + 4 + lam]))
        if self.case.dual:
            off = self.case.epsilon_offset
            result.append(Factor("eps", labels[off:off + 4]))
        return result

    def pairs(self) -> List[Tuple[int, int]]:
        return [(a, b) for a, b in enumerate(self.pairing) if a < b]


def case_of(m: Monomial) -> Case:
    return m.case


def act(m: Monomial, s: SignedPermutation) -> Monomial:
    """Move slot x to s(x): m'[s(x)] = s(m[x]); the sign picks up s.sign"""
    pairing = [0] * len(m.pairing)
    for x, partner in enumerate(m.pairing):
        pairing[s(x)] = s(partner)
    return Monomial(m.case, tuple(pairing), m.sign * s.sign)


def slot_symmetry_generators(case: Case) -> List[SignedPermutation]:
    n_slots = case.n_slots
    generators: List[SignedPermutation] = []
    offsets = case.factor_offsets()
    for off in offsets:
        generators.extend(riemann_generators(n_slots, off))
    for i in range(case.degree - 1):
        if case.lambdas[i] != case.lambdas[i + 1]:
            continue
        width = 4 + case.lambdas[i]
        a, b = offsets[i], offsets[i + 1]
        generators.append(SignedPermutation.from_cycles(n_slots, [(a + k, b + k) for k in range(width)]))
    if case.dual:
        generators.extend(antisymmetric_generators(n_slots, case.epsilon_offset))
    return generators


def slot_symmetry_group(m: Union[Monomial, Case]) -> List[SignedPermutation]:
    """Generators of the slot symmetries of a monomial's case"""
    return slot_symmetry_generators(m.case if isinstance(m, Monomial) else m)


def slot_symmetry_bsgs(case: Case) -> SignedBSGS:
    return bsgs_build(slot_symmetry_generators(case), case.n_slots)


def slot_owner(case: Case) -> List[int]:
    """Block index of each slot (epsilon block = degree)"""
    owner = []
    for block, (start, stop) in enumerate(case.block_bounds()):
        owner.extend([block] * (stop - start))
    return owner


def connected_components(m: Monomial) -> List[List[int]]:
    """Blocks grouped by chains of contractions; the epsilon block is index degree"""
    owner = slot_owner(m.case)
    parent = list(range(m.case.n_blocks))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in m.pairs():
        ra, rb = find(owner[a]), find(owner[b])
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups: Dict[int, List[int]] = {}
    for block in range(m.case.n_blocks):
        groups.setdefault(find(block), []).append(block)
    return sorted(groups.values())


def is_product(m: Monomial) -> bool:
    return len(connected_components(m)) > 1


def split_components(m: Monomial) -> List[Monomial]:
    """One monomial per connected component, sign kept on the first"""
    if not is_product(m):
        return [m]
    factors = m.factors()
    parts = []
    for k, blocks in enumerate(connected_components(m)):
        parts.append(Monomial.from_factors([factors[b] for b in blocks], m.sign if k == 0 else 1))
    return parts


class LinComb:
    """Sparse exact linear combination; zero coefficients are never stored"""

    def __init__(self, terms: Optional[Dict[Hashable, Rational]] = None):
        self.terms: Dict[Hashable, Fraction] = {}
        for key, coeff in (terms or {}).items():
            self.add(key, coeff)

    def add(self, key: Hashable, coeff: Rational) -> None:
        if coeff == 0:
            return
        value = self.terms.get(key, Fraction(0)) + Fraction(coeff)
        if value == 0:
            self.terms.pop(key, None)
        else:
            self.terms[key] = value

    def add_comb(self, other: "LinComb", factor: Rational = 1) -> None:
        for key, coeff in other.terms.items():
            self.add(key, coeff * factor)

    def scaled(self, factor: Rational) -> "LinComb":
        return LinComb({k: v * factor for k, v in self.terms.items()})

    def items(self):
        return self.terms.items()

    def keys(self):
        return self.terms.keys()

    def __getitem__(self, key: Hashable) -> Fraction:
        return self.terms.get(key, Fraction(0))

    def __contains__(self, key: Hashable) -> bool:
        return key in self.terms

    def __len__(self) -> int:
        return len(self.terms)

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LinComb):
            return NotImplemented
        return self.terms == other.terms

    def __repr__(self) -> str:
        return f"LinComb({self.terms})"

"""
Enumeration of the canonical invariants of a case.

Matchings are generated slot by slot (each slot either opens a new index
or closes an open one) and pruned at every block boundary when the prefix
cannot start a canonical form. A complete matching is kept when it is its
own nonzero canonical form.
"""

import logging
import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .canonicalizer import canonical_pairing, prefix_is_minimal
from .errors import MalformedInputError, ResourceLimitError, UnknownInvariantError
from .monomial import Case, Monomial, is_product, parse_case

logger = logging.getLogger(__name__)

DEFAULT_MAX_SLOTS = 24

_ID_PATTERN = re.compile(r"^\s*I(\*?)\[([0-9,\s]*):\s*(\d+)\]\s*$")


@dataclass(frozen=True, order=True)
class InvariantId:
    case: Case
    index: int

    def __str__(self) -> str:
        star = "*" if self.case.dual else ""
        return f"I{star}[{','.join(str(x) for x in self.case.lambdas)}:{self.index}]"

    __repr__ = __str__


def parse_invariant_id(text: str) -> InvariantId:
    match = _ID_PATTERN.match(text)
    if not match:
        raise MalformedInputError(f"Not an invariant id: {text!r}")
    case = parse_case(match.group(2), dual=bool(match.group(1)))
    return InvariantId(case, int(match.group(3)))


def sort_key(m: Monomial) -> Tuple:
    """Ricci scalars first, then Ricci tensors, then Laplacians, then labels"""
    scalars = riccis = laplacians = 0
    pairing = m.pairing
    for start, lam in zip(m.case.factor_offsets(), m.case.lambdas):
        cross = sum(1 for i in (0, 1) for j in (2, 3) if pairing[start + i] == start + j)
        if cross == 2:
            scalars += 1
        elif cross == 1:
            riccis += 1
        for k in range(lam - 1):
            if pairing[start + 4 + k] == start + 5 + k:
                laplacians += 1
    return (-scalars, -riccis, -laplacians, m.labels())


@dataclass
class CaseTable:
    case: Case
    entries: Tuple[Monomial, ...]
    canon_count: int
    products: Tuple[Monomial, ...] = ()
    _index: Dict[Tuple[int, ...], int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.entries = tuple(self.entries)
        self._index = {m.pairing: i + 1 for i, m in enumerate(self.entries)}

    @property
    def invars_count(self) -> int:
        return len(self.entries)

    def ids(self) -> List[InvariantId]:
        return [InvariantId(self.case, i) for i in range(1, len(self.entries) + 1)]

    def lookup(self, ident: InvariantId) -> Monomial:
        if ident.case != self.case or not 1 <= ident.index <= len(self.entries):
            raise UnknownInvariantError(f"Unknown invariant {ident}")
        return self.entries[ident.index - 1]

    def reverse_lookup(self, m: Monomial) -> InvariantId:
        if m.case != self.case:
            raise UnknownInvariantError(f"Monomial of case {m.case} looked up in table {self.case}")
        if m.pairing not in self._index:
            kind = "product" if is_product(m) else "non-canonical"
            raise UnknownInvariantError(f"No {kind} monomial of {self.case} is indexed")
        return InvariantId(self.case, self._index[m.pairing])

    def __len__(self) -> int:
        return len(self.entries)


def lookup(table: CaseTable, ident: InvariantId) -> Monomial:
    return table.lookup(ident)


def reverse_lookup(table: CaseTable, m: Monomial) -> InvariantId:
    return table.reverse_lookup(m)


def _zero_pairs(case: Case) -> set:
    """Slot pairs whose contraction vanishes by antisymmetry"""
    zero = set()
    for start in case.factor_offsets():
        zero.add((start, start + 1))
        zero.add((start + 2, start + 3))
    if case.dual:
        off = case.epsilon_offset
        zero.update((off + i, off + j) for i in range(4) for j in range(i + 1, 4))
    return zero


def canonical_monomials(case: Case, max_slots: int = DEFAULT_MAX_SLOTS) -> List[Monomial]:
    """Every distinct nonzero canonical monomial of a case, products included"""
    n_slots = case.n_slots
    if n_slots > max_slots:
        raise ResourceLimitError(f"Case {case} has {n_slots} slots, limit is {max_slots}")
    if n_slots % 2:
        raise MalformedInputError(f"Case {case} has an odd number of slots")

    boundaries = {stop: block + 1 for block, (_, stop) in enumerate(case.block_bounds())}
    zero = _zero_pairs(case)
    pairing = [-1] * n_slots
    open_slots: List[int] = []
    found: List[Monomial] = []
    stats = {"leaves": 0, "pruned": 0}

    def boundary_ok(next_slot: int) -> bool:
        blocks = boundaries.get(next_slot)
        if blocks is None or next_slot == n_slots:
            return True
        if prefix_is_minimal(case, pairing, blocks):
            return True
        stats["pruned"] += 1
        return False

    def extend(slot: int) -> None:
        if slot == n_slots:
            stats["leaves"] += 1
            current = tuple(pairing)
            canon, sign = canonical_pairing(case, current)
            if sign != 0 and canon == current:
                found.append(Monomial(case, current, 1))
            return
        for k, other in enumerate(list(open_slots)):
            if (other, slot) in zero:
                continue
            pairing[other], pairing[slot] = slot, other
            del open_slots[k]
            if boundary_ok(slot + 1):
                extend(slot + 1)
            open_slots.insert(k, other)
            pairing[other] = pairing[slot] = -1
        if len(open_slots) + 1 <= n_slots - slot - 1:
            open_slots.append(slot)
            if boundary_ok(slot + 1):
                extend(slot + 1)
            open_slots.pop()

    extend(0)
    logger.debug(f"{case}: {stats['leaves']} leaves, {stats['pruned']} prefixes pruned, {len(found)} canonical")
    return found


def sort_and_index(table: CaseTable) -> CaseTable:
    ordered = sorted(table.entries, key=sort_key)
    products = sorted(table.products, key=sort_key)
    return CaseTable(table.case, tuple(ordered), table.canon_count, tuple(products))


def enumerate_case(case: Case, max_slots: int = DEFAULT_MAX_SLOTS) -> CaseTable:
    monomials = canonical_monomials(case, max_slots)
    connected = [m for m in monomials if not is_product(m)]
    products = [m for m in monomials if is_product(m)]
    table = sort_and_index(CaseTable(case, tuple(connected), len(monomials), tuple(products)))
    logger.info(f"Enumerated {case}: canon {table.canon_count}, invars {table.invars_count}")
    return table


def random_monomial(case: Case, rng: np.random.Generator) -> Monomial:
    """Uniformly random matching of the case's slots"""
    slots = list(rng.permutation(case.n_slots))
    pairs = [(int(slots[i]), int(slots[i + 1])) for i in range(0, len(slots), 2)]
    return Monomial.from_pairs(case, pairs)

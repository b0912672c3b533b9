"""
Canonical forms of monomials under slot symmetries and dummy renaming.

The representative of a monomial is the lexicographically smallest
first-occurrence label sequence over its slot-symmetry orbit. Renaming
dummies never changes a label sequence, so the double coset collapses to
an orbit of matchings. The orbit is searched block by block (Riemann
heads, then epsilon), keeping every partial placement that attains the
minimal sequence so far; a placement reached with both signs proves the
monomial vanishes.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .monomial import Case, LinComb, Monomial, act, slot_symmetry_bsgs
from .permgroup import EPSILON_ELEMENTS, RIEMANN_ELEMENTS, SignedPermutation

logger = logging.getLogger(__name__)

# (inverse images, sign) per local element
_RIEMANN_LOCAL = tuple((e.inverse().images, e.sign) for e in RIEMANN_ELEMENTS)
_EPSILON_LOCAL = tuple((e.inverse().images, e.sign) for e in EPSILON_ELEMENTS)


@dataclass(frozen=True)
class DummyGroup:
    """Metric symmetry of each contracted pair and renaming of pairs"""
    n_pairs: int

    @property
    def degree(self) -> int:
        return 2 * self.n_pairs

    def order(self) -> int:
        return 2 ** self.n_pairs * factorial(self.n_pairs)

    def generators(self) -> List[SignedPermutation]:
        gens = []
        m = self.degree
        for k in range(self.n_pairs):
            gens.append(SignedPermutation.from_cycles(m, [(2 * k, 2 * k + 1)]))
        for k in range(self.n_pairs - 1):
            gens.append(SignedPermutation.from_cycles(m, [(2 * k, 2 * k + 2), (2 * k + 1, 2 * k + 3)]))
        return gens


def _search(case: Case, pairing: Sequence[int], n_targets: int, movable: int,
            track_signs: bool) -> Tuple[Tuple[int, ...], int]:
    """Minimal label sequence over the first n_targets blocks.

    Only blocks below `movable` may be placed. Returns the sequence and the
    sign it is reached with (0 when reached with both signs).
    """
    bounds = case.block_bounds()
    classes = [case.block_class(b) for b in range(len(bounds))]
    states: Dict[Tuple[int, frozenset], Tuple[Dict[int, int], int, int]] = {(0, frozenset()): ({}, 0, 1)}
    sequence: List[int] = []

    for target in range(n_targets):
        target_class = classes[target]
        local = _EPSILON_LOCAL if target_class == "eps" else _RIEMANN_LOCAL
        best: Optional[List[int]] = None
        children: Dict[Tuple[int, frozenset], Tuple[Dict[int, int], int, int]] = {}

        for (mask, _), (pending, next_label, sign) in states.items():
            for block in range(movable):
                if classes[block] != target_class or mask & (1 << block):
                    continue
                start, stop = bounds[block]
                width = stop - start
                for inv, elem_sign in local:
                    new_pending = dict(pending)
                    label = next_label
                    seq = []
                    smaller = best is None
                    aborted = False
                    for p in range(width):
                        orig = start + (inv[p] if p < 4 else p)
                        if orig in new_pending:
                            value = new_pending.pop(orig)
                        else:
                            value = label
                            label += 1
                            partner = pairing[orig]
                            if partner >= 0:
                                new_pending[partner] = value
                        if not smaller:
                            if value > best[p]:
                                aborted = True
                                break
                            if value < best[p]:
                                smaller = True
                        seq.append(value)
                    if aborted:
                        continue
                    if smaller:
                        best = seq
                        children = {}
                    child_sign = sign * elem_sign
                    key = (mask | (1 << block), frozenset(new_pending.items()))
                    if key in children:
                        if track_signs and children[key][2] != child_sign:
                            children[key] = (new_pending, label, 0)
                    else:
                        children[key] = (new_pending, label, child_sign)

        if best is None:
            return tuple(sequence), 0
        sequence.extend(best)
        states = children

    signs = {state[2] for state in states.values()}
    if not track_signs:
        return tuple(sequence), 1
    final_sign = signs.pop() if len(signs) == 1 else 0
    return tuple(sequence), final_sign


def _pairing_from_labels(labels: Sequence[int]) -> Tuple[int, ...]:
    first: Dict[int, int] = {}
    pairing = [0] * len(labels)
    for slot, label in enumerate(labels):
        if label in first:
            other = first[label]
            pairing[slot], pairing[other] = other, slot
        else:
            first[label] = slot
    return tuple(pairing)


def _canonical_uncached(case: Case, pairing: Tuple[int, ...]) -> Tuple[Tuple[int, ...], int]:
    labels, sign = _search(case, pairing, case.n_blocks, case.n_blocks, True)
    return _pairing_from_labels(labels), sign


_canonical = lru_cache(maxsize=200000)(_canonical_uncached)


def configure_cache(maxsize: int) -> None:
    global _canonical
    _canonical = lru_cache(maxsize=maxsize)(_canonical_uncached)
    logger.debug(f"Canonicalization cache size set to {maxsize}")


def cache_info():
    return _canonical.cache_info()


def canonicalize(m: Monomial) -> Monomial:
    """Canonical pairing with sign in {0, +1, -1} times the input sign"""
    pairing, sign = _canonical(m.case, m.pairing)
    return Monomial(m.case, pairing, m.sign * sign)


def canonical_pairing(case: Case, pairing: Tuple[int, ...]) -> Tuple[Tuple[int, ...], int]:
    return _canonical(case, tuple(pairing))


def prefix_labels(pairing: Sequence[int], stop: int) -> Tuple[int, ...]:
    """Label sequence of slots [0, stop); partner -1 means contracted outside"""
    labels: List[int] = []
    pending: Dict[int, int] = {}
    next_label = 0
    for slot in range(stop):
        if slot in pending:
            labels.append(pending.pop(slot))
            continue
        labels.append(next_label)
        if pairing[slot] >= 0:
            pending[pairing[slot]] = next_label
        next_label += 1
    return tuple(labels)


def prefix_is_minimal(case: Case, partial: Sequence[int], n_blocks: int) -> bool:
    """Whether the first n_blocks of a partial matching can still start a canonical form.

    Only symmetries moving these blocks among themselves are tried, which
    makes the test a safe pruning criterion.
    """
    stop = case.block_bounds()[n_blocks - 1][1]
    minimal, _ = _search(case, partial, n_blocks, n_blocks, False)
    return minimal == prefix_labels(partial, stop)


def canonicalize_lincomb(terms: Iterable[Tuple[Fraction, Monomial]]) -> LinComb:
    """Canonicalize each term and merge; keys are canonical monomials with sign 1"""
    result = LinComb()
    for coeff, monomial in terms:
        canon = canonicalize(monomial)
        if canon.sign == 0 or coeff == 0:
            continue
        result.add(canon.with_sign(1), Fraction(coeff) * canon.sign)
    return result


def brute_force_canonicalize(m: Monomial) -> Monomial:
    """Exhaustive minimisation over the whole slot-symmetry group (small cases only)"""
    best_labels = None
    signs = set()
    for s in slot_symmetry_bsgs(m.case).elements():
        image = act(m.with_sign(1), s)
        labels = image.labels()
        if best_labels is None or labels < best_labels:
            best_labels, signs = labels, {image.sign}
        elif labels == best_labels:
            signs.add(image.sign)
    sign = signs.pop() if len(signs) == 1 else 0
    return Monomial(m.case, _pairing_from_labels(best_labels), m.sign * sign)

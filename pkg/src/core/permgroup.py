"""
Signed permutation groups on a finite slot set.

A signed permutation moves slots and carries an explicit +1/-1 factor; a
group that contains the identity with sign -1 forces every object with
that symmetry to vanish. Groups are stored as a base and strong
generating set built by deterministic Schreier-Sims.

Slots are 0-based internally.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from .errors import MalformedInputError

logger = logging.getLogger(__name__)


class SignedPermutation:
    __slots__ = ("images", "sign")

    def __init__(self, images: Sequence[int], sign: int = 1):
        images = tuple(int(i) for i in images)
        if sorted(images) != list(range(len(images))):
            raise MalformedInputError(f"Not a bijection: {images}")
        if sign not in (1, -1):
            raise MalformedInputError(f"Sign must be +1 or -1, got {sign}")
        self.images: Tuple[int, ...] = images
        self.sign = sign

    @classmethod
    def identity(cls, degree: int) -> "SignedPermutation":
        return cls(range(degree), 1)

    @classmethod
    def from_cycles(cls, degree: int, cycles: Sequence[Sequence[int]], sign: int = 1) -> "SignedPermutation":
        images = list(range(degree))
        for cycle in cycles:
            for k, point in enumerate(cycle):
                images[point] = cycle[(k + 1) % len(cycle)]
        return cls(images, sign)

    @property
    def degree(self) -> int:
        return len(self.images)

    def __len__(self) -> int:
        return len(self.images)

    def __call__(self, slot: int) -> int:
        return self.images[slot]

    def apply_to(self, slot: int) -> int:
        return self.images[slot]

    def __mul__(self, other: "SignedPermutation") -> "SignedPermutation":
        """(self * other)(x) = self(other(x)); signs multiply"""
        if len(self) != len(other):
            raise MalformedInputError("Permutations act on different slot counts")
        return SignedPermutation([self.images[j] for j in other.images], self.sign * other.sign)

    def inverse(self) -> "SignedPermutation":
        inv = [0] * len(self.images)
        for i, image in enumerate(self.images):
            inv[image] = i
        return SignedPermutation(inv, self.sign)

    def negated(self) -> "SignedPermutation":
        return SignedPermutation(self.images, -self.sign)

    def is_unsigned_identity(self) -> bool:
        return all(i == image for i, image in enumerate(self.images))

    def is_identity(self) -> bool:
        return self.sign == 1 and self.is_unsigned_identity()

    def first_moved_point(self) -> Optional[int]:
        for i, image in enumerate(self.images):
            if i != image:
                return i
        return None

    def fixes(self, points: Sequence[int]) -> bool:
        return all(self.images[p] == p for p in points)

    def cycles(self) -> List[Tuple[int, ...]]:
        seen = set()
        result = []
        for start in range(len(self.images)):
            if start in seen or self.images[start] == start:
                continue
            cycle = [start]
            seen.add(start)
            point = self.images[start]
            while point != start:
                cycle.append(point)
                seen.add(point)
                point = self.images[point]
            result.append(tuple(cycle))
        return result

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SignedPermutation):
            return NotImplemented
        return self.images == other.images and self.sign == other.sign

    def __lt__(self, other: "SignedPermutation") -> bool:
        return (self.images, -self.sign) < (other.images, -other.sign)

    def __hash__(self) -> int:
        return hash((self.images, self.sign))

    def __repr__(self) -> str:
        body = "".join("(" + " ".join(str(p) for p in c) + ")" for c in self.cycles()) or "()"
        return ("-" if self.sign < 0 else "") + body


@dataclass(frozen=True)
class Membership:
    member: bool
    unsigned_member: bool
    both_signs: bool

    def __bool__(self) -> bool:
        return self.member


class SignedBSGS:
    """Base, strong generators and basic transversals of a signed group"""

    def __init__(self, degree: int, base: List[int], strong_generators: List[SignedPermutation],
                 transversals: List[Dict[int, SignedPermutation]], negative_identity: bool):
        self.degree = degree
        self.base = tuple(base)
        self.strong_generators = tuple(strong_generators)
        self.transversals = tuple(transversals)
        self.contains_negative_identity = negative_identity

    @property
    def basic_orbits(self) -> List[List[int]]:
        return [list(t.keys()) for t in self.transversals]

    def order(self) -> int:
        result = 2 if self.contains_negative_identity else 1
        for t in self.transversals:
            result *= len(t)
        return result

    def sift(self, g: SignedPermutation, start: int = 0) -> Tuple[SignedPermutation, int]:
        """Strip g through the levels; returns the residue and the level where it stopped"""
        for level in range(start, len(self.base)):
            beta = g(self.base[level])
            transversal = self.transversals[level]
            if beta not in transversal:
                return g, level
            g = transversal[beta].inverse() * g
        return g, len(self.base)

    def elements(self) -> Iterator[SignedPermutation]:
        identity = SignedPermutation.identity(self.degree)
        kernel = [identity, identity.negated()] if self.contains_negative_identity else [identity]
        choices = [list(t.values()) for t in self.transversals]
        for combo in itertools.product(*choices):
            element = identity
            for u in combo:
                element = element * u
            for k in kernel:
                yield element * k


def _transversal(base_point: int, generators: List[SignedPermutation], degree: int) -> Dict[int, SignedPermutation]:
    transversal = {base_point: SignedPermutation.identity(degree)}
    queue = [base_point]
    while queue:
        alpha = queue.pop(0)
        for s in generators:
            beta = s(alpha)
            if beta not in transversal:
                transversal[beta] = s * transversal[alpha]
                queue.append(beta)
    return transversal


def bsgs_build(generators: Sequence[SignedPermutation], degree: Optional[int] = None) -> SignedBSGS:
    """Deterministic Schreier-Sims for signed permutation groups"""
    generators = list(generators)
    if degree is None:
        if not generators:
            raise MalformedInputError("Slot count required when no generators are given")
        degree = len(generators[0])
    for g in generators:
        if len(g) != degree:
            raise MalformedInputError(f"Generator {g} acts on {len(g)} slots, expected {degree}")

    negative_identity = any(g.is_unsigned_identity() and g.sign < 0 for g in generators)
    strong: List[SignedPermutation] = []
    for g in generators:
        if not g.is_unsigned_identity() and g not in strong:
            strong.append(g)

    base: List[int] = []
    for g in strong:
        if g.fixes(base):
            base.append(g.first_moved_point())

    def level_generators(level: int) -> List[SignedPermutation]:
        return [s for s in strong if s.fixes(base[:level])]

    transversals = [_transversal(base[i], level_generators(i), degree) for i in range(len(base))]
    partial = SignedBSGS(degree, base, strong, transversals, negative_identity)

    level = len(base) - 1
    while level >= 0:
        failed_at = None
        gens_here = level_generators(level)
        transversal = transversals[level]
        for point in list(transversal.keys()):
            u_point = transversal[point]
            for s in gens_here:
                schreier = transversal[s(point)].inverse() * s * u_point
                residue, stop = partial.sift(schreier, level + 1)
                if stop == len(base) and residue.is_unsigned_identity():
                    if residue.sign < 0 and not negative_identity:
                        negative_identity = True
                    continue
                strong.append(residue)
                if stop == len(base):
                    base.append(residue.first_moved_point())
                failed_at = stop
                break
            if failed_at is not None:
                break
        if failed_at is None:
            level -= 1
            continue
        transversals = [_transversal(base[i], level_generators(i), degree) for i in range(len(base))]
        partial = SignedBSGS(degree, base, strong, transversals, negative_identity)
        level = failed_at

    result = SignedBSGS(degree, base, strong, transversals, negative_identity)
    logger.debug(f"BSGS on {degree} slots: base={result.base}, order={result.order()}")
    return result


def is_member(g: SignedPermutation, group: SignedBSGS) -> Membership:
    if len(g) != group.degree:
        raise MalformedInputError("Permutation and group act on different slot counts")
    residue, stop = group.sift(g)
    unsigned = stop == len(group.base) and residue.is_unsigned_identity()
    both = unsigned and group.contains_negative_identity
    member = unsigned and (residue.sign > 0 or group.contains_negative_identity)
    return Membership(member=member, unsigned_member=unsigned, both_signs=both)


def group_order(group: SignedBSGS) -> int:
    return group.order()


def riemann_generators(degree: int = 4, offset: int = 0) -> List[SignedPermutation]:
    """-(0 1), -(2 3) and (0 2)(1 3) on the four head slots starting at offset"""
    a, b, c, d = offset, offset + 1, offset + 2, offset + 3
    return [
        SignedPermutation.from_cycles(degree, [(a, b)], -1),
        SignedPermutation.from_cycles(degree, [(c, d)], -1),
        SignedPermutation.from_cycles(degree, [(a, c), (b, d)], 1),
    ]


def antisymmetric_generators(degree: int = 4, offset: int = 0, size: int = 4) -> List[SignedPermutation]:
    """Signed adjacent transpositions: the totally antisymmetric group"""
    return [SignedPermutation.from_cycles(degree, [(offset + k, offset + k + 1)], -1)
            for k in range(size - 1)]


def local_elements(generators: Sequence[SignedPermutation], degree: int) -> Tuple[SignedPermutation, ...]:
    """All elements of a small group, sorted for deterministic iteration"""
    return tuple(sorted(bsgs_build(generators, degree).elements()))


RIEMANN_ELEMENTS = local_elements(riemann_generators(), 4)
EPSILON_ELEMENTS = local_elements(antisymmetric_generators(), 4)

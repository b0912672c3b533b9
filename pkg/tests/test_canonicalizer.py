import time

import numpy as np
import pytest

from conftest import all_matchings
from core.canonicalizer import (brute_force_canonicalize, canonicalize, canonicalize_lincomb, prefix_is_minimal)
from core.enumerator import random_monomial
from core.monomial import Case, Factor, Monomial, act, slot_symmetry_bsgs


def test_ricci_scalar_sign():
    plus = Monomial.from_factors([Factor("R", ("a", "b", "a", "b"))])
    minus = Monomial.from_factors([Factor("R", ("a", "b", "b", "a"))])
    assert canonicalize(plus) == Monomial(Case((0,)), (2, 3, 0, 1), 1)
    assert canonicalize(minus) == Monomial(Case((0,)), (2, 3, 0, 1), -1)


def test_antisymmetric_contraction_is_zero():
    m = Monomial.from_factors([Factor("R", ("a", "a", "b", "b"))])
    assert canonicalize(m).sign == 0
    eps = Monomial.from_factors([Factor("R", ("a", "b", "c", "d"), ("e", "e")), Factor("eps", ("a", "b", "c", "d"))])
    assert canonicalize(eps).sign != 0


def test_canonicalize_keeps_input_scale():
    m = Monomial.from_factors([Factor("R", ("a", "b", "b", "a"))], sign=3)
    assert canonicalize(m).sign == -3


@pytest.mark.parametrize("case", [Case((0,)), Case((2,)), Case((0, 0)), Case((0,), True), Case((1, 1))])
def test_agrees_with_brute_force(case):
    for pairing in all_matchings(case.n_slots):
        m = Monomial(case, pairing)
        assert canonicalize(m) == brute_force_canonicalize(m), pairing


@pytest.mark.parametrize("case", [Case((0, 0, 0)), Case((0, 1, 3)), Case((1, 1), True)])
def test_invariant_under_slot_symmetries(case):
    rng = np.random.default_rng(5)
    elements = list(slot_symmetry_bsgs(case).elements())
    for _ in range(20):
        m = random_monomial(case, rng)
        expected = canonicalize(m)
        for k in rng.choice(len(elements), size=5):
            moved = act(m, elements[k])
            assert canonicalize(moved) == expected


def test_canonical_form_is_fixed_point():
    rng = np.random.default_rng(8)
    for _ in range(30):
        m = random_monomial(Case((0, 1, 1)), rng)
        canon = canonicalize(m)
        if canon.sign == 0:
            continue
        assert canonicalize(canon.with_sign(1)) == canon.with_sign(1)
        assert prefix_is_minimal(canon.case, canon.pairing, canon.case.n_blocks)


def test_lincomb_merges_equivalent_terms():
    comb = canonicalize_lincomb([
        (1, Monomial.from_factors([Factor("R", ("a", "b", "a", "b"))])),
        (2, Monomial.from_factors([Factor("R", ("b", "a", "b", "a"))])),
        (5, Monomial.from_factors([Factor("R", ("a", "a", "b", "b"))])),
    ])
    assert len(comb) == 1
    assert comb[Monomial(Case((0,)), (2, 3, 0, 1))] == 3


@pytest.mark.slow
def test_degree_seven_timing():
    case = Case((0,) * 7)
    rng = np.random.default_rng(31)
    timings = []
    for _ in range(1000):
        m = random_monomial(case, rng)
        started = time.perf_counter()
        canonicalize(m)
        timings.append(time.perf_counter() - started)
    assert float(np.median(timings)) < 0.1
    assert sum(1 for t in timings if t > 1.0) <= 5

from fractions import Fraction

import pytest
import sympy

from core.enumerator import InvariantId, enumerate_case
from core.errors import DependencyError, MalformedInputError
from core.monomial import Case, LinComb
from parsers.expression_parser import parse
from relations.generators import (RelationGenerator, dedupe, epsilon_pair_expansion, epsilon_self_contraction,
                                  permutation_sign)
from relations.reducer import normalized, reduce


def relation_rank(relations):
    columns = sorted({term for r in relations for term in r.terms.keys()}, key=str)
    matrix = sympy.Matrix([[sympy.Rational(r.terms[t].numerator, r.terms[t].denominator) for t in columns]
                           for r in relations])
    return matrix.rank()


def test_permutation_sign():
    assert permutation_sign((0, 1, 2, 3)) == 1
    assert permutation_sign((1, 0, 2, 3)) == -1
    assert permutation_sign((1, 2, 0)) == 1


def test_epsilon_contraction_values():
    assert epsilon_self_contraction(-1) == -24
    assert epsilon_self_contraction(1) == 24
    assert epsilon_self_contraction(-1, dimension=3) == 0


def test_epsilon_pair_expansion():
    terms = epsilon_pair_expansion(-1)
    assert len(terms) == 24
    assert dict(terms)[(0, 1, 2, 3)] == -1
    assert sum(coeff for _, coeff in terms) == 0


def test_missing_table_is_a_dependency_error():
    with pytest.raises(DependencyError) as info:
        RelationGenerator({}).cyclic_relations(InvariantId(Case((0,)), 1))
    assert info.value.missing_case == Case((0,))


def test_unknown_step(small_db):
    with pytest.raises(MalformedInputError):
        small_db.generator.relations_for("torsion", InvariantId(Case((0,)), 1))


@pytest.mark.parametrize("case", [Case((0, 0)), Case((2,)), Case((0,), True)])
def test_cyclic_rank_matches_pivots(small_db, case):
    generator = small_db.generator
    relations = dedupe(r for ident in small_db.tables[case].ids() for r in generator.cyclic_relations(ident))
    rulebase = reduce((r.terms for r in relations), "cyclic")
    assert len(rulebase) == (relation_rank(relations) if relations else 0)


def test_ricci_scalar_has_no_cyclic_relation(small_db):
    ident = InvariantId(Case((0,)), 1)
    assert small_db.generator.cyclic_relations(ident) == []


def test_dual_ricci_scalar_vanishes_by_cyclic_identity(small_db):
    ident = InvariantId(Case((0,), True), 1)
    relations = small_db.generator.cyclic_relations(ident)
    assert relations
    assert all(set(r.terms.keys()) == {ident} for r in relations)


def test_contracted_bianchi_relates_second_derivatives(small_db):
    generator = small_db.generator
    relations = [r for ident in small_db.tables[Case((2,))].ids() for r in generator.bianchi_relations(ident)]
    assert relations
    assert all(r.step == "bianchi" for r in relations)
    assert relation_rank(relations) == 1


def test_dimdep_needs_enough_slots(small_db):
    for ident in small_db.tables[Case((0, 0))].ids():
        assert small_db.generator.dimdep_relations(ident) == []


def test_dual_pair_relation_is_consistent_with_cyclic_rules(small_db):
    dual = InvariantId(Case((0,), True), 1)
    relation = small_db.generator.dual_pair_relations(dual, dual)
    assert relation.terms[(dual, dual)] == 1
    others = [t for t in relation.terms.keys() if t != (dual, dual)]
    assert others and all(isinstance(t, InvariantId) and t.case == Case((0, 0)) for t in others)
    assert small_db.rulebase.apply(relation.terms) == LinComb()
    with pytest.raises(MalformedInputError):
        small_db.generator.dual_pair_relations(InvariantId(Case((0,)), 1), dual)


def test_dedupe_drops_scaled_copies(small_db):
    relations = small_db.generator.cyclic_relations(InvariantId(Case((0, 0)), 3))
    doubled = relations + [type(r)(r.terms.scaled(Fraction(-2)), r.step) for r in relations]
    assert len(dedupe(doubled)) == len(dedupe(relations))


def test_quadratic_cyclic_relation_coefficients(small_db):
    generator = small_db.generator
    relations = dedupe(r for ident in small_db.tables[Case((0, 0))].ids() for r in generator.cyclic_relations(ident))
    i2, i3 = InvariantId(Case((0, 0)), 2), InvariantId(Case((0, 0)), 3)
    assert [normalized(r.terms) for r in relations] == [((i3, Fraction(1)), (i2, Fraction(-1, 2)))]
    written = generator.combine(parse("R[a,b,c,d] * R[-a,-c,-b,-d] - 1/2 R[a,b,c,d] * R[-a,-b,-c,-d]"))
    assert normalized(written) == normalized(relations[0].terms)


@pytest.fixture(scope="module")
def cubic_generator():
    cases = [Case((0,)), Case((0, 0)), Case((2,)), Case((0, 0, 0)), Case((0, 2))]
    return RelationGenerator({case: enumerate_case(case) for case in cases})


def test_commutator_relation_content(cubic_generator):
    # [D_a, D_d] on the Ricci factor: two curvature corrections, one per free slot
    written = cubic_generator.combine(parse(
        "Ricci[b,d] * CD[a][CD[-d][Ricci[-a,-b]]] - Ricci[b,d] * CD[-d][CD[a][Ricci[-a,-b]]]"
        " - Ricci[b,d] * Ricci[-d,e] * Ricci[-e,-b] - Ricci[b,d] * Ricci[a,e] * R[-a,-d,-b,-e]"))
    assert len(written) == 4
    outer, _ = cubic_generator.resolve(parse("Ricci[b,d] * CD[a][CD[-d][Ricci[-a,-b]]]")[0][1])
    relations = dedupe(cubic_generator.commutation_relations(outer))
    assert normalized(written) in [normalized(r.terms) for r in relations]


MIXED_CYCLIC_RELATIONS = [
    ("2 * R[a,b,c,d] * CD[-e][R[-a,e,f,g]] * CD[-d][CD[-g][CD[-h][R[-b,-c,-f,h]]]]"
     " + R[a,b,c,d] * CD[-e][R[-a,e,f,g]] * CD[-b][CD[-g][CD[-h][R[-c,-d,-f,h]]]]", [1, 2]),
    ("R[a,b,c,d] * CD[-e][R[-a,e,f,g]] * CD[-d][CD[-g][CD[-h][R[-b,-c,-f,h]]]]"
     " - R[a,b,c,d] * CD[-e][R[-a,e,f,g]] * CD[-d][CD[-g][CD[-h][R[-b,-f,-c,h]]]]"
     " + R[a,b,c,d] * CD[-e][R[-a,e,f,g]] * CD[-d][CD[-g][CD[-h][R[-b,h,-c,-f]]]]", [1, 1, 1]),
    ("R[a,b,c,d] * CD[-e][R[-a,e,f,g]] * CD[-d][CD[-g][CD[-h][R[-b,-c,-f,h]]]]"
     " + R[a,b,c,d] * CD[-f][R[-a,e,f,g]] * CD[-d][CD[-e][CD[-h][R[-b,-c,-g,h]]]]"
     " - R[a,b,c,d] * CD[-f][R[-a,e,f,g]] * CD[-d][CD[-g][CD[-h][R[-b,-c,-e,h]]]]", [1, 1, 1]),
]


@pytest.mark.slow
def test_mixed_derivative_cyclic_relations():
    table = enumerate_case(Case((0, 1, 3)))
    generator = RelationGenerator({table.case: table})
    entry, _ = generator.resolve(parse(
        "R[a,b,c,d] * CD[-e][R[-a,e,f,g]] * CD[-d][CD[-g][CD[-h][R[-b,-c,-f,h]]]]")[0][1])
    relations = generator.cyclic_relations(entry)
    rank = relation_rank(relations)
    for text, pattern in MIXED_CYCLIC_RELATIONS:
        written = generator.combine(parse(text))
        smallest = min(abs(c) for _, c in written.items())
        assert sorted(abs(c) / smallest for _, c in written.items()) == pattern
        assert relation_rank(relations + [type(relations[0])(written, "cyclic")]) == rank

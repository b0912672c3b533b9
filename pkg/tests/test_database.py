import json
import shutil
from fractions import Fraction

import pytest

from core.enumerator import InvariantId
from core.errors import (CorruptDatabaseError, DatabaseError, MalformedInputError, ResourceLimitError,
                         UnsupportedCaseError, VersionMismatchError)
from core.monomial import Case, LinComb
from engine_config import EngineSettings
from parsers.expression_parser import format_id_combination, parse
from storage.database import (InvariantDatabase, format_rule, parse_rule, parse_term, planned_cases, read_rules,
                              read_table, write_rules, write_table)

SMALL_COUNTS = {
    "nondual/0": {"Canon": 1, "Invars": 1, "Cyclic": 1, "Bianchi": 1, "Commute": 1, "4D": 1, "Duals": 1},
    "nondual/0_0": {"Canon": 4, "Invars": 3, "Cyclic": 2, "Bianchi": 2, "Commute": 2, "4D": 2, "Duals": 2},
    "nondual/2": {"Canon": 2, "Invars": 2, "Cyclic": 2, "Bianchi": 1, "Commute": 1, "4D": 1, "Duals": 1},
    "dual/0": {"Canon": 1, "Invars": 1, "Cyclic": 0, "Bianchi": 0, "Commute": 0, "4D": 0},
}

# (case, Canon, Invars, Cyclic, Bianchi, Commute, 4D, Duals)
ORDER_SIX_COUNTS = [
    ((0, 0, 0), 13, 9, 5, 5, 5, 3, 3),
    ((0, 2), 14, 12, 9, 5, 3, 3, 3),
    ((1, 1), 12, 12, 9, 4, 4, 4, 4),
    ((4,), 12, 12, 11, 6, 1, 1, 1),
]

# dual cases have no Duals column
ORDER_SIX_DUAL_COUNTS = [
    ((0,), 1, 1, 0, 0, 0, 0),
    ((0, 0), 5, 4, 1, 1, 1, 1),
    ((2,), 3, 3, 0, 0, 0, 0),
    ((0, 0, 0), 35, 27, 6, 6, 6, 2),
    ((0, 2), 63, 58, 13, 5, 1, 1),
    ((1, 1), 36, 36, 9, 2, 2, 2),
    ((4,), 32, 32, 11, 4, 0, 0),
]

ORDER_EIGHT_COUNTS = [
    ((0, 0, 0, 0), 57, 38, 15, 15, 15, 4, 3),
    ((0, 0, 2), 119, 99, 48, 27, 15, 10, 10),
    ((0, 1, 1), 137, 125, 63, 23, 23, 17, 17),
    ((0, 4), 138, 126, 84, 47, 3, 3, 3),
    ((1, 3), 138, 138, 95, 32, 5, 5, 5),
    ((2, 2), 89, 86, 59, 23, 7, 7, 7),
    ((6,), 105, 105, 90, 50, 1, 1, 1),
]


def copy_db(db, tmp_path):
    target = tmp_path / "copy"
    shutil.copytree(db.root, target)
    return target


def test_planned_cases():
    assert planned_cases(4, False, 4) == [Case((0,)), Case((0, 0)), Case((2,)), Case((0,), True)]
    assert Case((0, 0), True) in planned_cases(4, True, 4)
    assert not any(c.dual for c in planned_cases(6, True, 3))


def test_small_counts(small_db):
    assert small_db.manifest["counts"] == SMALL_COUNTS
    assert small_db.counts(Case((0, 0)), "Cyclic") == 2
    assert small_db.counts(Case((2,)))["Bianchi"] == 1
    with pytest.raises(UnsupportedCaseError):
        small_db.counts(Case((0, 0, 0)))
    with pytest.raises(MalformedInputError):
        small_db.counts(Case((0,), True), "Duals")


def test_layout_and_table_format(small_db):
    root = small_db.root
    assert (root / "manifest.json").exists()
    assert (root / "nondual/0_0/Cyclic.rules").exists()
    assert (root / "nondual/2/Bianchi.rules").exists()
    assert (root / "dual/0/Cyclic.rules").exists()
    lines = (root / "nondual/0/table.inv").read_text(encoding="utf-8").splitlines()
    assert lines == ["# invariant table", "# format 2", "# case {0}", "# canon 1", "# invars 1",
                     "I[0:1]\t0:2 1:3\t1\tR"]


def test_rules_file_format(small_db):
    lines = (small_db.root / "nondual/0_0/Cyclic.rules").read_text(encoding="utf-8").splitlines()
    assert lines[:3] == ["# Cyclic rules", "# case {0,0}", "# mode nonexpanded"]
    rules = [line for line in lines if not line.startswith("#")]
    assert len(rules) == 1
    pivot, rhs = parse_rule(rules[0])
    assert pivot.case == Case((0, 0))
    assert all(t.case == Case((0, 0)) and t.index < pivot.index for t in rhs.keys())
    dual_lines = (small_db.root / "dual/0/Cyclic.rules").read_text(encoding="utf-8").splitlines()
    assert dual_lines[-1] == "I*[0:1]"


def test_rule_text_round_trip():
    a, r0 = InvariantId(Case((0, 0)), 3), InvariantId(Case((0,)), 1)
    rhs = LinComb({InvariantId(Case((0, 0)), 1): Fraction(-1, 2), (r0, r0): 2, (): 1})
    line = format_rule(a, rhs)
    assert line == "I[0,0:3]\t-1/2 I[0,0:1]\t2 I[0:1]*I[0:1]\t1 1"
    assert parse_rule(line) == (a, rhs)
    assert parse_term("I[0:1]*I*[0:1]") == (r0, InvariantId(Case((0,), True), 1))
    assert parse_term("I*[0,0:2]") == InvariantId(Case((0, 0), True), 2)
    with pytest.raises(MalformedInputError):
        parse_term("I[0:1]**I[0:1]")


def test_dual_product_rules_survive_a_file_round_trip(tmp_path):
    pivot = InvariantId(Case((0, 0, 0, 0)), 5)
    d1 = InvariantId(Case((0, 0), True), 1)
    rhs = LinComb({InvariantId(Case((0, 0, 0, 0)), 1): Fraction(1, 2), (d1, d1): Fraction(-1, 24)})
    dual_pivot = InvariantId(Case((0, 0), True), 3)
    dual_rhs = LinComb({InvariantId(Case((0, 0), True), 2): Fraction(1, 2)})
    path = tmp_path / "Duals.rules"
    write_rules(path, pivot.case, "dual", [(pivot, rhs), (dual_pivot, dual_rhs)], "nonexpanded")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[-2] == "I[0,0,0,0:5]\t1/2 I[0,0,0,0:1]\t-1/24 I*[0,0:1]*I*[0,0:1]"
    assert lines[-1] == "I*[0,0:3]\t1/2 I*[0,0:2]"
    assert read_rules(path) == [(pivot, rhs), (dual_pivot, dual_rhs)]


def test_table_pairs_and_sign_round_trip(small_db, tmp_path):
    table = small_db.tables[Case((0, 0))]
    path = tmp_path / "table.inv"
    write_table(path, table)
    assert read_table(path, Case((0, 0))).entries == table.entries
    text = path.read_text(encoding="utf-8").replace("# format 2", "# format 1")
    path.write_text(text, encoding="utf-8")
    with pytest.raises(VersionMismatchError):
        read_table(path, Case((0, 0)))


def test_load_round_trip(small_db):
    loaded = InvariantDatabase.load(str(small_db.root))
    assert loaded.manifest["counts"] == SMALL_COUNTS
    assert loaded.rulebase.rules == small_db.rulebase.rules
    assert loaded.rulebase.pivot_step == small_db.rulebase.pivot_step
    for case, table in small_db.tables.items():
        assert loaded.tables[case].entries == table.entries


def test_simplify_cyclic_identity(small_db):
    comb = small_db.to_id_combination(parse("R[a,b,c,d]*R[-a,-c,-b,-d] - 1/2*R[a,b,c,d]*R[-a,-b,-c,-d]"))
    assert comb
    result, passes = small_db.simplify(comb)
    assert result == LinComb()
    assert passes >= 1
    assert format_id_combination(result) == "0"


def test_simplify_keeps_products(small_db):
    comb = small_db.to_id_combination(parse("R * R + 2 * eps[a,b,c,d] * R[-a,-b,-c,-d] * R"))
    result, _ = small_db.simplify(comb)
    r0 = InvariantId(Case((0,)), 1)
    assert result == LinComb({(r0, r0): 1})


def test_unsupported_order(small_db):
    with pytest.raises(UnsupportedCaseError):
        small_db.to_id_combination(parse("CD[a]@CD[b]@R * CD[-a]@CD[-b]@R"))


def test_products_of_covered_factors_resolve(small_db):
    r0 = InvariantId(Case((0,)), 1)
    comb = small_db.to_id_combination(parse("R * R * R"))
    assert comb == LinComb({(r0, r0, r0): 1})
    assert small_db.simplify(comb)[0] == comb
    ricci_squared = InvariantId(Case((0, 0)), 1)
    mixed = small_db.to_id_combination(parse("2 * R * Ricci[a,b] * Ricci[-a,-b]"))
    assert mixed == LinComb({(r0, ricci_squared): 2})


def test_expanded_mode_simplifies_identically(small_db, tmp_path):
    settings = EngineSettings(db_path=str(tmp_path), mode="expanded")
    expanded = InvariantDatabase(str(tmp_path), settings)
    expanded.build(4)
    assert expanded.manifest["counts"] == SMALL_COUNTS
    header = (tmp_path / "nondual/0_0/Cyclic.rules").read_text(encoding="utf-8").splitlines()[2]
    assert header == "# mode expanded"
    text = "CD[a][CD[b][R[-a,c,-b,-c]]] + R[a,b,c,d]*R[-a,-c,-b,-d] + Ricci[a,b]*Ricci[-a,-b]"
    expected, _ = small_db.simplify(small_db.to_id_combination(parse(text)))
    loaded = InvariantDatabase.load(str(tmp_path))
    result, _ = loaded.simplify(loaded.to_id_combination(parse(text)))
    assert result == expected
    assert len(expected) == 3


def test_rebuild_is_deterministic_and_resumable(small_db, tmp_path):
    fresh = InvariantDatabase(str(tmp_path), EngineSettings(db_path=str(tmp_path), workers=2))
    fresh.build(4)
    assert fresh.manifest["files"] == small_db.manifest["files"]
    resumed = InvariantDatabase(str(tmp_path), EngineSettings(db_path=str(tmp_path)))
    resumed.build(4)
    assert resumed.manifest == fresh.manifest


def test_checksum_mismatch(small_db, tmp_path):
    root = copy_db(small_db, tmp_path)
    with open(root / "nondual/0_0/Cyclic.rules", "a", encoding="utf-8") as f:
        f.write("# touched\n")
    with pytest.raises(CorruptDatabaseError):
        InvariantDatabase.load(str(root))


def test_version_mismatch(small_db, tmp_path):
    root = copy_db(small_db, tmp_path)
    manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
    manifest["format_version"] = 99
    (root / "manifest.json").write_text(json.dumps(manifest), encoding="utf-8")
    with pytest.raises(VersionMismatchError):
        InvariantDatabase.load(str(root))


def test_missing_database(tmp_path):
    with pytest.raises(DatabaseError):
        InvariantDatabase.load(str(tmp_path / "nowhere"))


def test_build_argument_checks(settings):
    db = InvariantDatabase(settings.db_path, settings)
    with pytest.raises(MalformedInputError):
        db.build(3)
    settings.dimension = 3
    with pytest.raises(UnsupportedCaseError):
        InvariantDatabase(settings.db_path, settings).build(4, dual=True)


def test_memory_limit(settings):
    settings.max_memory_mb = 1
    with pytest.raises(ResourceLimitError):
        InvariantDatabase(settings.db_path, settings).build(2)


def test_three_dimensional_build(settings):
    settings.dimension = 3
    counts = InvariantDatabase(settings.db_path, settings).build(4)
    assert "dual/0" not in counts
    assert "Duals" not in counts["nondual/0_0"]
    # the Gauss-Bonnet combination vanishes identically in three dimensions
    assert counts["nondual/0_0"]["4D"] == 1


COLUMNS = ("Canon", "Invars", "Cyclic", "Bianchi", "Commute", "4D", "Duals")


def column_values(counts, kind, lambdas):
    values = counts[f"{kind}/" + "_".join(str(x) for x in lambdas)]
    return [values[c] for c in COLUMNS if c in values]


@pytest.fixture(scope="module")
def order_six_dual_db(tmp_path_factory):
    root = tmp_path_factory.mktemp("order6dual")
    db = InvariantDatabase(str(root), EngineSettings(db_path=str(root)))
    db.build(6, dual=True)
    return db


@pytest.mark.slow
def test_order_six_counts(order_six_dual_db):
    counts = order_six_dual_db.manifest["counts"]
    for lambdas, *expected in ORDER_SIX_COUNTS:
        assert column_values(counts, "nondual", lambdas) == expected, lambdas


@pytest.mark.slow
def test_order_six_dual_counts(order_six_dual_db):
    counts = order_six_dual_db.manifest["counts"]
    for lambdas, *expected in ORDER_SIX_DUAL_COUNTS:
        assert column_values(counts, "dual", lambdas) == expected, lambdas


@pytest.mark.slow
def test_order_six_dual_database_loads(order_six_dual_db):
    loaded = InvariantDatabase.load(str(order_six_dual_db.root))
    assert loaded.manifest["counts"] == order_six_dual_db.manifest["counts"]
    assert loaded.rulebase.rules == order_six_dual_db.rulebase.rules
    dual_rhs = [rhs for pivot, rhs in loaded.rulebase.rules.items() if pivot.case.dual and rhs]
    assert dual_rhs
    r0 = InvariantId(Case((0,)), 1)
    comb = loaded.to_id_combination(parse("R * R * R - R[a,b,c,d]*R[-a,-c,-b,-d]*R + 1/2*R[a,b,c,d]*R[-a,-b,-c,-d]*R"))
    assert loaded.simplify(comb)[0] == LinComb({(r0, r0, r0): 1})


@pytest.mark.slow
def test_order_six_rules_vanish_on_quartic_jets(order_six_dual_db):
    report = order_six_dual_db.verify([11, 23, 37], max_deriv=4)
    assert report["failures"] == []
    assert report["checked"] > 0


@pytest.mark.slow
def test_order_eight_counts(tmp_path):
    counts = InvariantDatabase(str(tmp_path), EngineSettings(db_path=str(tmp_path))).build(8)
    for lambdas, *expected in ORDER_EIGHT_COUNTS:
        assert column_values(counts, "nondual", lambdas) == expected, lambdas
    rows = [column_values(counts, "nondual", lambdas) for lambdas, *_ in ORDER_EIGHT_COUNTS]
    # independent after the commutation step, summed over the stratum
    assert sum(row[4] for row in rows) == 69
    assert InvariantDatabase.load(str(tmp_path)).manifest["counts"] == counts

"""
Invariant database: build, persist, load, count, simplify, verify.

Layout under the database root:

    manifest.json                       format version, parameters, counts, sha256 per file
    nondual/<case>/table.inv            canonical invariants of a case, index order
    nondual/<case>/<Step>.rules         pivots of that case eliminated by a step
    dual/<case>/...                     same for dual cases

Steps run strictly in order (Cyclic, Bianchi, Commute, 4D, Duals), each
over order strata ascending and cases degree-descending within a stratum.
A (step, stratum) unit whose rule files all exist is reloaded instead of
regenerated, so an interrupted build resumes where it stopped.
"""

import hashlib
import json
import logging
import re
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import psutil

from core.canonicalizer import canonicalize_lincomb, configure_cache
from core.enumerator import CaseTable, InvariantId, enumerate_case, parse_invariant_id
from core.errors import (CorruptDatabaseError, DatabaseError, DependencyError, InvariantEngineError,
                         MalformedInputError, ResourceLimitError, UnknownInvariantError, UnsupportedCaseError,
                         VersionMismatchError)
from core.monomial import Case, LinComb, Monomial, cases_of_order, parse_case
from engine_config import EngineSettings
from oracle.jet_evaluator import JetEvaluator, JetMetric, curvature_jet
from parsers.expression_parser import format_monomial
from relations.generators import RelationGenerator, dedupe
from relations.reducer import STEP_TAGS, RuleBase, StepCounts, Term, order_key

logger = logging.getLogger(__name__)

FORMAT_VERSION = 2
MANIFEST_NAME = "manifest.json"
TABLE_NAME = "table.inv"
RELATION_STEPS = ("cyclic", "bianchi", "commute", "dimdep")


def case_dir(case: Case) -> str:
    return f"{'dual' if case.dual else 'nondual'}/{case.label}"


def rules_file(case: Case, step: str) -> str:
    return f"{case_dir(case)}/{STEP_TAGS[step]}.rules"


def table_file(case: Case) -> str:
    return f"{case_dir(case)}/{TABLE_NAME}"


def planned_cases(max_order: int, dual: bool, dimension: int) -> List[Case]:
    """Nondual cases up to max_order; dual ones (4 dimensions only) up to max_order, or max_order-2 for products"""
    cases: List[Case] = []
    for order in range(2, max_order + 1, 2):
        cases.extend(cases_of_order(order, False))
    if dimension == 4:
        dual_max = max_order if dual else max_order - 2
        for order in range(2, dual_max + 1, 2):
            cases.extend(cases_of_order(order, True))
    return cases


# ---------------------------------------------------------------- text formats

def format_term(term: Term) -> str:
    if isinstance(term, InvariantId):
        return str(term)
    return "*".join(str(t) for t in term) if term else "1"


_TERM_ID = re.compile(r"I\*?\[[^\]]*\]")


def parse_term(text: str) -> Term:
    """`1`, an id, or ids joined by `*` (dual ids carry their own star)"""
    if text == "1":
        return ()
    pieces = _TERM_ID.findall(text)
    if not pieces or "*".join(pieces) != text:
        raise MalformedInputError(f"Not a term: {text!r}")
    parts = [parse_invariant_id(p) for p in pieces]
    return parts[0] if len(parts) == 1 else tuple(sorted(parts, key=order_key))


def format_rule(pivot: InvariantId, rhs: LinComb) -> str:
    fields = [str(pivot)]
    for term, coeff in sorted(rhs.items(), key=lambda kv: order_key(kv[0]), reverse=True):
        fields.append(f"{coeff} {format_term(term)}")
    return "\t".join(fields)


def parse_rule(line: str) -> Tuple[InvariantId, LinComb]:
    fields = line.rstrip("\n").split("\t")
    pivot = parse_invariant_id(fields[0])
    rhs = LinComb()
    for field_text in fields[1:]:
        coeff, _, term = field_text.partition(" ")
        rhs.add(parse_term(term), Fraction(coeff))
    return pivot, rhs


def format_pairs(m: Monomial) -> str:
    return " ".join(f"{slot}:{partner}" for slot, partner in enumerate(m.pairing) if slot < partner)


def parse_pairs(case: Case, text: str, sign: Fraction) -> Monomial:
    pairs = []
    for pair in text.split():
        left, _, right = pair.partition(":")
        a, b = int(left), int(right)
        if not (0 <= a < case.n_slots and 0 <= b < case.n_slots):
            raise MalformedInputError(f"Slot pair {pair!r} out of range for {case}")
        pairs.append((a, b))
    return Monomial.from_pairs(case, pairs, sign)


def write_table(path: Path, table: CaseTable) -> None:
    lines = [
        "# invariant table",
        f"# format {FORMAT_VERSION}",
        f"# case {table.case}",
        f"# canon {table.canon_count}",
        f"# invars {table.invars_count}",
    ]
    for ident, m in zip(table.ids(), table.entries):
        lines.append(f"{ident}\t{format_pairs(m)}\t{m.sign}\t{format_monomial(m)}")
    _write_lines(path, lines)


def read_table(path: Path, case: Case) -> CaseTable:
    canon = version = None
    entries: List[Monomial] = []
    try:
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                if line.startswith("# canon "):
                    canon = int(line.split()[2])
                    continue
                if line.startswith("# format "):
                    version = int(line.split()[2])
                    if version != FORMAT_VERSION:
                        raise VersionMismatchError(f"{path}: table format {version}, expected {FORMAT_VERSION}")
                    continue
                if line.startswith("#") or not line.strip():
                    continue
                ident_text, pairs, sign, _ = line.rstrip("\n").split("\t")
                ident = parse_invariant_id(ident_text)
                if ident.case != case or ident.index != len(entries) + 1:
                    raise CorruptDatabaseError(f"{path}: unexpected entry {ident_text}")
                entries.append(parse_pairs(case, pairs, Fraction(sign)))
    except (ValueError, InvariantEngineError) as e:
        if isinstance(e, (CorruptDatabaseError, VersionMismatchError)):
            raise
        raise CorruptDatabaseError(f"{path}: {e}")
    if version is None:
        raise CorruptDatabaseError(f"{path}: missing format line")
    if canon is None:
        raise CorruptDatabaseError(f"{path}: missing canon count")
    return CaseTable(case, tuple(entries), canon)


def write_rules(path: Path, case: Case, step: str, rules: Sequence[Tuple[InvariantId, LinComb]], mode: str) -> None:
    lines = [f"# {STEP_TAGS[step]} rules", f"# case {case}", f"# mode {mode}"]
    lines.extend(format_rule(pivot, rhs) for pivot, rhs in rules)
    _write_lines(path, lines)


def read_rules(path: Path) -> List[Tuple[InvariantId, LinComb]]:
    rules = []
    try:
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                if line.startswith("#") or not line.strip():
                    continue
                rules.append(parse_rule(line))
    except (ValueError, InvariantEngineError) as e:
        raise CorruptDatabaseError(f"{path}: {e}")
    return rules


def _write_lines(path: Path, lines: Iterable[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for line in lines:
            f.write(line + "\n")


def sha256_of(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _enumerate_worker(args: Tuple[Case, int, int]) -> CaseTable:
    case, max_slots, cache = args
    configure_cache(cache)
    return enumerate_case(case, max_slots)


# ---------------------------------------------------------------- database

class InvariantDatabase:
    def __init__(self, root: str, settings: Optional[EngineSettings] = None):
        self.logger = logging.getLogger(__name__)
        self.root = Path(root)
        self.settings = settings or EngineSettings()
        self.dimension = self.settings.dimension
        self.signature = self.settings.signature
        self.mode = self.settings.mode
        self.max_order = 0
        self.dual = False
        self.tables: Dict[Case, CaseTable] = {}
        self.rulebase = RuleBase()
        self.manifest: Dict[str, Any] = {}

    @property
    def generator(self) -> RelationGenerator:
        return RelationGenerator(self.tables, self.dimension, self.signature)

    # ------------------------------------------------------------ build

    def build(self, max_order: int, dual: bool = False, resume: bool = True) -> Dict[str, Dict[str, int]]:
        if max_order < 2 or max_order % 2:
            raise MalformedInputError(f"Maximal order must be an even number >= 2, got {max_order}")
        if dual and self.dimension != 4:
            raise UnsupportedCaseError("Dual invariants need dimension 4")
        started = time.perf_counter()
        self.max_order, self.dual = max_order, dual
        self.root.mkdir(parents=True, exist_ok=True)
        cases = planned_cases(max_order, dual, self.dimension)
        self.logger.info(f"Building order <= {max_order} ({len(cases)} cases, dimension {self.dimension}, "
                         f"signature {self.signature}, {self.mode})")

        self._build_tables(cases, resume)
        strata = sorted({case.order for case in cases})
        for step in RELATION_STEPS:
            for order in strata:
                stratum = [case for case in cases if case.order == order]
                self._run_unit(step, order, stratum, resume)
        if self.dimension == 4:
            for order in strata:
                stratum = [case for case in cases if case.order == order and not case.dual]
                self._run_unit("dual", order, stratum, resume)

        self.save()
        self.logger.info(f"Database built in {time.perf_counter() - started:.1f}s: {len(self.rulebase)} rules")
        return self.manifest["counts"]

    def _build_tables(self, cases: List[Case], resume: bool) -> None:
        missing = []
        for case in cases:
            path = self.root / table_file(case)
            if resume and path.exists():
                self.tables[case] = read_table(path, case)
                self.logger.info(f"Reusing table {case} ({self.tables[case].invars_count} invariants)")
            else:
                missing.append(case)
        if self.settings.workers > 1 and len(missing) > 1:
            args = [(case, self.settings.max_slots, self.settings.canon_cache) for case in missing]
            with ProcessPoolExecutor(max_workers=self.settings.workers) as pool:
                built = list(pool.map(_enumerate_worker, args))
        else:
            built = [enumerate_case(case, self.settings.max_slots) for case in missing]
        for table in built:
            self.tables[table.case] = table
            write_table(self.root / table_file(table.case), table)
            self._check_memory()

    def _relations(self, step: str, order: int, stratum: List[Case]):
        generator = self.generator
        if step == "dual":
            yield from self._dual_relations(generator, order)
            return
        for case in stratum:
            relations = []
            for ident in self.tables[case].ids():
                relations.extend(generator.relations_for(step, ident))
            self.logger.debug(f"{STEP_TAGS[step]} {case}: {len(relations)} relations")
            yield from dedupe(relations)

    def _dual_relations(self, generator: RelationGenerator, order: int):
        basis = []
        for case, table in self.tables.items():
            if case.dual:
                basis.extend(ident for ident in table.ids() if ident not in self.rulebase)
        basis.sort(key=order_key)
        for i, a in enumerate(basis):
            for b in basis[i:]:
                if a.case.order + b.case.order == order:
                    yield generator.dual_pair_relations(a, b)

    def _run_unit(self, step: str, order: int, stratum: List[Case], resume: bool) -> None:
        paths = {case: self.root / rules_file(case, step) for case in stratum}
        if resume and stratum and all(p.exists() for p in paths.values()):
            loaded = 0
            for path in paths.values():
                for pivot, rhs in read_rules(path):
                    self.rulebase.set_rule(pivot, rhs, step)
                    loaded += 1
            self.logger.info(f"{STEP_TAGS[step]} order {order}: reused {loaded} rules")
            return

        before = set(self.rulebase.rules)
        for relation in self._relations(step, order, stratum):
            self.rulebase.add_relation(relation.terms, step)
        added = [p for p in self.rulebase.pivots(step) if p not in before]
        touched = set(stratum) | {p.case for p in added}
        for case in sorted(touched):
            self._write_case_rules(case, step)
        self.logger.info(f"{STEP_TAGS[step]} order {order}: {len(added)} new rules")
        self._check_memory()

    def _write_case_rules(self, case: Case, step: str) -> None:
        pivots = sorted((p for p in self.rulebase.pivots(step) if p.case == case), key=order_key)
        if self.mode == "expanded":
            rules = [(p, self.rulebase.expanded_rule(p)) for p in pivots]
        else:
            rules = [(p, self.rulebase.rules[p]) for p in pivots]
        write_rules(self.root / rules_file(case, step), case, step, rules, self.mode)

    def _check_memory(self) -> None:
        limit = self.settings.max_memory_mb
        if limit <= 0:
            return
        rss = psutil.Process().memory_info().rss / (1024 * 1024)
        if rss > limit:
            raise ResourceLimitError(f"Resident memory {rss:.0f} MB exceeds limit {limit} MB; rerun to resume")

    # ------------------------------------------------------------ counts

    def case_counts(self, case: Case) -> Dict[str, int]:
        table = self.tables[case]
        with_duals = self.dimension == 4
        return StepCounts.compute(case, table.canon_count, table.invars_count, self.rulebase, with_duals).values

    def counts(self, case: Case, column: Optional[str] = None):
        key = case_dir(case)
        all_counts = self.manifest.get("counts", {})
        if key not in all_counts:
            raise UnsupportedCaseError(f"Case {case} is not in the database (order <= {self.max_order})")
        values = all_counts[key]
        if column is None:
            return values
        if column not in values:
            raise MalformedInputError(f"No {column} column for case {case}")
        return values[column]

    # ------------------------------------------------------------ persistence

    def save(self) -> None:
        files = {}
        for case in sorted(self.tables):
            candidates = [table_file(case)] + [rules_file(case, step) for step in STEP_TAGS]
            for rel in candidates:
                path = self.root / rel
                if path.exists():
                    files[rel] = sha256_of(path)
        self.manifest = {
            "format_version": FORMAT_VERSION,
            "dimension": self.dimension,
            "signature": self.signature,
            "mode": self.mode,
            "max_order": self.max_order,
            "dual": self.dual,
            "counts": {case_dir(case): self.case_counts(case) for case in sorted(self.tables)},
            "files": files,
        }
        with open(self.root / MANIFEST_NAME, "w", encoding="utf-8", newline="\n") as f:
            json.dump(self.manifest, f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, root: str, settings: Optional[EngineSettings] = None) -> "InvariantDatabase":
        base = Path(root)
        manifest_path = base / MANIFEST_NAME
        if not manifest_path.exists():
            raise DatabaseError(f"No database at {root} (missing {MANIFEST_NAME})")
        try:
            with open(manifest_path, "r", encoding="utf-8") as f:
                manifest = json.load(f)
        except json.JSONDecodeError as e:
            raise CorruptDatabaseError(f"Unreadable manifest: {e}")
        if manifest.get("format_version") != FORMAT_VERSION:
            raise VersionMismatchError(
                f"Database format {manifest.get('format_version')} is not supported (expected {FORMAT_VERSION})")

        settings = settings or EngineSettings()
        settings.dimension = manifest["dimension"]
        settings.signature = manifest["signature"]
        settings.mode = manifest["mode"]
        db = cls(root, settings)
        db.manifest = manifest
        db.max_order = manifest["max_order"]
        db.dual = manifest["dual"]

        for rel, digest in sorted(manifest["files"].items()):
            path = base / rel
            if not path.exists() or sha256_of(path) != digest:
                raise CorruptDatabaseError(f"Checksum mismatch for {rel}")

        for key in manifest["counts"]:
            kind, label = key.split("/")
            case = parse_case(label, dual=(kind == "dual"))
            db.tables[case] = read_table(base / table_file(case), case)
        step_by_tag = {tag: step for step, tag in STEP_TAGS.items()}
        for rel in sorted(manifest["files"]):
            name = rel.rsplit("/", 1)[1]
            if not name.endswith(".rules"):
                continue
            step = step_by_tag[name[:-len(".rules")]]
            for pivot, rhs in read_rules(base / rel):
                db.rulebase.set_rule(pivot, rhs, step)
        db._check_closure()
        db.logger.info(f"Loaded database {root}: {len(db.tables)} cases, {len(db.rulebase)} rules")
        return db

    def _check_closure(self) -> None:
        for pivot, rhs in self.rulebase.rules.items():
            for ident in [pivot] + [t for term in rhs.keys()
                                    for t in ((term,) if isinstance(term, InvariantId) else term)]:
                table = self.tables.get(ident.case)
                if table is None or not 1 <= ident.index <= len(table):
                    raise CorruptDatabaseError(f"Rule for {pivot} references unknown invariant {ident}")

    # ------------------------------------------------------------ simplification

    def to_id_combination(self, terms: Iterable[Tuple[Fraction, Monomial]]) -> LinComb:
        """Canonicalize monomials and resolve each to an id or a product of ids"""
        generator = self.generator
        result = LinComb()
        # coverage is per connected component: R*R*R needs only {0}
        for m, coeff in canonicalize_lincomb(terms).items():
            try:
                resolved = generator.resolve(m)
            except (UnknownInvariantError, DependencyError) as e:
                raise UnsupportedCaseError(
                    f"A monomial of {m.case} is not covered by the database (order <= {self.max_order}): {e}")
            if resolved is not None:
                term, sign = resolved
                result.add(term, coeff * sign)
        return result

    def simplify(self, comb: LinComb, max_iter: Optional[int] = None) -> Tuple[LinComb, int]:
        """Substitute rules until no pivot is left; returns the result and the pass count"""
        cap = max_iter or self.settings.simplify_max_iter
        current = comb
        for iteration in range(1, cap + 1):
            if self.rulebase.is_reduced(current):
                return current, iteration - 1
            current = self.rulebase.apply_once(current)
        if self.rulebase.is_reduced(current):
            return current, cap
        self.logger.warning(f"Simplification did not settle after {cap} passes, finishing with full reduction")
        return self.rulebase.apply(current), cap

    # ------------------------------------------------------------ verification

    def verify(self, seeds: Sequence[int], max_deriv: int = 2) -> Dict[str, Any]:
        """Evaluate every rule (pivot minus its right-hand side) on random metrics"""
        checked = 0
        failures: List[Dict[str, Any]] = []
        skip_steps = set() if self.dimension == 4 else {"dimdep", "dual"}
        rules = [(p, rhs) for p, rhs in sorted(self.rulebase.rules.items(), key=lambda kv: order_key(kv[0]))
                 if self.rulebase.pivot_step[p] not in skip_steps]

        def depth(term) -> int:
            ids = (term,) if isinstance(term, InvariantId) else term
            return max((max(i.case.lambdas, default=0) for i in ids), default=0)

        usable = [(p, rhs) for p, rhs in rules
                  if max([depth(p)] + [depth(t) for t in rhs.keys()]) <= max_deriv]
        skipped = len(self.rulebase.rules) - len(usable)
        for seed in seeds:
            metric = JetMetric.random(seed, max_deriv + 2, self.signature)
            evaluator = JetEvaluator(curvature_jet(metric, max_deriv), self._monomial_of)
            for pivot, rhs in usable:
                difference = evaluator.value_of(pivot) - evaluator.evaluate(rhs)
                checked += 1
                if difference != 0:
                    failures.append({"seed": seed, "pivot": str(pivot), "step": self.rulebase.pivot_step[pivot],
                                     "value": str(difference)})
            self.logger.info(f"Seed {seed}: {len(usable)} rules evaluated")
        return {"checked": checked, "skipped": skipped, "failures": failures}

    def _monomial_of(self, ident: InvariantId) -> Monomial:
        if ident.case not in self.tables:
            raise UnknownInvariantError(f"Unknown invariant {ident}")
        return self.tables[ident.case].lookup(ident)

#!/usr/bin/env python3
# Riemann invariant engine - command line entry point
import argparse
import json
import logging
import os
import sys
from typing import List, Optional

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from core.canonicalizer import canonicalize_lincomb, configure_cache
from core.errors import (DatabaseError, InvariantEngineError, MalformedInputError, UnsupportedCaseError,
                         VerificationError)
from core.monomial import parse_case
from engine_config import EngineSettings, load_settings
from oracle.jet_evaluator import JetMetric, curvature_jet, riemann_via_sympy
from parsers.expression_parser import NOTATIONS, format_id_combination, format_terms, parse
from relations.reducer import COUNT_COLUMNS
from storage.database import InvariantDatabase

try:
    from colorama import Fore, Style, init as colorama_init
    colorama_init()
    _COLORS = {"ok": Fore.GREEN, "fail": Fore.RED, "warn": Fore.YELLOW, "info": Fore.CYAN}
    _RESET = Style.RESET_ALL
except ImportError:
    _COLORS, _RESET = {}, ""

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARSE = 2
EXIT_UNSUPPORTED = 3
EXIT_VERIFY = 4

_SYMBOLS = {"ok": "✅", "fail": "❌", "warn": "⚠️", "info": "📊"}

logger = logging.getLogger(__name__)


def _status(kind: str, text: str) -> None:
    color = _COLORS.get(kind, "")
    print(f"{color}{_SYMBOLS[kind]} {text}{_RESET if color else ''}")


def _emit_json(payload) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def setup_logging(settings: EngineSettings) -> None:
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if settings.log_file:
        os.makedirs(os.path.dirname(settings.log_file) or ".", exist_ok=True)
        handlers.append(logging.FileHandler(settings.log_file))
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.INFO),
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--db", help="database directory (default from settings)")
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING, ...")

    parser = argparse.ArgumentParser(prog="invariants", description="Canonicalize and simplify Riemann invariants")
    commands = parser.add_subparsers(dest="command", required=True)

    canon = commands.add_parser("canon", parents=[common], help="print the canonical form of an expression")
    canon.add_argument("expression")
    canon.add_argument("--notation", choices=NOTATIONS, default="brackets",
                       help="CD[e][R[...]] brackets or R[a,b,c,d;e] semicolon derivatives")

    simplify = commands.add_parser("simplify", parents=[common], help="reduce an expression to independent invariants")
    simplify.add_argument("expression")

    build = commands.add_parser("build", parents=[common], help="build the database up to an order")
    build.add_argument("max_order", type=int)
    build.add_argument("--dual", action="store_true", help="also tabulate dual invariants up to max_order")
    build.add_argument("--dimension", type=int)
    build.add_argument("--signature", type=int, choices=(-1, 1))
    build.add_argument("--mode", choices=("expanded", "nonexpanded"))
    build.add_argument("--out", help="output directory (overrides --db)")
    build.add_argument("--workers", type=int)
    build.add_argument("--no-resume", action="store_true", help="rebuild every unit from scratch")

    counts = commands.add_parser("counts", parents=[common], help="independent invariants per case and step")
    counts.add_argument("--case", help="comma separated derivative orders, e.g. 0,1,3")
    counts.add_argument("--dual", action="store_true")
    counts.add_argument("--step", choices=COUNT_COLUMNS)

    verify = commands.add_parser("verify", parents=[common], help="evaluate every rule on random metrics")
    verify.add_argument("--seeds", help="comma separated seeds (default from settings)")
    verify.add_argument("--max-deriv", type=int, default=2)
    verify.add_argument("--cross-check", action="store_true", help="compare jet curvature with the sympy path")
    return parser


def cmd_canon(args, settings: EngineSettings) -> int:
    comb = canonicalize_lincomb(parse(args.expression))
    terms = sorted(((coeff, m) for m, coeff in comb.items()), key=lambda t: (t[1].case, t[1].labels()))
    text = format_terms(terms, args.notation)
    if args.json:
        _emit_json({"result": text, "terms": len(terms)})
    else:
        print(text)
    return EXIT_OK


def cmd_simplify(args, settings: EngineSettings) -> int:
    db = InvariantDatabase.load(settings.db_path, settings)
    comb = db.to_id_combination(parse(args.expression))
    result, iterations = db.simplify(comb)
    text = format_id_combination(result)
    if args.json:
        _emit_json({"result": text, "iterations": iterations,
                    "terms": {str(k): str(v) for k, v in result.items()}})
    else:
        print(text)
        logger.info(f"Settled after {iterations} substitution passes")
    return EXIT_OK


def cmd_build(args, settings: EngineSettings) -> int:
    if args.dimension is not None:
        settings.dimension = args.dimension
    if args.signature is not None:
        settings.signature = args.signature
    if args.mode:
        settings.mode = args.mode
    if args.workers:
        settings.workers = args.workers
    root = args.out or settings.db_path
    db = InvariantDatabase(root, settings)
    counts = db.build(args.max_order, dual=args.dual, resume=not args.no_resume)
    if args.json:
        _emit_json(counts)
        return EXIT_OK
    _status("ok", f"Database written to {root}")
    _print_counts(counts)
    return EXIT_OK


def _print_counts(counts) -> None:
    header = f"{'case':<16}" + "".join(f"{c:>10}" for c in COUNT_COLUMNS)
    print(header)
    for key in sorted(counts, key=lambda k: (k.startswith("dual"), k)):
        values = counts[key]
        print(f"{key:<16}" + "".join(f"{values.get(c, ''):>10}" for c in COUNT_COLUMNS))


def cmd_counts(args, settings: EngineSettings) -> int:
    db = InvariantDatabase.load(settings.db_path, settings)
    if args.case is None:
        counts = db.manifest["counts"]
        if args.json:
            _emit_json(counts)
        else:
            _print_counts(counts)
        return EXIT_OK
    case = parse_case(args.case, dual=args.dual)
    value = db.counts(case, args.step)
    if args.json:
        _emit_json({"case": str(case), "step": args.step, "count": value} if args.step else
                   {"case": str(case), "counts": value})
    elif args.step:
        print(value)
    else:
        _print_counts({str(case): value})
    return EXIT_OK


def cmd_verify(args, settings: EngineSettings) -> int:
    db = InvariantDatabase.load(settings.db_path, settings)
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else settings.oracle_seeds
    report = db.verify(seeds, args.max_deriv)
    if args.cross_check:
        mismatched = []
        for seed in seeds:
            metric = JetMetric.random(seed, 2, db.signature)
            if (curvature_jet(metric, 0).riemann() != riemann_via_sympy(metric)).any():
                mismatched.append(seed)
        report["cross_check_failures"] = mismatched
    if args.json:
        _emit_json(report)
    else:
        _status("info", f"{report['checked']} rule evaluations, {report['skipped']} rules beyond the jet depth")
        for failure in report["failures"][:20]:
            _status("fail", f"{failure['pivot']} ({failure['step']}, seed {failure['seed']}): {failure['value']}")
        if report.get("cross_check_failures"):
            _status("fail", f"Curvature paths disagree for seeds {report['cross_check_failures']}")
    if report["failures"] or report.get("cross_check_failures"):
        raise VerificationError(f"{len(report['failures'])} rules do not vanish")
    if not args.json:
        _status("ok", "Every rule vanishes on every metric")
    return EXIT_OK


_COMMANDS = {
    "canon": cmd_canon,
    "simplify": cmd_simplify,
    "build": cmd_build,
    "counts": cmd_counts,
    "verify": cmd_verify,
}


def exit_code_for(error: InvariantEngineError) -> int:
    if isinstance(error, VerificationError):
        return EXIT_VERIFY
    if isinstance(error, UnsupportedCaseError):
        return EXIT_UNSUPPORTED
    if isinstance(error, MalformedInputError):
        return EXIT_PARSE
    return EXIT_ERROR


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = load_settings()
    if args.db:
        settings.db_path = args.db
    if args.log_level:
        settings.log_level = args.log_level
    setup_logging(settings)
    configure_cache(settings.canon_cache)

    try:
        return _COMMANDS[args.command](args, settings)
    except InvariantEngineError as e:
        code = exit_code_for(e)
        if isinstance(e, DatabaseError):
            _status("fail", f"Database error: {e}")
        elif code != EXIT_VERIFY:
            _status("fail", str(e))
        logger.debug("Command failed", exc_info=True)
        return code


if __name__ == "__main__":
    sys.exit(main())

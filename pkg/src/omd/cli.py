"""Command line front end: ``omd <subcommand> ...``.

Exit codes: 0 success, 1 usage, 2 parse or validation error, 3 chase
truncated, 4 chase failed, 5 inconsistent program (trivially true answers).
"""
from __future__ import annotations

import argparse
import contextlib
import io
import json
import sys
from importlib import resources
from pathlib import Path

from .analysis import classify
from .answering import certain_answers
from .chase import ChaseOptions, Outcome, check_ncs, run_chase
from .dimensions import MDOntology, Violation, generate_basic_constraints, validate_ontology
from .errors import OMDError, ParseError
from .quality import build_context, core_quality_version, quality_answers
from .syntax import (
    parse_instance,
    parse_program,
    parse_query,
    program_splits,
    render_term,
    serialize_instance,
)

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_TRUNCATED, EXIT_FAILED, EXIT_INCONSISTENT = range(6)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits with 2 by default
        raise UsageError(message)


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc


class _Located(Exception):
    def __init__(self, path: str, exc: OMDError) -> None:
        super().__init__(f"{path}:{exc}")


def _parse(path: str, fn):
    try:
        return fn(_read(path))
    except ParseError as exc:
        raise _Located(path, exc) from exc


def _load_program(args):
    prog = _parse(args.program, parse_program)
    extra = [a for f in getattr(args, "facts", None) or [] for a in _parse(f, parse_instance)]
    if extra:
        prog = prog.with_rules(facts=[*prog.facts, *extra])
    if getattr(args, "categorical_keys", False):
        keys = generate_basic_constraints(MDOntology.from_program(prog), with_categorical_keys=True)
        ckeys = [e for e in keys.egds if (e.label or "").startswith("ckey_")]
        prog = prog.with_rules(egds=[*prog.egds, *ckeys])
    return prog


def _options(args) -> ChaseOptions:
    try:
        return ChaseOptions(
            variant=args.variant,
            max_steps=args.max_steps,
            max_null_depth=args.max_null_depth,
            subsume_dominated=args.subsume,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _print_answers(ans, q, out) -> int:
    if ans.trivially_true:
        print(f"inconsistent: {ans.witness}", file=sys.stderr)
        if q.arity == 0:
            print("TRUE", file=out)
        return EXIT_INCONSISTENT
    for w in ans.warnings:
        print(w, file=sys.stderr)
    if q.arity == 0:
        print("TRUE" if ans.holds else "FALSE", file=out)
    else:
        for row in ans.sorted():
            print("\t".join(render_term(t) for t in row), file=out)
    return EXIT_OK


# -- subcommands ------------------------------------------------------------

def cmd_validate(args, out) -> int:
    prog = _parse(args.program, parse_program)
    violations = []
    if prog.md:
        violations = validate_ontology(MDOntology.from_program(prog)).violations
    if prog.sources:
        try:
            build_context(prog)
        except OMDError as exc:
            violations = [*violations, Violation("context", f"{type(exc).__name__}: {exc}")]
    if args.json:
        rows = [{"code": v.code, "message": v.message, "witness": [str(w) for w in v.witness]}
                for v in violations]
        print(json.dumps({"schema": "omd.validate/1", "ok": not violations, "violations": rows},
                         indent=2, sort_keys=True), file=out)
    elif violations:
        for v in violations:
            print(v, file=out)
    else:
        print("ok", file=out)
    return EXIT_INVALID if violations else EXIT_OK


def cmd_classify(args, out) -> int:
    prog = _parse(args.program, parse_program)
    ont = MDOntology.from_program(prog) if prog.md else None
    report = classify(prog.tgds, prog.egds, ont, rich=not args.frontier_only)
    if args.json:
        print(json.dumps(report.to_json(), indent=2, sort_keys=True), file=out)
    else:
        out.write(report.render())
    return EXIT_OK


def cmd_chase(args, out) -> int:
    prog = _load_program(args)
    res = run_chase(prog, _options(args))
    stats = res.stats
    print(f"{res.outcome.value}: steps={stats.steps} nulls={stats.nulls} merges={stats.merges}",
          file=sys.stderr)
    if res.outcome is Outcome.FAILED:
        print(f"failure: {res.witness}", file=sys.stderr)
        return EXIT_FAILED
    dump = serialize_instance(res.instance, program_splits(prog))
    if args.dump:
        Path(args.dump).write_text(dump, encoding="utf-8")
    else:
        out.write(dump)
    if prog.ncs:
        check = check_ncs(prog, res)
        if not check:
            print(check.describe(), file=sys.stderr)
            return EXIT_INCONSISTENT
    return EXIT_TRUNCATED if res.outcome is Outcome.TRUNCATED else EXIT_OK


def cmd_ask(args, out) -> int:
    prog = _load_program(args)
    q = _parse(args.query, parse_query)
    ans = certain_answers(prog, q, _options(args), fast_path=not args.no_fast_path)
    return _print_answers(ans, q, out)


def _context(args):
    prog = _parse(args.context, parse_program)
    data = _parse(args.source, parse_instance) if args.source else None
    return prog, build_context(prog, data)


def cmd_quality(args, out) -> int:
    _, ctx = _context(args)
    q = _parse(args.query, parse_query)
    return _print_answers(quality_answers(ctx, q, _options(args)), q, out)


def cmd_coreq(args, out) -> int:
    prog, ctx = _context(args)
    core = core_quality_version(ctx, _options(args))
    text = serialize_instance(core, program_splits(prog))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        out.write(text)
    return EXIT_OK


def fixtures_dir() -> Path:
    return Path(str(resources.files("omd") / "fixtures"))


def run_selftest(out=None) -> list[tuple[str, bool, str]]:
    """Replay every golden in the fixture manifest; returns (name, ok, detail)."""
    root = fixtures_dir()
    manifest = json.loads((root / "selftest.json").read_text(encoding="utf-8"))
    results = []
    for case in manifest["cases"]:
        argv = [str(root / a) if (root / a).is_file() else a for a in case["argv"]]
        buf = io.StringIO()
        with contextlib.redirect_stderr(io.StringIO()):
            code = main(argv, out=buf)
        expected = (root / "golden" / case["golden"]).read_text(encoding="utf-8")
        ok = code == case["exit"] and buf.getvalue() == expected
        detail = ""
        if code != case["exit"]:
            detail = f"exit {code} (want {case['exit']})"
        elif not ok:
            detail = "output differs from golden"
        results.append((case["name"], ok, detail))
        if out is not None:
            print(f"{'PASS' if ok else 'FAIL'} {case['name']} {detail}".rstrip(), file=out)
    return results


def cmd_selftest(args, out) -> int:
    results = run_selftest(out)
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_INVALID


# -- argument parsing -------------------------------------------------------

def _chase_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--variant", choices=["restricted", "oblivious"], default="restricted")
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--max-null-depth", type=int, default=None)
    p.add_argument("--subsume", action="store_true", help="drop dominated atoms after the chase")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="omd", description="Ontological multidimensional data toolkit")
    parser.add_argument("--seed", type=int, default=None, help="reserved; the engine is deterministic")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("validate", help="parse a program and check its MD ontology")
    p.add_argument("program")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("classify", help="ranks, marking and WA/sticky/WS verdicts")
    p.add_argument("program")
    p.add_argument("--json", action="store_true")
    p.add_argument("--frontier-only", action="store_true",
                   help="special edges only from frontier positions")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("chase", help="run the chase and dump the result")
    p.add_argument("program")
    p.add_argument("--facts", action="append", help="extra .facts file")
    p.add_argument("--dump", help="write the sorted instance to this file")
    p.add_argument("--categorical-keys", action="store_true")
    _chase_flags(p)
    p.set_defaults(func=cmd_chase)

    p = sub.add_parser("ask", help="certain answers of a query")
    p.add_argument("program")
    p.add_argument("query")
    p.add_argument("--facts", action="append", help="extra .facts file")
    p.add_argument("--categorical-keys", action="store_true")
    p.add_argument("--no-fast-path", action="store_true", help="always use the combined chase")
    _chase_flags(p)
    p.set_defaults(func=cmd_ask)

    p = sub.add_parser("quality", help="quality answers through a contextual ontology")
    p.add_argument("--source", help="source instance D (.facts)")
    p.add_argument("--context", required=True)
    p.add_argument("--query", required=True)
    _chase_flags(p)
    p.set_defaults(func=cmd_quality)

    p = sub.add_parser("coreq", help="core quality version of the source instance")
    p.add_argument("--source")
    p.add_argument("--context", required=True)
    p.add_argument("--out")
    _chase_flags(p)
    p.set_defaults(func=cmd_coreq)

    p = sub.add_parser("selftest", help="replay the bundled goldens")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        if not getattr(args, "func", None):
            raise UsageError("a subcommand is required")
        return args.func(args, out)
    except UsageError as exc:
        print(f"omd: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _Located as exc:
        print(f"omd: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OMDError as exc:
        print(f"omd: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID

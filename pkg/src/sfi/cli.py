"""``sfi`` command line: validate, analyze, run, check, verify.

Exit status: 0 success, 1 findings, 2 usage or parse error, 3 soundness
violation detected by ``verify``.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import analysis, checks, frontend, model, semantics
from .generate import Bounds, generate_program

OK, FINDINGS, USAGE, BREACH = 0, 1, 2, 3


class _Exit(Exception):
    def __init__(self, code: int):
        self.code = code


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _on_off(value: str) -> bool:
    v = value.lower()
    if v in ("on", "yes", "true", "1"):
        return True
    if v in ("off", "no", "false", "0"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {value!r}")


def _mode(value: str) -> model.FieldInitMode:
    try:
        return model.FieldInitMode(value.replace("_", "-"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected ignore, pre-super or post-super, got {value!r}")


def _load(path: str) -> model.Program:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        _err(f"sfi: cannot read {path}: {exc}")
        raise _Exit(USAGE)
    try:
        return frontend.parse(text, resolve=False)
    except frontend.ParseFailure as exc:
        for e in exc.errors:
            _err(f"{path}:{e}")
        raise _Exit(USAGE)


def _prepared(args) -> model.Program:
    """Load, validate and desugar; validation errors end the command with status 1."""
    program = _load(args.file)
    violations = model.validate(program)
    for v in violations:
        _err(f"{args.file}: {v}")
    if model.errors(violations):
        raise _Exit(FINDINGS)
    return model.desugar(
        program,
        field_init_mode=args.field_init_mode,
        super_init=args.implicit_super_init,
        entry_class_init=args.entry_class_init,
    )


# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    program = _load(args.file)
    violations = model.validate(program)
    for v in violations:
        print(v)
    if model.errors(violations) or (args.strict and violations):
        return FINDINGS
    return OK


def cmd_analyze(args) -> int:
    program = _prepared(args)
    sol = analysis.solve(program)
    if args.format == "json":
        sys.stdout.write(frontend.solution_to_json(program, sol, checks.read_before_write(program, sol)))
    else:
        sys.stdout.write(frontend.solution_to_table(program, sol))
    return OK


def _parse_choices(text: str) -> list[int]:
    try:
        return [int(c) for c in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"trace choices must be integers, got {text!r}")


def _fmt_classes(classes) -> str:
    return "{" + ",".join(sorted(classes)) + "}"


def cmd_run(args) -> int:
    program = _prepared(args)
    if args.trace is not None:
        try:
            trace = semantics.run_trace(program, args.trace)
        except semantics.TraceError as exc:
            _err(f"sfi: {exc}")
            return USAGE
        for i, st in enumerate(trace):
            print(f"{i}: {st}")
        return OK
    res = semantics.explore(program, args.max_depth, args.max_states)
    observed = set().union(*(s.history for s in res.visited)) if res.visited else set()
    print(f"states: {len(res.raw_visited)}")
    print(f"complete: {'yes' if res.complete else 'no'}")
    print(f"limits_hit: {','.join(sorted(l.value for l in res.limits_hit)) or 'none'}")
    print(f"final: {len(res.raw_final)}")
    print(f"stuck: {len(res.raw_stuck)}")
    for h in sorted({_fmt_classes(s.history) for s in res.final}):
        print(f"final history: {h}")
    print(f"initialized: {_fmt_classes(observed)}")
    return OK


def cmd_check(args) -> int:
    program = _prepared(args)
    sol = analysis.solve(program)
    diags = checks.read_before_write(program, sol)
    flags = sorted(checks.nullness_flags(program, sol))
    if args.format == "json":
        out = {
            "note": checks.UNREACHABLE_NOTE,
            "warnings": [
                {"kind": d.kind.value, "point": str(d.point), "field": str(d.field), "detail": d.detail}
                for d in diags
            ],
            "may_null": [str(f) for f in flags],
        }
        print(json.dumps(out, indent=2))
    else:
        print(f"# {checks.UNREACHABLE_NOTE}")
        for d in diags:
            print(d)
        for f in flags:
            print(f"{checks.DiagnosticKind.MAY_NULL_READ.value}: {f}")
    return FINDINGS if diags else OK


def cmd_verify(args) -> int:
    if args.file is None and args.random is None:
        _err("sfi verify: give a FILE or --random N")
        return USAGE
    if args.file is not None:
        programs = [_prepared(args)]
    else:
        bounds = Bounds(args.classes, args.methods, args.points, args.fields)
        programs = (generate_program(args.seed + i, bounds) for i in range(args.random))
    report = checks.SoundnessReport()
    for program in programs:
        sol = analysis.solve(program)
        if args.inject_corruption:
            sol = checks.corrupt_solution(program, sol)
        report.merge(checks.verify_soundness(program, sol, args.max_depth, args.max_states))
    for v in report.violations[:20]:
        _err(f"violation: {v}")
    incomplete = report.exploration_complete.count(False)
    print(f"programs={report.programs_checked} states_checked={report.states_checked} "
          f"violations={len(report.violations)} incomplete_explorations={incomplete}")
    return OK if not report.violations else BREACH


# ---------------------------------------------------------------------------


def _desugar_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--field-init-mode", type=_mode, default=model.FieldInitMode.IGNORE,
                   help="ignore | pre-super | post-super (default: ignore)")
    p.add_argument("--implicit-super-init", type=_on_off, default=None,
                   help="on | off (default: on when some class extends another)")
    p.add_argument("--entry-class-init", type=_on_off, default=False,
                   help="on | off (default: off)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sfi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check program well-formedness")
    p.add_argument("file")
    p.add_argument("--strict", action="store_true", help="fail on warnings too")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("analyze", help="print the least dataflow solution")
    p.add_argument("file")
    p.add_argument("--format", choices=("table", "json"), default="table")
    _desugar_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("run", help="explore or replay executions")
    p.add_argument("file")
    p.add_argument("--max-depth", type=int, default=32)
    p.add_argument("--max-states", type=int, default=100_000)
    p.add_argument("--trace", type=_parse_choices, default=None,
                   help="comma-separated successor indices, one per step")
    _desugar_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check", help="report fields possibly read before initialization")
    p.add_argument("file")
    p.add_argument("--format", choices=("text", "json"), default="text")
    _desugar_flags(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("verify", help="cross-check the analysis against the interpreter")
    p.add_argument("file", nargs="?")
    p.add_argument("--random", type=int, default=None, metavar="N")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classes", type=int, default=6)
    p.add_argument("--methods", type=int, default=8)
    p.add_argument("--points", type=int, default=40)
    p.add_argument("--fields", type=int, default=4)
    p.add_argument("--max-depth", type=int, default=24)
    p.add_argument("--max-states", type=int, default=50_000)
    p.add_argument("--inject-corruption", action="store_true", help=argparse.SUPPRESS)
    _desugar_flags(p)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    if getattr(args, "max_depth", 1) <= 0 or getattr(args, "max_states", 1) <= 0:
        _err("sfi: exploration bounds must be positive")
        return USAGE
    try:
        return args.func(args)
    except _Exit as exc:
        return exc.code
    except model.CyclicSuperclassError as exc:
        _err(f"sfi: {exc}")
        return FINDINGS


if __name__ == "__main__":
    sys.exit(main())

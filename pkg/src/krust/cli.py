"""Command-line entry point: ``krust check|lower|run|search FILE``.

Exit codes: 0 success, 1 type errors, 2 runtime error, 3 data race
(under ``--strict-races`` for ``run``, any race for ``search``), 64 usage or
I/O errors, 65 parse errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .checker import check_program
from .core_ast import CoreProgram, pretty_core
from .core_parser import parse_core
from .lexer import ParseError
from .lowering import LoweringError, lower_program
from .machine import (
    DEFAULT_MAX_STEPS, FixedTrace, Machine, RandomSched, RoundRobin, StepBudgetExceeded, run,
)
from .search import BoundExceeded, enumerate_interleavings
from .surface_parser import parse_surface

EXIT_OK, EXIT_TYPE, EXIT_RUNTIME, EXIT_RACE = 0, 1, 2, 3
EXIT_USAGE, EXIT_PARSE = 64, 65


class _Exit(Exception):
    def __init__(self, code: int, message: str = ""):
        super().__init__(message)
        self.code = code
        self.message = message


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _Exit(EXIT_USAGE, f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="krust", description="Check, lower and run programs of the ownership language.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", help="type-check a surface program (.krs)")
    c.add_argument("input")

    lo = sub.add_parser("lower", help="translate a surface program to core (.kcl)")
    lo.add_argument("input")
    lo.add_argument("-o", "--output", help="output path (default: stdout)")
    lo.add_argument("--seq", choices=("tailcall", "plain"), default="tailcall",
                    help="how sequencing is lowered")

    for name, text in (("run", "execute a program"), ("search", "explore every interleaving")):
        r = sub.add_parser(name, help=text)
        r.add_argument("input")
        r.add_argument("--max-steps", type=int, default=DEFAULT_MAX_STEPS if name == "run" else 10_000)
        r.add_argument("--strict-races", action="store_true", help="treat a data race as fatal")
        r.add_argument("--strict-uninit", action="store_true", help="fault on reads of unwritten units")
        if name == "run":
            r.add_argument("--sched", choices=("rr", "random", "trace"), default="rr")
            r.add_argument("--seed", type=int, default=0)
            r.add_argument("--replay", help="trace file (lines `tid step rule`) for --sched trace")
            r.add_argument("--dump-memory", action="store_true", help="print the final memory")
            r.add_argument("--trace", action="store_true", help="print one line per step to stderr")
    return p


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _Exit(EXIT_USAGE, f"krust: cannot read {path}: {exc.strerror or exc}")


def _parse_error(path: str, exc: ParseError) -> _Exit:
    return _Exit(EXIT_PARSE, f"{path}:{exc}")


def _check(path: str):
    try:
        prog = parse_surface(_read(path))
    except ParseError as exc:
        raise _parse_error(path, exc)
    result = check_program(prog)
    return prog, result


def _report_type_errors(result) -> None:
    for d in result.errors:
        print(str(d), file=sys.stderr)


def _load_core(path: str, seq: str = "tailcall") -> CoreProgram:
    """Parse ``.kcl`` directly; anything else is checked and lowered first."""
    if path.endswith(".kcl"):
        try:
            return parse_core(_read(path))
        except ParseError as exc:
            raise _parse_error(path, exc)
    prog, result = _check(path)
    if not result.ok:
        _report_type_errors(result)
        raise _Exit(EXIT_TYPE)
    try:
        return lower_program(prog, result, tail_seq=(seq == "tailcall"))
    except LoweringError as exc:
        raise _Exit(EXIT_TYPE, f"krust: lowering failed: {exc.message}")


def _scheduler(args):
    if args.sched == "random":
        return RandomSched(args.seed)
    if args.sched == "trace":
        if not args.replay:
            raise _Exit(EXIT_USAGE, "krust: --sched trace needs --replay FILE")
        tids = []
        for line in _read(args.replay).splitlines():
            parts = line.split()
            if not parts:
                continue
            try:
                tids.append(int(parts[0]))
            except ValueError:
                raise _Exit(EXIT_USAGE, f"krust: bad trace line: {line!r}")
        return FixedTrace(tids)
    return RoundRobin()


def cmd_check(args) -> int:
    _, result = _check(args.input)
    if result.ok:
        print(f"{args.input}: ok")
        return EXIT_OK
    _report_type_errors(result)
    return EXIT_TYPE


def cmd_lower(args) -> int:
    core = _load_core(args.input, args.seq)
    text = pretty_core(core)
    if args.output:
        try:
            Path(args.output).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise _Exit(EXIT_USAGE, f"krust: cannot write {args.output}: {exc.strerror or exc}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_run(args) -> int:
    core = _load_core(args.input)
    m = Machine(core, strict_races=args.strict_races, strict_uninit=args.strict_uninit)
    m.record_trace = args.trace
    try:
        cfg = run(m, _scheduler(args), max_steps=args.max_steps, raise_errors=False)
    except StepBudgetExceeded as exc:
        if args.trace:
            _print_trace(m)
        print(f"error[StepBudgetExceeded]: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if args.trace:
        _print_trace(m)
    print(f"value: {cfg.value}")
    if args.dump_memory:
        sys.stdout.write(cfg.dump)
    for r in cfg.races:
        print(f"warning: {r}", file=sys.stderr)
    if cfg.error is not None:
        print(f"error[{cfg.error.kind}]: {cfg.error}", file=sys.stderr)
        return EXIT_RACE if cfg.error.kind == "DataRace" else EXIT_RUNTIME
    return EXIT_OK


def _print_trace(m: Machine) -> None:
    for tid, step, rule in m.trace:
        print(f"{tid} {step} {rule}", file=sys.stderr)


def cmd_search(args) -> int:
    core = _load_core(args.input)
    m = Machine(core, strict_races=args.strict_races, strict_uninit=args.strict_uninit)
    try:
        res = enumerate_interleavings(m, max_steps=args.max_steps)
    except BoundExceeded as exc:
        print(f"error[BoundExceeded]: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for i, cfg in enumerate(res.configs):
        results = ", ".join(f"{tid}: {v}" for tid, v in sorted(cfg.results.items()))
        print(f"outcome {i}: {{{results}}}")
        sys.stdout.write(cfg.dump)
    print(f"raced: {'yes' if res.raced else 'no'}")
    return EXIT_RACE if res.raced else EXIT_OK


COMMANDS = {"check": cmd_check, "lower": cmd_lower, "run": cmd_run, "search": cmd_search}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except _Exit as exc:
        if exc.message:
            print(exc.message, file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())

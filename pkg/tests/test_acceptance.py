"""Acceptance criteria; each test carries a ``criterion(n)`` marker and the
summary at the end of the run reports one PASS/FAIL line per criterion."""

from __future__ import annotations

import itertools
import random
import subprocess
import sys
import time
from pathlib import Path

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from krust.checker import check_program
from krust.core_ast import pretty_core
from krust.core_parser import parse_core
from krust.lowering import lower_program
from krust.machine import Machine, MachineError, RoundRobin, run, run_program
from krust.memory import VInt
from krust.search import enumerate_interleavings
from krust.surface_parser import parse_surface
from oracles import closures, loans, overlap
from strategies import ownership_programs

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"

QUEUE_DUMP = (
    "block addr(0) bnum 4\n"
    "  0 |-> 5\n"
    "  1 |-> 1\n"
    "  2 |-> 5\n"
    "  3 |-> location(1,0)\n"
    "block addr(1) bnum 5\n"
    "  0 |-> 6\n"
    "  1 |-> 5\n"
    "  2 |-> 4\n"
    "  3 |-> 3\n"
    "  4 |-> 2\n"
    "block addr(2) bnum 2\n"
    "  0 |-> 2\n"
    "  1 |-> 6\n"
)


def check_file(name: str):
    return check_program(parse_surface((CORPUS / name).read_text()))


def check_text(text: str):
    return check_program(parse_surface(text))


def kinds(result) -> list[str]:
    return [d.kind for d in result.errors]


# -- 1 ------------------------------------------------------------------------


@pytest.mark.criterion(1)
def test_queue_core_program_final_memory():
    prog = parse_core((CORPUS / "queue.kcl").read_text())
    start = time.perf_counter()
    cfg = run_program(prog, RoundRobin())
    elapsed = time.perf_counter() - start
    assert cfg.error is None
    assert cfg.dump == QUEUE_DUMP
    assert cfg.value == VInt(1)
    assert elapsed < 1.0


# -- 2 ------------------------------------------------------------------------


@pytest.mark.criterion(2)
def test_corrected_queue_accepted():
    assert check_file("queue.krs").ok


@pytest.mark.criterion(2)
def test_owned_queue_rejected_with_use_of_moved():
    result = check_file("queue_own.krs")
    assert kinds(result)[0] == "UseOfMoved"
    # the use after the move is the recursive call's argument
    assert result.errors[0].pos == (21, 44)


@pytest.mark.criterion(2)
def test_appendix_d_rejected():
    result = check_file("appendix_d.krs")
    assert not result.ok


@pytest.mark.criterion(2)
def test_appendix_d_mutable_borrow_line_is_an_error():
    # without the reborrow on line 4, the mutable borrow on line 5 is still
    # rejected because y's immutable borrow of x is live
    text = (CORPUS / "appendix_d.krs").read_text().splitlines()
    del text[3]
    result = check_text("\n".join(text))
    assert kinds(result) == ["MutBorrowWhileBorrowed"]
    assert result.errors[0].pos[0] == 4


@pytest.mark.criterion(2)
def test_freeze_program_accepted():
    assert check_file("freeze.krs").ok


@pytest.mark.criterion(2)
def test_write_during_freeze_rejected():
    assert kinds(check_file("freeze_write.krs")) == ["FrozenWrite"]


@pytest.mark.criterion(2)
def test_verdicts_fast():
    start = time.perf_counter()
    for name in ("queue.krs", "queue_own.krs", "appendix_d.krs", "freeze.krs", "freeze_write.krs"):
        check_file(name)
    assert time.perf_counter() - start < 1.0


# -- 3 ------------------------------------------------------------------------


@pytest.mark.criterion(3)
@settings(max_examples=400, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(ownership_programs())
def test_ownership_rules_match_loan_model(case):
    mutable, stmts = case
    result = check_text(loans.render(mutable, stmts))
    expected = loans.predict(mutable, stmts)
    got = result.errors[0].kind if result.errors else None
    assert got == expected
    if result.ok:
        for ev in result.checker.borrow_log:
            assert ev.owner < ev.holder


@pytest.mark.criterion(3)
def test_ownership_principles_spot_checks():
    many_imm = "let x = new(i32) in { let y = & imm x in { let z = & imm x in void }}"
    two_mut = "let mut x = new(i32) in { let y = & mut x in { let z = & mut x in void }}"
    moved = "let v = new(i32) in { let w = v in { *v } }"
    closed = "let mut x = new(i32) in { let a = & mut x in { void }; let b = & mut x in { void } }"
    assert check_text(many_imm).ok
    assert kinds(check_text(two_mut)) == ["ConflictingMutBorrow"]
    assert kinds(check_text(moved)) == ["UseOfMoved"]
    assert check_text(closed).ok


# -- 4 ------------------------------------------------------------------------

ARGS = st.lists(st.integers(-1000, 1000), min_size=4, max_size=4)


def _eval(src: str):
    return run_program(parse_core(src))


@pytest.mark.criterion(4)
@settings(max_examples=30, deadline=None)
@given(ARGS)
def test_partial_application_equals_direct(values):
    for n in range(1, 5):
        args = values[:n]
        direct = _eval(f"{closures.fn_source(n)}; f({', '.join(map(closures.lit, args))})")
        assert direct.value == VInt(closures.weighted_sum(args))
        assert direct.crcnt == 1
        for k in range(n):
            first, rest = args[:k], args[k:]
            src = (f"{closures.fn_source(n)}; "
                   f"f({', '.join(map(closures.lit, first))})({', '.join(map(closures.lit, rest))})")
            cfg = _eval(src)
            assert cfg.value == direct.value
            # the definition plus one partial application
            assert cfg.crcnt == 2


@pytest.mark.criterion(4)
def test_curried_application_counts_one_closure_per_partial_step():
    for n in range(1, 5):
        args = list(range(1, n + 1))
        src = closures.fn_source(n) + "; f" + "".join(f"({a})" for a in args)
        cfg = _eval(src)
        assert cfg.value == VInt(closures.weighted_sum(args))
        assert cfg.crcnt == 1 + (n - 1)


@pytest.mark.criterion(4)
def test_tail_recursive_countdown_keeps_stack_flat():
    src = "fn loop (n) { case n > 0 of {0, tailcall(loop(n - 1))} }; loop(10000)"
    start = time.perf_counter()
    cfg = _eval(src)
    assert cfg.value == VInt(0)
    # the single frame pushed by the outermost, non-tail call
    assert cfg.max_clstack <= 1
    assert time.perf_counter() - start < 5.0


# -- 5 ------------------------------------------------------------------------


def corpus_programs():
    progs = []
    for path in sorted(CORPUS.glob("*.kcl")):
        progs.append((path.name, parse_core(path.read_text())))
    for path in sorted(CORPUS.glob("*.krs")):
        prog = parse_surface(path.read_text())
        result = check_program(prog)
        if result.ok:
            progs.append((path.name, lower_program(prog, result)))
    return progs


class CheckedMachine(Machine):
    """Asserts non-negative status counters after every step."""

    def step(self, idx):
        rule = super().step(idx)
        for r, w in self.memory.status.values():
            assert r >= 0 and w >= 0
        return rule


@pytest.mark.criterion(5)
@pytest.mark.parametrize("name,prog", corpus_programs(), ids=lambda x: x if isinstance(x, str) else "")
def test_corpus_counters_nonnegative_and_quiescent(name, prog):
    m = CheckedMachine(prog)
    cfg = run(m, RoundRobin(), raise_errors=False)
    assert cfg.error is None
    assert m.memory.is_quiescent()
    assert all(tuple(s) == (0, 0) for s in m.memory.status.values())


@pytest.mark.criterion(5)
def test_use_after_free_detected():
    with pytest.raises(MachineError) as exc:
        _eval("(fn (p) {free(p); *na p})(allocate(1))")
    assert exc.value.kind == "UseAfterFree"


@pytest.mark.criterion(5)
def test_double_free_detected():
    with pytest.raises(MachineError) as exc:
        _eval("(fn (p) {free(p); free(p)})(allocate(1))")
    assert exc.value.kind == "DoubleFree"


@pytest.mark.criterion(5)
def test_append_read_write_units():
    cfg = _eval("(fn (p) {p.0 :=na 1; p.1 :=at 2; append(p, 3); p.2 :=na *na p.2 + *at p.1})(allocate(2))")
    assert cfg.dump == "block addr(0) bnum 3\n  0 |-> 1\n  1 |-> 2\n  2 |-> 5\n"
    cas = _eval("(fn (p) {p :=na 5; cas(p, 5, 9) + cas(p, 6, 1) * 10 + *na p * 100})(allocate(1))")
    assert cas.value == VInt(1 + 0 + 900)


# -- 6 ------------------------------------------------------------------------

SHORT = [()] + [(a,) for a in overlap.KINDS] + list(itertools.product(overlap.KINDS, repeat=2))


def _search_raced(t0, t1) -> bool:
    return enumerate_interleavings(Machine(parse_core(overlap.render(t0, t1)))).raced


@pytest.mark.criterion(6)
def test_race_detection_agrees_with_overlap_oracle():
    start = time.perf_counter()
    cases = [(a, b) for a in SHORT for b in SHORT]
    rng = random.Random(20261018)
    triples = list(itertools.product(overlap.KINDS, repeat=3))
    cases += [(rng.choice(triples), rng.choice(triples)) for _ in range(300)]
    cases += [(rng.choice(triples), rng.choice(SHORT)) for _ in range(100)]
    mismatches = [(a, b) for a, b in cases if _search_raced(a, b) != overlap.races(a, b)]
    assert mismatches == []
    assert len(cases) >= 1000
    assert time.perf_counter() - start < 60.0


@pytest.mark.criterion(6)
def test_oracle_sanity():
    assert overlap.races(("na-write",), ("na-write",))
    assert overlap.races(("na-read",), ("at-write",))
    assert not overlap.races(("na-read",), ("na-read",))
    assert not overlap.races(("at-write", "cas"), ("cas", "at-read"))
    assert not overlap.races((), ("na-write",))


# -- 7 ------------------------------------------------------------------------

DECLS = "Queue :=: prodTy(i32,i32,i32,own(array(i32)))\nOption :=: sumTy(bool,i32)\n"

TABLE = [
    ("let", DECLS + "let mut q = new(ty(Queue)) in { q.1 := 5 }",
     "(fn (q) {q.0 :=na 5})(allocate(4))\n"),
    ("let-uninit", "let r in { r := 1; r }",
     "(fn (r) {tailcall((fn (#anonymous0) {r})(r := 1))})(0)\n"),
    ("if", "if true then {1} else {2}", "case 1 of {2, 1}\n"),
    ("new-sum", DECLS + "let o = new(ty(Option)) in { void }", "(fn (o) {clskip})(allocate(2))\n"),
    ("new-array", "let a = new(i32, 5) in { void }", "(fn (a) {clskip})(allocate(5))\n"),
    ("deref", "let x = new(i32) in { *x }", "(fn (x) {*na x})(allocate(1))\n"),
    ("assign-env", "let mut x = 1 in { x := 2 }", "(fn (x) {x := 2})(1)\n"),
    ("assign-mem", "let mut x = new(i32) in { *x := 5 }", "(fn (x) {x :=na 5})(allocate(1))\n"),
    ("inj", DECLS + "let return = new(ty(Option)) in { return :=inj 1 false }",
     "(fn (return) {\n  return.0 :=na 1;\n  return.1 :=na 0\n})(allocate(2))\n"),
    ("seq", "1; 2", "tailcall((fn (#anonymous0) {2})(1))\n"),
    ("case-sum", DECLS + "let re = new(ty(Option)) in { re :=inj 2 6; case re of {false, re.1 = 6} }",
     "(fn (re) {tailcall((fn (#anonymous0) {case *na re.0 - 1 of {0, *na re.1 == 6}})"
     "(re.0 :=na 2; re.1 :=na 6))})(allocate(2))\n"),
    ("case-bool", "case true of {1, 2}", "case 1 of {1, 2}\n"),
    ("field-prod", DECLS + "get :=: fnTy('a;ref('a,mut,own(ty(Queue)));void)\n"
     "fun get(q) newlft (*q).2 := (*q).2 + 1 endlft",
     "fn get (q) {q.1 :=na *na q.1 + 1}\n"),
    ("array-index", DECLS + "let mut q = new(ty(Queue)) in { q.4 := new(i32, 5); (*q.4).(2) := 9 }",
     "(fn (q) {tailcall((fn (#anonymous0) {(*na q.3).2 :=na 9})(q.3 :=na allocate(5)))})(allocate(4))\n"),
    ("fun-call", "f :=: fnTy(;i32;i32)\nfun f(x) newlft x + 1 endlft\ncall f(2)",
     "fn f (x) {x + 1};\nf(2)\n"),
    ("begin-void", "begin void end", "clskip\n"),
]


def lower_text(text: str) -> str:
    prog = parse_surface(text)
    result = check_program(prog)
    assert result.ok, result.errors
    return pretty_core(lower_program(prog, result))


@pytest.mark.criterion(7)
@pytest.mark.parametrize("row,source,expected", TABLE, ids=[r[0] for r in TABLE])
def test_translation_golden(row, source, expected):
    assert lower_text(source) == expected


@pytest.mark.criterion(7)
def test_lowered_queue_allocation_sizes():
    text = lower_text((CORPUS / "queue.krs").read_text())
    for size in ("allocate(4)", "allocate(2)", "allocate(5)"):
        assert size in text


@pytest.mark.criterion(7)
def test_lowered_queue_reproduces_memory():
    core = parse_core(lower_text((CORPUS / "queue.krs").read_text()))
    cfg = run_program(core, RoundRobin())
    assert cfg.dump == QUEUE_DUMP
    assert cfg.value == VInt(1)


# -- 8 ------------------------------------------------------------------------

INVOCATIONS = [
    ["run", "corpus/queue.kcl", "--dump-memory"],
    ["run", "corpus/queue.krs", "--dump-memory"],
    ["run", "corpus/race_na.kcl", "--sched", "random", "--seed", "7", "--dump-memory"],
    ["check", "corpus/queue.krs"],
    ["check", "corpus/queue_own.krs"],
    ["lower", "corpus/queue.krs"],
    ["search", "corpus/race_na.kcl"],
    ["search", "corpus/counter_cas.kcl"],
    ["run", "corpus/missing.kcl"],
]


def _cli(args):
    return subprocess.run([sys.executable, "-m", "krust", *args], cwd=ROOT, capture_output=True, timeout=60)


@pytest.mark.criterion(8)
@pytest.mark.parametrize("args", INVOCATIONS, ids=[" ".join(a) for a in INVOCATIONS])
def test_cli_is_deterministic(args):
    first, second = _cli(args), _cli(args)
    assert first.returncode == second.returncode
    assert first.stdout == second.stdout

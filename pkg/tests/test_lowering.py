from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import HealthCheck, given, settings

from krust import core_ast as C
from krust.checker import check_program
from krust.core_parser import parse_core
from krust.lowering import LoweringError, lower_program
from krust.machine import RoundRobin, run_program
from krust.memory import UNIT, VInt
from krust.surface_parser import parse_surface
from oracles import loans
from strategies import ownership_programs

CORPUS = Path(__file__).resolve().parent.parent / "corpus"
DECLS = "Queue :=: prodTy(i32,i32,i32,own(array(i32)))\nOption :=: sumTy(bool,i32)\n"


def lower(text: str, **kw) -> C.CoreProgram:
    prog = parse_surface(text)
    result = check_program(prog)
    assert result.ok, result.errors
    return lower_program(prog, result, **kw)


def run_surface(text: str, **kw):
    return run_program(lower(text, **kw), RoundRobin())


def accepted_corpus():
    out = []
    for path in sorted(CORPUS.glob("*.krs")):
        prog = parse_surface(path.read_text())
        if check_program(prog).ok:
            out.append(path.name)
    return out


@pytest.mark.parametrize("name", accepted_corpus())
def test_lowered_corpus_parses_and_runs(name):
    core = lower((CORPUS / name).read_text())
    text = C.pretty_core(core)
    assert parse_core(text) == core
    cfg = run_program(parse_core(text), raise_errors=False)
    assert cfg.error is None


@pytest.mark.parametrize("name", accepted_corpus())
def test_tailcall_and_plain_sequencing_agree(name):
    text = (CORPUS / name).read_text()
    a = run_surface(text)
    b = run_surface(text, tail_seq=False)
    assert (a.value, a.dump) == (b.value, b.dump)


def test_rejected_program_not_lowered():
    prog = parse_surface("let v = new(i32) in { let w = v in { *v } }")
    with pytest.raises(LoweringError):
        lower_program(prog, check_program(prog))


@pytest.mark.parametrize("text,value", [
    ("let mut x = 1 in { let y = & mut x in { *y := 5 }; x }", VInt(5)),
    ("let mut x = 1 in { let y = 2 in { x := y }; x }", VInt(2)),
    ("let mut x = 1 in { x := x + 1; x }", VInt(2)),
    ("let mut x = new(i32) in { *x := 4; *x * 2 }", VInt(8)),
    ("if 1 < 2 then {10} else {20}", VInt(10)),
    ("if 2 < 1 then {10} else {20}", VInt(20)),
    ("case false of {1, 2}", VInt(1)),
    ("begin void end", UNIT),
    (DECLS + "let o = new(ty(Option)) in { o :=inj 2 7; case o of {0, o.1} }", VInt(7)),
    (DECLS + "let o = new(ty(Option)) in { o :=inj 1 true; case o of {0, o.1} }", VInt(0)),
    ("f :=: fnTy(;i32,i32;i32)\nfun f(a, b) newlft a * 10 + b endlft\ncall f(3, 4)", VInt(34)),
    ("let mut a = new(i32, 3) in { (*a).(1 + 1) := 9; (*a).(2) }", VInt(9)),
    ("let fn = 3 in { fn + 1 }", VInt(4)),
    ("let mut x = 0 in { {1; x := 5}; x }", VInt(5)),
    ("let mut x = 0 in { if true then {1; x := 5} else {void}; x }", VInt(5)),
    ("let mut x = 0 in { begin x := 3; x := x + 1 end; x }", VInt(4)),
])
def test_lowered_semantics(text, value):
    for tail_seq in (True, False):
        cfg = run_surface(text, tail_seq=tail_seq)
        assert cfg.error is None
        assert cfg.value == value


def test_prod_fields_shift_to_zero_based_offsets():
    core = C.pretty_core(lower(DECLS + "let mut q = new(ty(Queue)) in { q.1 := 1; q.2 := 2; q.3 := 3 }"))
    assert "q.0 :=na 1" in core and "q.1 :=na 2" in core and "q.2 :=na 3" in core


def test_sum_tags_stored_one_based():
    core = C.pretty_core(lower(DECLS + "let o = new(ty(Option)) in { o :=inj 2 5; case o of {1, 2} }"))
    assert "o.0 :=na 2" in core and "*na o.0 - 1" in core


def test_allocation_sizes_follow_types():
    core = C.pretty_core(lower(DECLS + "let q = new(ty(Queue)) in { let o = new(ty(Option)) in void }"))
    assert "allocate(4)" in core and "allocate(2)" in core
    assert "allocate(n * 2)" in C.pretty_core(lower(
        DECLS + "f :=: fnTy(;i32;void)\nfun f(n) newlft let a = new(ty(Option), n) in void endlft"))


def test_main_called_when_no_body():
    core = lower("main :=: fnTy(;;void)\nfun main() newlft 5 endlft")
    assert core.items[-1] == C.Apply(C.Ident("main"), ())
    assert run_program(core).value == VInt(5)


def test_anonymous_names_unique():
    text = C.pretty_core(lower("1; 2; 3; 4"))
    names = [w for w in text.replace("(", " ").replace(")", " ").split() if w.startswith("#anonymous")]
    assert len(names) == len(set(names)) == 3


@settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(ownership_programs())
def test_lowering_total_on_accepted_programs(case):
    mutable, stmts = case
    text = loans.render(mutable, stmts)
    prog = parse_surface(text)
    result = check_program(prog)
    if not result.ok:
        return
    core = lower_program(prog, result)
    cfg = run_program(parse_core(C.pretty_core(core)), raise_errors=False)
    assert cfg.error is None

from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from krust import core_ast as C
from krust.core_parser import parse_core, parse_core_exp
from krust.lexer import ParseError

CORPUS = Path(__file__).resolve().parent.parent / "corpus"

names = st.sampled_from(["x", "y", "q", "f", "re", "#anonymous0", "k'"])
ints = st.integers(0, 99).map(C.IntLit)
leaves = st.one_of(ints, names.map(C.Ident), st.just(C.Skip()), st.sampled_from(["a", "b\"c", ""]).map(C.StrLit))


def _extend(sub):
    params = st.lists(names, max_size=3, unique=True).map(tuple)
    args = st.lists(sub, max_size=3).map(tuple)
    apply_ = st.builds(C.Apply, st.one_of(names.map(C.Ident), st.builds(C.AnonFn, params, sub)), args)
    return st.one_of(
        st.builds(C.Deref, st.sampled_from(["na", "at"]), sub),
        st.builds(C.BinOp, st.sampled_from(["+", "-", "*", "mod", "==", "<", ">"]), sub, sub),
        st.builds(C.Case, sub, st.lists(sub, min_size=1, max_size=3).map(tuple)),
        st.builds(C.AnonFn, params, sub),
        apply_,
        st.builds(C.TailCall, apply_),
        st.builds(C.Fork, sub),
        st.builds(C.EnvAssign, names, sub),
        st.builds(C.MemAssign, sub, st.sampled_from(["na", "at"]), sub),
        st.builds(C.FieldOffset, sub, st.one_of(ints, sub)),
        st.builds(C.Allocate, sub),
        st.builds(C.Seq, sub, sub),
        st.builds(C.Cas, sub, sub, sub),
        st.builds(C.Append, sub, sub),
        st.builds(C.Free, sub),
    )


core_exps = st.recursive(leaves, _extend, max_leaves=12)


@settings(max_examples=300, deadline=None)
@given(core_exps)
def test_expression_round_trip(e):
    assert parse_core_exp(C.pretty_exp(e)) == e


@settings(max_examples=100, deadline=None)
@given(st.lists(st.builds(C.FnDef, names, st.lists(names, max_size=3, unique=True).map(tuple), core_exps),
                max_size=3), core_exps)
def test_program_round_trip(fns, body):
    prog = C.CoreProgram(C.seq_of([*fns, body]))
    text = C.pretty_core(prog)
    assert parse_core(text) == prog
    assert C.pretty_core(parse_core(text)) == text


def test_listing_queue_structure():
    prog = parse_core((CORPUS / "queue.kcl").read_text())
    items = prog.items
    assert [type(i).__name__ for i in items] == ["FnDef"] * 4 + ["Apply"]
    assert [i.name for i in items[:4]] == ["get", "put", "for", "main"]
    assert items[4] == C.Apply(C.Ident("main"), ())


def test_queue_round_trips():
    prog = parse_core((CORPUS / "queue.kcl").read_text())
    assert parse_core(C.pretty_core(prog)) == prog


def test_identity_program():
    prog = parse_core("fn id (x){ x }; id(7)")
    assert prog.items == [C.FnDef("id", ("x",), C.Ident("x")), C.Apply(C.Ident("id"), (C.IntLit(7),))]


def test_let_desugars_to_application():
    e = parse_core_exp("let re = get (q) in (re)")
    assert e == C.Apply(C.AnonFn(("re",), C.Ident("re")), (C.Apply(C.Ident("get"), (C.Ident("q"),)),))


def test_pretty_fork():
    assert C.pretty_exp(C.Fork(C.Skip())) == "fork{clskip}"


def test_empty_program():
    assert parse_core("").body is None
    assert C.pretty_core(C.CoreProgram(None)) == ""


def test_trailing_semicolon_dropped():
    assert parse_core("1; 2;") == parse_core("1; 2")


def test_comments_ignored():
    assert parse_core("// hello\n7 // seven\n") == parse_core("7")


@pytest.mark.parametrize("text", ["fn f (x, x) {x}", "1 < 2 < 3", "case 1 of {}", "x := ", "(1", "tailcall(1)",
                                  "cas(1, 2)", "1 :=na", "fn (x {x}"])
def test_parse_errors(text):
    with pytest.raises(ParseError):
        parse_core(text)


def test_parse_error_position():
    with pytest.raises(ParseError) as exc:
        parse_core("fn f (x) {\n  x +\n}")
    assert (exc.value.line, exc.value.col) == (3, 1)

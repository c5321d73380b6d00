from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from krust.rtypes import (
    BOOL_T, I32_T, VOID_T, Array, DuplicateType, FnTy, InvalidDeclaration, LftConst, LftVar, Named, Own,
    Prod, Ref, Registry, Sum, UnknownType, Unsized, is_copy, lifetimes_in, pretty_type, size_of,
    subst_lifetimes, type_equal,
)

QUEUE = Prod((), (I32_T, I32_T, I32_T, Own(Array(I32_T))))
OPTION = Sum((), (BOOL_T, I32_T))


def registry() -> Registry:
    reg = Registry()
    reg.declare("Queue", QUEUE)
    reg.declare("Option", OPTION)
    return reg


def test_declare_entries():
    reg = registry()
    q, o = reg.lookup("Queue"), reg.lookup("Option")
    assert (q.kind, q.count, q.id) == ("prod", 4, 0)
    assert (o.kind, o.count, o.id) == ("sum", 2, 1)
    assert q.elems[4] == Own(Array(I32_T))


def test_duplicate_declaration():
    reg = registry()
    with pytest.raises(DuplicateType):
        reg.declare("Queue", QUEUE)


def test_function_signatures_kept_apart():
    reg = registry()
    sig = FnTy(("a",), (Ref(LftVar("a"), True, Own(Named("Queue"))),), Own(Named("Option")))
    reg.declare("get", sig)
    assert reg.fn_sigs["get"] == sig
    assert "get" not in reg.entries


@pytest.mark.parametrize("ty", [I32_T, Prod((), ()), Prod((), (Named("Queue"),)), Sum((), (Array(I32_T),))])
def test_invalid_declarations(ty):
    with pytest.raises(InvalidDeclaration):
        registry().declare("Bad", ty)


def test_unknown_type():
    with pytest.raises(UnknownType):
        registry().check_wellformed(Own(Named("Nope")))


def test_sizes():
    reg = registry()
    assert size_of(Named("Queue"), reg) == 4
    assert size_of(Named("Option"), reg) == 2
    assert size_of(I32_T, reg) == 1
    assert size_of(I32_T, reg, 5) == 5
    assert size_of(Array(Named("Option")), reg, 3) == 6
    with pytest.raises(Unsized):
        size_of(Array(I32_T), reg)


def test_copy_types():
    assert is_copy(I32_T) and is_copy(BOOL_T) and is_copy(VOID_T)
    assert is_copy(Ref(LftConst(1), False, Own(I32_T)))
    assert not is_copy(Ref(LftConst(1), True, I32_T))
    assert not is_copy(Own(I32_T))


def test_pretty():
    assert pretty_type(Ref(LftVar("a"), True, Own(Named("Queue")))) == "ref('a,mut,own(ty(Queue)))"
    assert pretty_type(Sum((LftConst(2),), (BOOL_T, I32_T))) == "sumTy(lft(2);bool,i32)"
    assert pretty_type(FnTy(("a",), (I32_T,), VOID_T)) == "fnTy('a;i32;void)"


lfts = st.one_of(st.integers(0, 3).map(LftConst), st.sampled_from("ab").map(LftVar))
types = st.recursive(
    st.sampled_from([I32_T, BOOL_T, VOID_T, Named("Queue"), Named("Option")]),
    lambda inner: st.one_of(
        st.builds(Own, inner),
        st.builds(Array, inner),
        st.builds(Ref, lfts, st.booleans(), inner),
        st.builds(Prod, st.lists(lfts, max_size=1).map(tuple), st.lists(inner, min_size=1, max_size=3).map(tuple)),
        st.builds(Sum, st.lists(lfts, max_size=1).map(tuple), st.lists(inner, min_size=1, max_size=3).map(tuple)),
    ),
    max_leaves=8,
)


def _erase(t):
    if isinstance(t, Ref):
        return Ref(LftConst(0), t.mut, _erase(t.inner))
    if isinstance(t, Own):
        return Own(_erase(t.inner))
    if isinstance(t, Array):
        return Array(_erase(t.elem))
    if isinstance(t, Prod):
        return Prod((), tuple(_erase(x) for x in t.fields))
    if isinstance(t, Sum):
        return Sum((), tuple(_erase(x) for x in t.variants))
    return t


@settings(max_examples=200, deadline=None)
@given(types, types, types)
def test_type_equal_is_an_equivalence(a, b, c):
    reg = registry()
    for mode in ("strict", "modulo-lifetimes"):
        assert type_equal(a, a, mode, reg)
        assert type_equal(a, b, mode, reg) == type_equal(b, a, mode, reg)
        if type_equal(a, b, mode, reg) and type_equal(b, c, mode, reg):
            assert type_equal(a, c, mode, reg)


@settings(max_examples=200, deadline=None)
@given(types, types)
def test_modulo_lifetimes_is_equality_after_erasure(a, b):
    reg = registry()
    same = type_equal(_erase(a), _erase(b), "strict", reg)
    assert type_equal(a, b, "modulo-lifetimes", reg) == same
    if type_equal(a, b, "strict", reg):
        assert type_equal(a, b, "modulo-lifetimes", reg)


def test_named_unfolds_to_definition():
    reg = registry()
    assert type_equal(Named("Option"), OPTION, "strict", reg)
    assert not type_equal(Named("Option"), Named("Queue"), "strict", reg)


def test_recursive_named_types_terminate():
    reg = Registry()
    reg.declare("List", Sum((), (VOID_T, Own(Named("List")))))
    reg.declare("List2", Sum((), (VOID_T, Own(Named("List2")))))
    assert type_equal(Named("List"), Named("List2"), "strict", reg)


def test_lifetime_utilities():
    t = FnTy(("a", "b"), (Ref(LftVar("a"), True, Own(I32_T)),), Ref(LftVar("b"), False, I32_T))
    assert lifetimes_in(t) == {"a", "b"}
    r = subst_lifetimes(Ref(LftVar("a"), True, Ref(LftVar("b"), False, I32_T)), {"a": LftConst(2)})
    assert r == Ref(LftConst(2), True, Ref(LftVar("b"), False, I32_T))

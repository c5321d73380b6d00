"""Translation of checked surface programs into the core language.

Surface places are resolved to one of four shapes:

* ``EnvPlace``: a scalar held directly in the core environment;
* ``MemPlace``: a unit of memory whose location is an expression;
* ``InlinePlace``: a compound value, represented by the location of its block;
* ``ValuePlace``: a value with no writable home (a copied scalar, or a
  reference to an owner, which is represented by the owner's pointer).

Let-bound scalars whose address is taken mutably, or that are assigned from
inside a nested let body, are boxed into a one-unit block so that every
alias and every scope sees the same cell.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import core_ast as C
from . import surface_ast as S
from .checker import Annotations, CheckResult
from .rtypes import Array, Named, Own, Prod, Ref, Registry, Sum, size_of


class LoweringError(Exception):
    def __init__(self, message: str, pos=None):
        super().__init__(message)
        self.message = message
        self.pos = pos


@dataclass(frozen=True)
class EnvPlace:
    name: str


@dataclass(frozen=True)
class MemPlace:
    loc: C.Exp


@dataclass(frozen=True)
class InlinePlace:
    loc: C.Exp


@dataclass(frozen=True)
class ValuePlace:
    exp: C.Exp


def mangle(name: str) -> str:
    return name + "'" if name in C.KEYWORDS else name


def _is_compound(t) -> bool:
    return isinstance(t, (Prod, Sum, Named, Array))


class Lowerer:
    def __init__(self, ann: Annotations, reg: Registry, *, tail_seq: bool = True):
        self.ann = ann
        self.reg = reg
        self.tail_seq = tail_seq
        self.counter = 0
        self.boxed: set[int] = set()

    def fresh(self, stem: str) -> str:
        n = self.counter
        self.counter += 1
        return f"#{stem}{n}"

    def type_of(self, e):
        t = self.ann.types.get(id(e))
        if t is None:
            raise LoweringError(f"no type recorded for {type(e).__name__}", getattr(e, "pos", None))
        return t

    # -- boxing analysis -----------------------------------------------------

    def find_boxed(self, roots: list) -> None:
        boxed = set()
        for ix in self.ann.mut_borrowed:
            t = self.ann.var_types.get(ix)
            if t is not None and not _is_compound(t) and not isinstance(t, Own):
                boxed.add(ix)
        let_depth: dict[int, int] = {}

        def walk(e, depth):
            if isinstance(e, S.Let):
                if e.init is not None:
                    walk(e.init, depth)
                ix = self.ann.let_idx.get(id(e))
                if ix is not None:
                    let_depth[ix] = depth
                walk(e.body, depth + 1)
                return
            if isinstance(e, S.Assign) and isinstance(e.lhs, S.Var):
                ix = self.ann.var_idx.get(id(e.lhs))
                if ix in let_depth and let_depth[ix] < depth - 1:
                    t = self.ann.var_types.get(ix)
                    if not _is_compound(t):
                        boxed.add(ix)
            for child in _children(e):
                walk(child, depth)

        for r in roots:
            walk(r, 0)
        self.boxed = boxed

    # -- places --------------------------------------------------------------

    def place(self, e):
        if isinstance(e, S.Var):
            ix = self.ann.var_idx.get(id(e))
            name = C.Ident(mangle(e.name), pos=e.pos)
            if ix in self.boxed:
                return MemPlace(name)
            if _is_compound(self.type_of(e)):
                return InlinePlace(name)
            return EnvPlace(name.name)
        if isinstance(e, S.Deref):
            return self.deref_place(self.base_place(e.exp), self.type_of(e.exp), e)
        if isinstance(e, S.Field):
            kind, derefs, _ = self.ann.field_kind[id(e)]
            p = self.base_place(e.base)
            for t in derefs:
                p = self.deref_place(p, t, e)
            loc = self.compound_loc(p, e)
            if kind == "prod":
                return MemPlace(C.FieldOffset(loc, C.IntLit(e.index.value - 1), pos=e.pos))
            if kind == "sum":
                return MemPlace(C.FieldOffset(loc, C.IntLit(1), pos=e.pos))
            return MemPlace(C.FieldOffset(loc, self.exp(e.index), pos=e.pos))
        raise LoweringError(f"{type(e).__name__} is not a place", getattr(e, "pos", None))

    def base_place(self, e):
        if isinstance(e, S.LVALUES):
            return self.place(e)
        return ValuePlace(self.exp(e))

    def deref_place(self, p, t, node):
        v = self.read(p)
        if isinstance(t, Own):
            return InlinePlace(v) if _is_compound(t.inner) else MemPlace(v)
        if isinstance(t, Ref):
            if _is_compound(t.inner):
                return InlinePlace(v)
            if isinstance(t.inner, Own) or not t.mut:
                return ValuePlace(v)
            return MemPlace(v)
        raise LoweringError("dereference of a non-pointer", getattr(node, "pos", None))

    def compound_loc(self, p, node) -> C.Exp:
        if isinstance(p, InlinePlace):
            return p.loc
        if isinstance(p, ValuePlace):
            return p.exp
        if isinstance(p, EnvPlace):
            return C.Ident(p.name)
        raise LoweringError("field access on a non-compound place", getattr(node, "pos", None))

    @staticmethod
    def read(p) -> C.Exp:
        if isinstance(p, EnvPlace):
            return C.Ident(p.name)
        if isinstance(p, MemPlace):
            return C.Deref("na", p.loc)
        if isinstance(p, InlinePlace):
            return p.loc
        return p.exp

    # -- expressions ---------------------------------------------------------

    def exp(self, e) -> C.Exp:
        pos = getattr(e, "pos", None)
        if isinstance(e, S.IntLit):
            return C.IntLit(e.value, pos=pos)
        if isinstance(e, S.BoolLit):
            return C.IntLit(1 if e.value else 0, pos=pos)
        if isinstance(e, S.VoidLit):
            return C.Skip(pos=pos)
        if isinstance(e, S.LVALUES):
            return self.read(self.place(e))
        if isinstance(e, S.BinOp):
            op = "==" if e.op == "=" else e.op
            return C.BinOp(op, self.exp(e.left), self.exp(e.right), pos=pos)
        if isinstance(e, S.Borrow):
            return self.borrow(e)
        if isinstance(e, S.New):
            return self.new(e)
        if isinstance(e, S.Call):
            return C.Apply(C.Ident(mangle(e.name), pos=pos), tuple(self.exp(a) for a in e.args), pos=pos)
        if isinstance(e, S.Assign):
            return self.assign(e)
        if isinstance(e, S.InjAssign):
            return self.inj(e)
        if isinstance(e, S.Let):
            return self.let(e)
        if isinstance(e, S.Block):
            return self.exp(e.body)
        if isinstance(e, S.Seq):
            first, second = self.exp(e.first), self.exp(e.second)
            if not self.tail_seq:
                return C.Seq(first, second, pos=pos)
            fn = C.AnonFn((self.fresh("anonymous"),), second, pos=pos)
            return C.TailCall(C.Apply(fn, (first,), pos=pos), pos=pos)
        if isinstance(e, S.If):
            return C.Case(self.exp(e.cond), (self.exp(e.els), self.exp(e.then)), pos=pos)
        if isinstance(e, S.Case):
            return self.case(e)
        raise LoweringError(f"cannot lower {type(e).__name__}", pos)

    def borrow(self, e: S.Borrow) -> C.Exp:
        p = self.place(e.exp)
        t = self.type_of(e.exp)
        if _is_compound(t):
            return self.compound_loc(p, e)
        if isinstance(t, Own) or not e.mut:
            return self.read(p)
        if isinstance(p, MemPlace):
            return p.loc
        raise LoweringError("mutable borrow of a value with no memory location", e.pos)

    def new(self, e: S.New) -> C.Exp:
        unit = self.ann.new_size[id(e)]
        if e.count is None:
            return C.Allocate(C.IntLit(unit), pos=e.pos)
        if isinstance(e.count, S.IntLit):
            return C.Allocate(C.IntLit(unit * e.count.value), pos=e.pos)
        n = self.exp(e.count)
        if unit != 1:
            n = C.BinOp("*", n, C.IntLit(unit))
        return C.Allocate(n, pos=e.pos)

    def assign(self, e: S.Assign) -> C.Exp:
        rhs = self.exp(e.rhs)
        p = self.place(e.lhs)
        if isinstance(e.lhs, S.Var) and isinstance(p, InlinePlace):
            return C.EnvAssign(p.loc.name, rhs, pos=e.pos)
        return self.write(p, rhs, e)

    def write(self, p, rhs: C.Exp, node) -> C.Exp:
        if isinstance(p, EnvPlace):
            return C.EnvAssign(p.name, rhs, pos=node.pos)
        if isinstance(p, MemPlace):
            return C.MemAssign(p.loc, "na", rhs, pos=node.pos)
        raise LoweringError("writing a whole compound value or through an owner alias is not supported", node.pos)

    def inj(self, e: S.InjAssign) -> C.Exp:
        p = self.place(e.lhs)
        t = self.type_of(e.lhs)
        while isinstance(t, (Own, Ref)):
            p = self.deref_place(p, t, e)
            t = t.inner
        loc = self.compound_loc(p, e)
        rhs = self.exp(e.rhs)
        if isinstance(loc, C.Ident):
            return C.Seq(
                C.MemAssign(C.FieldOffset(loc, C.IntLit(0)), "na", C.IntLit(e.tag), pos=e.pos),
                C.MemAssign(C.FieldOffset(loc, C.IntLit(1)), "na", rhs, pos=e.pos),
                pos=e.pos,
            )
        tmp = C.Ident(self.fresh("inj"))
        body = C.Seq(
            C.MemAssign(C.FieldOffset(tmp, C.IntLit(0)), "na", C.IntLit(e.tag)),
            C.MemAssign(C.FieldOffset(tmp, C.IntLit(1)), "na", rhs),
        )
        return C.Apply(C.AnonFn((tmp.name,), body), (loc,), pos=e.pos)

    def let(self, e: S.Let) -> C.Exp:
        ix = self.ann.let_idx[id(e)]
        if e.init is not None:
            arg = self.exp(e.init)
        else:
            t = self.ann.var_types.get(ix)
            if t is not None and _is_compound(t):
                arg = C.Allocate(C.IntLit(size_of(t, self.reg)))
            else:
                arg = C.IntLit(0)
        if ix in self.boxed:
            box = self.fresh("box")
            cell = C.Ident(box)
            arg = C.Apply(
                C.AnonFn((box,), C.Seq(C.MemAssign(cell, "na", arg), cell)),
                (C.Allocate(C.IntLit(1)),),
            )
        fn = C.AnonFn((mangle(e.name),), self.exp(e.body), pos=e.pos)
        return C.Apply(fn, (arg,), pos=e.pos)

    def case(self, e: S.Case) -> C.Exp:
        branches = tuple(self.exp(b) for b in e.branches)
        kind = self.ann.case_kind[id(e)]
        if kind == "bool":
            return C.Case(self.exp(e.scrutinee), branches, pos=e.pos)
        scrut = e.scrutinee
        if isinstance(scrut, S.LVALUES):
            p = self.place(scrut)
        else:
            p = ValuePlace(self.exp(scrut))
        t = self.type_of(scrut)
        while isinstance(t, Own):
            p = self.deref_place(p, t, e)
            t = t.inner
        loc = self.compound_loc(p, e)
        tag = C.BinOp("-", C.Deref("na", C.FieldOffset(loc, C.IntLit(0))), C.IntLit(1))
        return C.Case(tag, branches, pos=e.pos)

    # -- program -------------------------------------------------------------

    def program(self, prog: S.SurfaceProgram) -> C.CoreProgram:
        roots = [f.body for f in prog.fns] + ([prog.body] if prog.body is not None else [])
        self.find_boxed(roots)
        items = [
            C.FnDef(mangle(f.name), tuple(mangle(p) for p in f.params), self.exp(f.body), pos=f.pos)
            for f in prog.fns
        ]
        if prog.body is not None:
            items.append(self.exp(prog.body))
        elif any(f.name == "main" for f in prog.fns):
            items.append(C.Apply(C.Ident("main"), ()))
        return C.CoreProgram(C.seq_of(items))


def _children(e) -> list:
    if isinstance(e, (S.IntLit, S.BoolLit, S.VoidLit, S.Var)):
        return []
    if isinstance(e, (S.Deref, S.Borrow)):
        return [e.exp]
    if isinstance(e, S.Field):
        return [e.base, e.index]
    if isinstance(e, S.BinOp):
        return [e.left, e.right]
    if isinstance(e, S.New):
        return [e.count] if e.count is not None else []
    if isinstance(e, S.Call):
        return list(e.args)
    if isinstance(e, (S.Assign, S.InjAssign)):
        return [e.lhs, e.rhs]
    if isinstance(e, S.Block):
        return [e.body]
    if isinstance(e, S.Seq):
        return [e.first, e.second]
    if isinstance(e, S.If):
        return [e.cond, e.then, e.els]
    if isinstance(e, S.Case):
        return [e.scrutinee, *e.branches]
    return []


def lower_program(prog: S.SurfaceProgram, checked: CheckResult, *, tail_seq: bool = True) -> C.CoreProgram:
    if not checked.ok:
        raise LoweringError("cannot lower a program that failed checking")
    return Lowerer(checked.annotations, checked.registry, tail_seq=tail_seq).program(prog)


def lower_exp(e, checked: CheckResult, *, tail_seq: bool = True) -> C.Exp:
    lw = Lowerer(checked.annotations, checked.registry, tail_seq=tail_seq)
    lw.find_boxed([e])
    return lw.exp(e)

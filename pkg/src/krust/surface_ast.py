"""Surface-language syntax tree and pretty printer."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .rtypes import RType, pretty_type

Pos = Optional[tuple]

KEYWORDS = frozenset(
    "let mut imm in if then else case of begin end fun ret newlft endlft call new true false void inj mod".split()
)


def _pos():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class IntLit:
    value: int
    pos: Pos = _pos()


@dataclass(frozen=True)
class BoolLit:
    value: bool
    pos: Pos = _pos()


@dataclass(frozen=True)
class VoidLit:
    pos: Pos = _pos()


@dataclass(frozen=True)
class Var:
    name: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class Deref:
    exp: "Exp"
    pos: Pos = _pos()


@dataclass(frozen=True)
class Field:
    base: "Exp"
    index: "Exp"  # IntLit for `.N`, any rvalue for `.(e)`
    pos: Pos = _pos()


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * mod = > <
    left: "Exp"
    right: "Exp"
    pos: Pos = _pos()


@dataclass(frozen=True)
class Borrow:
    mut: bool
    exp: "Exp"
    pos: Pos = _pos()


@dataclass(frozen=True)
class New:
    ty: RType
    count: Optional["Exp"] = None
    pos: Pos = _pos()


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple
    pos: Pos = _pos()


@dataclass(frozen=True)
class Assign:
    lhs: "Exp"
    rhs: "Exp"
    pos: Pos = _pos()


@dataclass(frozen=True)
class InjAssign:
    lhs: "Exp"
    tag: int
    rhs: "Exp"
    pos: Pos = _pos()


@dataclass(frozen=True)
class Let:
    mut: bool
    name: str
    init: Optional["Exp"]
    body: "Exp"
    pos: Pos = _pos()


@dataclass(frozen=True)
class Block:
    body: "Exp"
    pos: Pos = _pos()


@dataclass(frozen=True)
class Seq:
    first: "Exp"
    second: "Exp"
    pos: Pos = _pos()


@dataclass(frozen=True)
class If:
    cond: "Exp"
    then: "Exp"
    els: "Exp"
    pos: Pos = _pos()


@dataclass(frozen=True)
class Case:
    scrutinee: "Exp"
    branches: tuple
    pos: Pos = _pos()


Exp = Union[
    IntLit, BoolLit, VoidLit, Var, Deref, Field, BinOp, Borrow, New, Call, Assign, InjAssign,
    Let, Block, Seq, If, Case,
]

LVALUES = (Var, Deref, Field)


@dataclass(frozen=True)
class TypeDecl:
    name: str
    ty: RType
    pos: Pos = _pos()


@dataclass(frozen=True)
class FnDef:
    name: str
    params: tuple
    body: Exp
    ret: Optional[str] = None
    pos: Pos = _pos()


@dataclass(frozen=True)
class SurfaceProgram:
    decls: tuple = ()
    fns: tuple = ()
    body: Optional[Exp] = None


# --------------------------------------------------------------------------
# Pretty printing
# --------------------------------------------------------------------------

P_SEQ, P_EXP, P_CMP, P_ADD, P_MUL, P_UNARY, P_POSTFIX, P_PRIMARY = range(8)
_OP_PREC = {"=": P_CMP, "<": P_CMP, ">": P_CMP, "+": P_ADD, "-": P_ADD, "*": P_MUL, "mod": P_MUL}


def _prec(e: Exp) -> int:
    if isinstance(e, Seq):
        return P_SEQ
    if isinstance(e, (Let, If, Case, Block, Assign, InjAssign)):
        return P_EXP
    if isinstance(e, BinOp):
        return _OP_PREC[e.op]
    if isinstance(e, (Deref, Borrow)):
        return P_UNARY
    if isinstance(e, Field):
        return P_POSTFIX
    return P_PRIMARY


def seq_items(e: Exp) -> list:
    out = []
    while isinstance(e, Seq):
        out.append(e.first)
        e = e.second
    out.append(e)
    return out


class _Printer:
    unit = "  "

    def braces(self, e: Exp, d: int) -> str:
        items = seq_items(e)
        if len(items) == 1 and not isinstance(e, (Let, If, Case)):
            return "{" + self.exp(e, P_SEQ, d) + "}"
        pad = self.unit * (d + 1)
        return "{\n" + ";\n".join(pad + self.exp(x, P_EXP, d + 1) for x in items) + "\n" + self.unit * d + "}"

    def exp(self, e: Exp, ctx: int, d: int = 0) -> str:
        s = self._raw(e, d)
        return "(" + s + ")" if _prec(e) < ctx else s

    def _raw(self, e: Exp, d: int) -> str:
        p = self.exp
        if isinstance(e, IntLit):
            return str(e.value)
        if isinstance(e, BoolLit):
            return "true" if e.value else "false"
        if isinstance(e, VoidLit):
            return "void"
        if isinstance(e, Var):
            return e.name
        if isinstance(e, Deref):
            return "*" + p(e.exp, P_UNARY, d)
        if isinstance(e, Borrow):
            return "& " + ("mut " if e.mut else "imm ") + p(e.exp, P_UNARY, d)
        if isinstance(e, Field):
            base = p(e.base, P_POSTFIX, d)
            if isinstance(e.index, IntLit):
                return f"{base}.{e.index.value}"
            return f"{base}.(" + p(e.index, P_SEQ, d) + ")"
        if isinstance(e, BinOp):
            lvl = _OP_PREC[e.op]
            if lvl == P_CMP:
                return p(e.left, P_ADD, d) + f" {e.op} " + p(e.right, P_ADD, d)
            return p(e.left, lvl, d) + f" {e.op} " + p(e.right, lvl + 1, d)
        if isinstance(e, New):
            inner = pretty_type(e.ty)
            if e.count is not None:
                inner += ", " + p(e.count, P_CMP, d)
            return f"new({inner})"
        if isinstance(e, Call):
            return f"call {e.name}(" + ", ".join(p(a, P_CMP, d) for a in e.args) + ")"
        if isinstance(e, Assign):
            return p(e.lhs, P_CMP, d) + " := " + p(e.rhs, P_CMP, d)
        if isinstance(e, InjAssign):
            return p(e.lhs, P_CMP, d) + f" :=inj {e.tag} " + p(e.rhs, P_CMP, d)
        if isinstance(e, Let):
            head = "let " + ("mut " if e.mut else "") + e.name
            if e.init is not None:
                head += " = " + p(e.init, P_CMP, d)
            return head + " in " + self.braces(e.body, d)
        if isinstance(e, Block):
            return "begin " + p(e.body, P_SEQ, d) + " end"
        if isinstance(e, Seq):
            return p(e.first, P_EXP, d) + "; " + p(e.second, P_SEQ, d)
        if isinstance(e, If):
            return "if " + p(e.cond, P_CMP, d) + " then " + self.braces(e.then, d) + " else " + self.braces(e.els, d)
        if isinstance(e, Case):
            return "case " + p(e.scrutinee, P_CMP, d) + " of {" + ", ".join(p(b, P_SEQ, d) for b in e.branches) + "}"
        raise TypeError(f"not a surface expression: {e!r}")


def pretty_exp(e: Exp) -> str:
    return _Printer().exp(e, P_SEQ)


def pretty_surface(prog: SurfaceProgram) -> str:
    pr = _Printer()
    lines = [f"{d.name} :=: {pretty_type(d.ty)}" for d in prog.decls]
    for f in prog.fns:
        head = f"fun {f.name}(" + ", ".join(f.params) + ")"
        if f.ret is not None:
            head += f" ret {f.ret}"
        body = "\n".join(pr.unit + ln for ln in pr.exp(f.body, P_SEQ, 0).split("\n"))
        lines.append(head + " newlft\n" + body + "\nendlft")
    if prog.body is not None:
        lines.append(pr.exp(prog.body, P_SEQ, 0))
    return "\n".join(lines) + "\n" if lines else ""

"""Core-language syntax tree and its pretty printer."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .lexer import escape

Pos = Optional[tuple]

KEYWORDS = frozenset(
    "fn case of fork let in clskip allocate tailcall mod na at cas append free".split()
)


@dataclass(frozen=True)
class Ident:
    name: str
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class IntLit:
    value: int
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class StrLit:
    value: str
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Skip:
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Deref:
    order: str  # "na" | "at"
    exp: "Exp"
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * mod == < >
    left: "Exp"
    right: "Exp"
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Case:
    scrutinee: "Exp"
    branches: tuple
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class FnDef:
    name: str
    params: tuple
    body: "Exp"
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class AnonFn:
    params: tuple
    body: "Exp"
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Apply:
    fn: "Exp"
    args: tuple
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class TailCall:
    call: Apply
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Fork:
    body: "Exp"
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class EnvAssign:
    name: str
    exp: "Exp"
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class MemAssign:
    target: "Exp"
    order: str
    value: "Exp"
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class FieldOffset:
    base: "Exp"
    index: "Exp"
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Allocate:
    size: "Exp"
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Seq:
    first: "Exp"
    second: "Exp"
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Cas:
    loc: "Exp"
    expected: "Exp"
    new: "Exp"
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Append:
    loc: "Exp"
    value: "Exp"
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Free:
    loc: "Exp"
    pos: Pos = field(default=None, compare=False, repr=False)


Exp = Union[
    Ident, IntLit, StrLit, Skip, Deref, BinOp, Case, FnDef, AnonFn, Apply, TailCall, Fork,
    EnvAssign, MemAssign, FieldOffset, Allocate, Seq, Cas, Append, Free,
]


@dataclass(frozen=True)
class CoreProgram:
    body: Optional[Exp]

    @property
    def items(self) -> list:
        """Top-level expressions in order (the program's ``;`` chain flattened)."""
        out = []
        e = self.body
        while isinstance(e, Seq):
            out.append(e.first)
            e = e.second
        if e is not None:
            out.append(e)
        return out


def seq_of(items: list) -> Optional[Exp]:
    """Right-nested Seq of ``items``; None for an empty list."""
    if not items:
        return None
    acc = items[-1]
    for e in reversed(items[:-1]):
        acc = Seq(e, acc)
    return acc


# --------------------------------------------------------------------------
# Pretty printing
# --------------------------------------------------------------------------

P_SEQ, P_ASSIGN, P_CMP, P_ADD, P_MUL, P_UNARY, P_POSTFIX, P_PRIMARY = range(8)

_OP_PREC = {"==": P_CMP, "<": P_CMP, ">": P_CMP, "+": P_ADD, "-": P_ADD, "*": P_MUL, "mod": P_MUL}


def _prec(e: Exp) -> int:
    if isinstance(e, Seq):
        return P_SEQ
    if isinstance(e, (EnvAssign, MemAssign)):
        return P_ASSIGN
    if isinstance(e, BinOp):
        return _OP_PREC[e.op]
    if isinstance(e, Deref):
        return P_UNARY
    if isinstance(e, (Apply, FieldOffset)):
        return P_POSTFIX
    return P_PRIMARY


class _Printer:
    def __init__(self, indent: str = "  "):
        self.unit = indent

    def block(self, e: Exp, depth: int) -> str:
        """Render a braced body, one sequence item per line when it has several."""
        items = CoreProgram(e).items
        if len(items) <= 1:
            return "{" + self.exp(e, P_SEQ, depth) + "}"
        pad = self.unit * (depth + 1)
        lines = [pad + self.exp(x, P_ASSIGN, depth + 1) for x in items]
        return "{\n" + ";\n".join(lines) + "\n" + self.unit * depth + "}"

    def exp(self, e: Exp, ctx: int, depth: int = 0) -> str:
        s = self._raw(e, depth)
        return "(" + s + ")" if _prec(e) < ctx else s

    def _raw(self, e: Exp, d: int) -> str:
        p = self.exp
        if isinstance(e, Ident):
            return e.name
        if isinstance(e, IntLit):
            return str(e.value)
        if isinstance(e, StrLit):
            return escape(e.value)
        if isinstance(e, Skip):
            return "clskip"
        if isinstance(e, Deref):
            return f"*{e.order} " + p(e.exp, P_UNARY, d)
        if isinstance(e, BinOp):
            lvl = _OP_PREC[e.op]
            if lvl == P_CMP:
                return p(e.left, P_ADD, d) + f" {e.op} " + p(e.right, P_ADD, d)
            return p(e.left, lvl, d) + f" {e.op} " + p(e.right, lvl + 1, d)
        if isinstance(e, Case):
            branches = ", ".join(p(b, P_SEQ, d) for b in e.branches)
            return "case " + p(e.scrutinee, P_SEQ, d) + " of {" + branches + "}"
        if isinstance(e, FnDef):
            return f"fn {e.name} (" + ", ".join(e.params) + ") " + self.block(e.body, d)
        if isinstance(e, AnonFn):
            return "fn (" + ", ".join(e.params) + ") " + self.block(e.body, d)
        if isinstance(e, Apply):
            callee = p(e.fn, P_POSTFIX, d)
            if isinstance(e.fn, (FnDef, AnonFn)):
                callee = "(" + callee + ")"
            return callee + "(" + ", ".join(p(a, P_SEQ, d) for a in e.args) + ")"
        if isinstance(e, TailCall):
            return "tailcall(" + p(e.call, P_SEQ, d) + ")"
        if isinstance(e, Fork):
            return "fork" + self.block(e.body, d)
        if isinstance(e, EnvAssign):
            return f"{e.name} := " + p(e.exp, P_CMP, d)
        if isinstance(e, MemAssign):
            return p(e.target, P_CMP, d) + f" :={e.order} " + p(e.value, P_CMP, d)
        if isinstance(e, FieldOffset):
            base = p(e.base, P_POSTFIX, d)
            if isinstance(e.index, IntLit):
                return f"{base}.{e.index.value}"
            return f"{base}.(" + p(e.index, P_SEQ, d) + ")"
        if isinstance(e, Allocate):
            return "allocate(" + p(e.size, P_SEQ, d) + ")"
        if isinstance(e, Seq):
            return p(e.first, P_ASSIGN, d) + "; " + p(e.second, P_SEQ, d)
        if isinstance(e, Cas):
            return "cas(" + ", ".join(p(x, P_SEQ, d) for x in (e.loc, e.expected, e.new)) + ")"
        if isinstance(e, Append):
            return "append(" + p(e.loc, P_SEQ, d) + ", " + p(e.value, P_SEQ, d) + ")"
        if isinstance(e, Free):
            return "free(" + p(e.loc, P_SEQ, d) + ")"
        raise TypeError(f"not a core expression: {e!r}")


def pretty_exp(e: Exp) -> str:
    return _Printer().exp(e, P_SEQ)


def pretty_core(prog: CoreProgram) -> str:
    if prog.body is None:
        return ""
    pr = _Printer()
    return ";\n".join(pr.exp(x, P_ASSIGN) for x in prog.items) + "\n"

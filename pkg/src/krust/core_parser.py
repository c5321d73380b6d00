"""Recursive-descent parser for core-language text (``.kcl``)."""

from __future__ import annotations

from .core_ast import (
    KEYWORDS, Allocate, AnonFn, Append, Apply, BinOp, Cas, Case, CoreProgram, Deref, EnvAssign,
    FieldOffset, FnDef, Fork, Free, Ident, IntLit, MemAssign, Seq, Skip, StrLit, TailCall,
)
from .lexer import ParseError, TokenStream, tokenize, unescape

_CMP = ("==", "<", ">")


class _CoreParser:
    def __init__(self, text: str):
        self.ts = TokenStream(tokenize(text, allow_hash_idents=True))

    def pos(self):
        t = self.ts.tok
        return (t.line, t.col)

    def program(self) -> CoreProgram:
        if self.ts.at_kind("EOF"):
            return CoreProgram(None)
        body = self.seq()
        if not self.ts.at_kind("EOF"):
            self.ts.error({";", "end of input"})
        return CoreProgram(body)

    def seq(self):
        pos = self.pos()
        first = self.assign()
        if self.ts.accept(";"):
            # tolerate a trailing separator before a closer
            if self.ts.at("}") or self.ts.at(")") or self.ts.at(",") or self.ts.at_kind("EOF"):
                return first
            return Seq(first, self.seq(), pos=pos)
        return first

    def assign(self):
        pos = self.pos()
        if self.ts.at("let"):
            return self.let()
        lhs = self.cmp()
        if self.ts.at(":="):
            self.ts.advance()
            if self.ts.at("na") or self.ts.at("at"):
                order = self.ts.advance().text
                return MemAssign(lhs, order, self.cmp(), pos=pos)
            if not isinstance(lhs, Ident):
                raise ParseError(pos[0], pos[1], "left side of ':=' must be an identifier", frozenset({"identifier"}))
            return EnvAssign(lhs.name, self.cmp(), pos=pos)
        return lhs

    def let(self):
        pos = self.pos()
        self.ts.expect("let")
        name = self.ident()
        self.ts.expect("=")
        init = self.seq()
        self.ts.expect("in")
        body = self.seq()
        return Apply(AnonFn((name,), body, pos=pos), (init,), pos=pos)

    def cmp(self):
        pos = self.pos()
        left = self.add()
        if any(self.ts.at(op) for op in _CMP):
            op = self.ts.advance().text
            left = BinOp(op, left, self.add(), pos=pos)
            if any(self.ts.at(o) for o in _CMP):
                self.ts.error(set(), "comparison operators do not associate; add parentheses")
        return left

    def add(self):
        pos = self.pos()
        left = self.mul()
        while self.ts.at("+") or self.ts.at("-"):
            op = self.ts.advance().text
            left = BinOp(op, left, self.mul(), pos=pos)
        return left

    def mul(self):
        pos = self.pos()
        left = self.unary()
        while self.ts.at("*") or self.ts.at("mod"):
            op = self.ts.advance().text
            left = BinOp(op, left, self.unary(), pos=pos)
        return left

    def unary(self):
        pos = self.pos()
        if self.ts.at("*"):
            self.ts.advance()
            order = self.ts.expect("na", "at").text
            return Deref(order, self.unary(), pos=pos)
        return self.postfix()

    def postfix(self):
        pos = self.pos()
        e = self.primary()
        while True:
            if self.ts.at("("):
                e = Apply(e, self.args(), pos=pos)
            elif self.ts.at("."):
                self.ts.advance()
                if self.ts.at_kind("INT"):
                    t = self.ts.advance()
                    e = FieldOffset(e, IntLit(int(t.text), pos=(t.line, t.col)), pos=pos)
                else:
                    self.ts.expect("(")
                    idx = self.seq()
                    self.ts.expect(")")
                    e = FieldOffset(e, idx, pos=pos)
            else:
                return e

    def args(self) -> tuple:
        self.ts.expect("(")
        out = []
        if not self.ts.at(")"):
            out.append(self.seq())
            while self.ts.accept(","):
                out.append(self.seq())
        self.ts.expect(")")
        return tuple(out)

    def ident(self) -> str:
        t = self.ts.tok
        if t.kind != "IDENT" or t.text in KEYWORDS:
            self.ts.error({"identifier"})
        return self.ts.advance().text

    def params(self) -> tuple:
        self.ts.expect("(")
        out = []
        if not self.ts.at(")"):
            out.append(self.ident())
            while self.ts.accept(","):
                out.append(self.ident())
        self.ts.expect(")")
        if len(set(out)) != len(out):
            self.ts.error(set(), "duplicate parameter name")
        return tuple(out)

    def body(self):
        self.ts.expect("{")
        if self.ts.at("}"):
            pos = self.pos()
            self.ts.advance()
            return Skip(pos=pos)
        e = self.seq()
        self.ts.expect("}")
        return e

    def primary(self):
        ts = self.ts
        t = ts.tok
        pos = (t.line, t.col)
        if t.kind == "INT":
            ts.advance()
            return IntLit(int(t.text), pos=pos)
        if t.kind == "STRING":
            ts.advance()
            return StrLit(unescape(t.text), pos=pos)
        if ts.at("("):
            ts.advance()
            e = self.seq()
            ts.expect(")")
            return e
        if t.kind == "IDENT":
            kw = t.text
            if kw not in KEYWORDS:
                ts.advance()
                return Ident(kw, pos=pos)
            if kw == "clskip":
                ts.advance()
                return Skip(pos=pos)
            if kw == "fn":
                ts.advance()
                if ts.at_kind("IDENT"):
                    name = self.ident()
                    params = self.params()
                    return FnDef(name, params, self.body(), pos=pos)
                params = self.params()
                return AnonFn(params, self.body(), pos=pos)
            if kw == "case":
                ts.advance()
                scrut = self.seq()
                ts.expect("of")
                ts.expect("{")
                branches = [self.seq()]
                while ts.accept(","):
                    branches.append(self.seq())
                ts.expect("}")
                return Case(scrut, tuple(branches), pos=pos)
            if kw == "fork":
                ts.advance()
                return Fork(self.body(), pos=pos)
            if kw == "tailcall":
                ts.advance()
                ts.expect("(")
                inner = self.seq()
                ts.expect(")")
                if not isinstance(inner, Apply):
                    raise ParseError(pos[0], pos[1], "tailcall expects a function application", frozenset({"application"}))
                return TailCall(inner, pos=pos)
            if kw in ("allocate", "free", "append", "cas"):
                ts.advance()
                args = self.args()
                arity = {"allocate": 1, "free": 1, "append": 2, "cas": 3}[kw]
                if len(args) != arity:
                    raise ParseError(pos[0], pos[1], f"{kw} takes {arity} argument(s)", frozenset())
                cls = {"allocate": Allocate, "free": Free, "append": Append, "cas": Cas}[kw]
                return cls(*args, pos=pos)
        ts.error({"expression"})


def parse_core(text: str) -> CoreProgram:
    return _CoreParser(text).program()


def parse_core_exp(text: str):
    """Parse a single core expression (a whole program body)."""
    prog = parse_core(text)
    if prog.body is None:
        raise ParseError(1, 1, "expected expression, found end of input", frozenset({"expression"}))
    return prog.body

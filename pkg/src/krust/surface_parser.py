"""Recursive-descent parser for surface programs (``.krs``)."""

from __future__ import annotations

from . import surface_ast as S
from .lexer import ParseError, TokenStream, tokenize
from .rtypes import (
    Array, BOOL_T, FnTy, I32_T, LftConst, LftVar, Named, Own, Prod, Ref, Sum, VOID_T,
)

_CMP = ("=", "<", ">")
_SEQ_END = ("}", "end", "endlft", ",", ")")


class _SurfaceParser:
    def __init__(self, text: str):
        self.ts = TokenStream(tokenize(text))

    def pos(self):
        t = self.ts.tok
        return (t.line, t.col)

    def fail(self, pos, message: str, expected=()):
        raise ParseError(pos[0], pos[1], message, frozenset(expected))

    # -- program -------------------------------------------------------------

    def program(self) -> S.SurfaceProgram:
        ts = self.ts
        decls = []
        while ts.at_kind("IDENT") and ts.peek().kind == "SYM" and ts.peek().text == ":=:":
            pos = self.pos()
            name = self.ident()
            ts.expect(":=:")
            decls.append(S.TypeDecl(name, self.rtype(), pos=pos))
        # a stray closing brace after the declarations is tolerated
        ts.accept("}")
        fns = []
        while ts.at("fun"):
            fns.append(self.fndef())
        body = None
        if not ts.at_kind("EOF"):
            body = self.seq()
        if not ts.at_kind("EOF"):
            ts.error({";", "end of input"})
        return S.SurfaceProgram(tuple(decls), tuple(fns), body)

    def fndef(self) -> S.FnDef:
        ts = self.ts
        pos = self.pos()
        ts.expect("fun")
        name = self.ident()
        ts.expect("(")
        params = []
        if not ts.at(")"):
            params.append(self.ident())
            while ts.accept(","):
                params.append(self.ident())
        ts.expect(")")
        ret = None
        if ts.accept("ret"):
            ret = self.ident()
        ts.expect("newlft")
        body = self.seq() if not ts.at("endlft") else S.VoidLit(pos=self.pos())
        ts.expect("endlft")
        return S.FnDef(name, tuple(params), body, ret, pos=pos)

    def ident(self) -> str:
        t = self.ts.tok
        if t.kind != "IDENT" or t.text in S.KEYWORDS:
            self.ts.error({"identifier"})
        return self.ts.advance().text

    # -- expressions ---------------------------------------------------------

    def at_seq_end(self) -> bool:
        return self.ts.at_kind("EOF") or any(self.ts.at(x) for x in _SEQ_END)

    def seq(self):
        pos = self.pos()
        first = self.exp()
        if self.ts.accept(";"):
            if self.at_seq_end():
                return S.Seq(first, S.VoidLit(pos=self.pos()), pos=pos)
            return S.Seq(first, self.seq(), pos=pos)
        return first

    def exp(self):
        ts = self.ts
        pos = self.pos()
        if ts.at("let"):
            return self.let()
        if ts.at("if"):
            ts.advance()
            cond = self.rvalue()
            ts.expect("then")
            then = self.braced()
            ts.expect("else")
            return S.If(cond, then, self.braced(), pos=pos)
        if ts.at("case"):
            ts.advance()
            scrut = self.rvalue()
            ts.expect("of")
            ts.expect("{")
            branches = [self.seq()]
            while ts.accept(","):
                branches.append(self.seq())
            ts.expect("}")
            return S.Case(scrut, tuple(branches), pos=pos)
        if ts.at("begin"):
            ts.advance()
            body = self.seq()
            ts.expect("end")
            return S.Block(body, pos=pos)
        if ts.at("{"):
            return self.braced()
        lhs = self.rvalue()
        if ts.at(":="):
            ts.advance()
            if not isinstance(lhs, S.LVALUES):
                self.fail(pos, "left side of ':=' must be a variable, dereference or field", {"lvalue"})
            if ts.accept("inj"):
                t = ts.expect_kind("INT", "integer tag")
                return S.InjAssign(lhs, int(t.text), self.rvalue(), pos=pos)
            return S.Assign(lhs, self.rvalue(), pos=pos)
        return lhs

    def braced(self):
        self.ts.expect("{")
        if self.ts.at("}"):
            pos = self.pos()
            self.ts.advance()
            return S.VoidLit(pos=pos)
        body = self.seq()
        self.ts.expect("}")
        return body

    def let(self):
        ts = self.ts
        pos = self.pos()
        ts.expect("let")
        mut = False
        if ts.accept("mut"):
            mut = True
        else:
            ts.accept("imm")
        name = self.ident()
        init = None
        if ts.accept("="):
            init = self.rvalue()
        if ts.accept("in"):
            body = self.braced() if ts.at("{") else self.exp()
        elif ts.accept(";"):
            # `let x = e; rest`: the rest of the sequence is the scope
            body = S.VoidLit(pos=self.pos()) if self.at_seq_end() else self.seq()
        elif self.at_seq_end():
            body = S.VoidLit(pos=self.pos())
        else:
            ts.error({"in", ";", "=" if init is None else "in"})
        return S.Let(mut, name, init, body, pos=pos)

    def rvalue(self):
        pos = self.pos()
        left = self.add()
        if any(self.ts.at(op) for op in _CMP):
            op = self.ts.advance().text
            left = S.BinOp(op, left, self.add(), pos=pos)
            if any(self.ts.at(o) for o in _CMP):
                self.ts.error(set(), "comparison operators do not associate; add parentheses")
        return left

    def add(self):
        pos = self.pos()
        left = self.mul()
        while self.ts.at("+") or self.ts.at("-"):
            op = self.ts.advance().text
            left = S.BinOp(op, left, self.mul(), pos=pos)
        return left

    def mul(self):
        pos = self.pos()
        left = self.unary()
        while self.ts.at("*") or self.ts.at("mod"):
            op = self.ts.advance().text
            left = S.BinOp(op, left, self.unary(), pos=pos)
        return left

    def unary(self):
        ts = self.ts
        pos = self.pos()
        if ts.accept("*"):
            return S.Deref(self.unary(), pos=pos)
        if ts.accept("&"):
            m = ts.expect("mut", "imm").text
            return S.Borrow(m == "mut", self.unary(), pos=pos)
        return self.postfix()

    def postfix(self):
        ts = self.ts
        pos = self.pos()
        e = self.primary()
        while ts.at("."):
            ts.advance()
            if ts.at_kind("INT"):
                t = ts.advance()
                e = S.Field(e, S.IntLit(int(t.text), pos=(t.line, t.col)), pos=pos)
            else:
                ts.expect("(")
                idx = self.seq()
                ts.expect(")")
                e = S.Field(e, idx, pos=pos)
        return e

    def primary(self):
        ts = self.ts
        t = ts.tok
        pos = (t.line, t.col)
        if t.kind == "INT":
            ts.advance()
            return S.IntLit(int(t.text), pos=pos)
        if ts.at("("):
            ts.advance()
            e = self.seq()
            ts.expect(")")
            return e
        if t.kind == "IDENT":
            if t.text == "true" or t.text == "false":
                ts.advance()
                return S.BoolLit(t.text == "true", pos=pos)
            if t.text == "void":
                ts.advance()
                return S.VoidLit(pos=pos)
            if t.text == "new":
                ts.advance()
                ts.expect("(")
                ty = self.rtype()
                count = None
                if ts.accept(","):
                    count = self.rvalue()
                ts.expect(")")
                return S.New(ty, count, pos=pos)
            if t.text == "call":
                ts.advance()
                name = self.ident()
                ts.expect("(")
                args = []
                if not ts.at(")"):
                    args.append(self.rvalue())
                    while ts.accept(","):
                        args.append(self.rvalue())
                ts.expect(")")
                return S.Call(name, tuple(args), pos=pos)
            if t.text not in S.KEYWORDS:
                ts.advance()
                return S.Var(t.text, pos=pos)
        ts.error({"expression"})

    # -- types ---------------------------------------------------------------

    def lifetime(self):
        ts = self.ts
        if ts.at_kind("LIFETIME"):
            return LftVar(ts.advance().text[1:])
        if ts.at("lft"):
            ts.advance()
            ts.expect("(")
            n = int(ts.expect_kind("INT", "integer").text)
            ts.expect(")")
            return LftConst(n)
        ts.error({"lifetime"})

    def at_lifetime(self) -> bool:
        return self.ts.at_kind("LIFETIME") or (self.ts.at("lft") and self.ts.peek().text == "(")

    def rtype(self):
        ts = self.ts
        t = ts.tok
        if t.kind != "IDENT":
            ts.error({"type"})
        name = t.text
        if name == "i32":
            ts.advance()
            return I32_T
        if name == "bool":
            ts.advance()
            return BOOL_T
        if name == "void":
            ts.advance()
            return VOID_T
        if name in ("own", "array", "ty"):
            ts.advance()
            ts.expect("(")
            if name == "ty":
                inner = Named(self.ident())
            else:
                inner = self.rtype()
                inner = Own(inner) if name == "own" else Array(inner)
            ts.expect(")")
            return inner
        if name == "ref":
            ts.advance()
            ts.expect("(")
            lft = self.lifetime()
            ts.expect(",")
            m = ts.expect("mut", "imm").text
            ts.expect(",")
            inner = self.rtype()
            ts.expect(")")
            return Ref(lft, m == "mut", inner)
        if name in ("prodTy", "sumTy"):
            ts.advance()
            ts.expect("(")
            lfts = []
            if self.at_lifetime():
                lfts.append(self.lifetime())
                while ts.accept(","):
                    lfts.append(self.lifetime())
                ts.expect(";")
            elems = [self.rtype()]
            while ts.accept(","):
                elems.append(self.rtype())
            ts.expect(")")
            cls = Prod if name == "prodTy" else Sum
            return cls(tuple(lfts), tuple(elems))
        if name == "fnTy":
            ts.advance()
            ts.expect("(")
            lvars = []
            if ts.at_kind("LIFETIME"):
                lvars.append(ts.advance().text[1:])
                while ts.accept(","):
                    lvars.append(ts.expect_kind("LIFETIME", "lifetime variable").text[1:])
            ts.expect(";")
            params = []
            if not ts.at(";"):
                params.append(self.rtype())
                while ts.accept(","):
                    params.append(self.rtype())
            ts.expect(";")
            ret = self.rtype()
            ts.expect(")")
            return FnTy(tuple(lvars), tuple(params), ret)
        ts.error({"type"})


def parse_surface(text: str) -> S.SurfaceProgram:
    return _SurfaceParser(text).program()


def parse_surface_exp(text: str):
    prog = parse_surface(text)
    if prog.body is None or prog.decls or prog.fns:
        raise ParseError(1, 1, "expected a single expression", frozenset({"expression"}))
    return prog.body

"""Tokenizer shared by the surface and core parsers."""

from __future__ import annotations

import re
from dataclasses import dataclass


class ParseError(Exception):
    """Syntax error with a source position and the set of expected tokens."""

    def __init__(self, line: int, col: int, message: str, expected: frozenset[str] = frozenset()):
        self.line = line
        self.col = col
        self.message = message
        self.expected = expected
        super().__init__(f"{line}:{col}: {message}")


@dataclass(frozen=True)
class Token:
    kind: str  # INT, IDENT, LIFETIME, STRING, SYM, EOF
    text: str
    line: int
    col: int

    def describe(self) -> str:
        if self.kind == "EOF":
            return "end of input"
        return repr(self.text)


# longest symbols first
_SYMBOLS = (":=:", ":=", "==", "(", ")", "{", "}", ",", ";", ".", "*", "&", "+", "-", "=", "<", ">")

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*)
  | (?P<int>[0-9]+)
  | (?P<ident>\#?[A-Za-z_][A-Za-z0-9_']*)
  | (?P<lifetime>'[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<sym>:=:|:=|==|[(){},;.*&+\-=<>])
    """,
    re.VERBOSE,
)


def tokenize(text: str, *, allow_hash_idents: bool = False) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line, col = 1, 1
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(line, col, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        lexeme = m.group()
        if kind == "ident" and lexeme.startswith("#") and not allow_hash_idents:
            raise ParseError(line, col, "unexpected character '#'")
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind.upper() if kind != "sym" else "SYM", lexeme, line, col))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            col = len(lexeme) - lexeme.rfind("\n")
        else:
            col += len(lexeme)
        pos = m.end()
    tokens.append(Token("EOF", "", line, col))
    return tokens


def unescape(literal: str) -> str:
    body = literal[1:-1]
    return re.sub(r"\\(.)", lambda m: {"n": "\n", "t": "\t"}.get(m.group(1), m.group(1)), body)


def escape(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t") + '"'


class TokenStream:
    """Cursor over a token list with expectation tracking for diagnostics."""

    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset: int = 1) -> Token:
        i = min(self.pos + offset, len(self.tokens) - 1)
        return self.tokens[i]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("SYM", "IDENT") and t.text == text

    def at_kind(self, kind: str) -> bool:
        return self.tok.kind == kind

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "EOF":
            self.pos += 1
        return t

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.advance()
            return True
        return False

    def expect(self, *texts: str) -> Token:
        for text in texts:
            if self.at(text):
                return self.advance()
        self.error(set(texts))

    def expect_kind(self, kind: str, what: str) -> Token:
        if self.tok.kind == kind:
            return self.advance()
        self.error({what})

    def error(self, expected: set[str], message: str | None = None):
        t = self.tok
        exp = frozenset(expected)
        if message is None:
            message = f"expected {' or '.join(sorted(exp))}, found {t.describe()}"
        raise ParseError(t.line, t.col, message, exp)

"""Recursive-descent parser for the equation DSL.

Grammar::

    expr   = term { ("+"|"-") term } ;
    term   = factor { ("*"|"/") factor } ;
    factor = "-" factor | power ;
    power  = atom [ "^" factor ] ;
    atom   = NUMBER | "t" | varref | func "(" expr ")" | agg | "(" expr ")" ;
    varref = "x" INT "[" "t" "-" INT "]" ;
    agg    = ("integral"|"wsum"|"wmean") "(" "x" INT "," INT "," INT ")" ;
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ExprSyntaxError, UnknownFunction, UnknownVariable, ZeroLag
from .expr import Binary, Const, ExprNode, TimeIndex, Unary, VarRef, WindowAgg

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<var>x\d+)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),\[\]])
    """,
    re.VERBOSE,
)

FUNCTIONS = {"sin", "cos", "tan", "exp", "log", "sqrt", "abs"}
AGGREGATES = {"integral": "integral", "wsum": "sum", "wmean": "mean"}
_BINARY = {"+": "add", "-": "sub", "*": "mul", "/": "div"}


@dataclass(frozen=True)
class Token:
    kind: str  # number | var | name | op | end
    text: str
    pos: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, d: int):
        self.text = text
        self.d = d
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, expected: str):
        tok = self.tok
        got = "end of input" if tok.kind == "end" else repr(tok.text)
        raise ExprSyntaxError(f"expected {expected}, got {got}", tok.pos, self.text)

    def expect(self, text: str) -> Token:
        if self.tok.text != text or self.tok.kind not in ("op", "name"):
            self.fail(repr(text))
        return self.advance()

    def integer(self) -> tuple[int, int]:
        tok = self.tok
        if tok.kind != "number" or not tok.text.isdigit():
            self.fail("an integer")
        self.advance()
        return int(tok.text), tok.pos

    def variable(self) -> int:
        tok = self.tok
        if tok.kind != "var":
            self.fail("a variable like x0")
        self.advance()
        var = int(tok.text[1:])
        if var >= self.d:
            raise UnknownVariable(
                f"variable {tok.text} out of range for d={self.d}", tok.pos, self.text
            )
        return var

    # grammar rules -------------------------------------------------------

    def parse(self) -> ExprNode:
        node = self.expr()
        if self.tok.kind != "end":
            self.fail("an operator or end of input")
        return node

    def expr(self) -> ExprNode:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = _BINARY[self.advance().text]
            node = Binary(op, node, self.term())
        return node

    def term(self) -> ExprNode:
        node = self.factor()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = _BINARY[self.advance().text]
            node = Binary(op, node, self.factor())
        return node

    def factor(self) -> ExprNode:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            # a bare negative literal folds into the constant, unless a power follows
            if self.tok.kind == "number" and self.peek().text != "^":
                return Const(-float(self.advance().text))
            return Unary("neg", self.factor())
        return self.power()

    def power(self) -> ExprNode:
        node = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            node = Binary("pow", node, self.factor())
        return node

    def atom(self) -> ExprNode:
        tok = self.tok
        if tok.kind == "number":
            self.advance()
            return Const(float(tok.text))
        if tok.kind == "var":
            return self.varref()
        if tok.kind == "name":
            if tok.text == "t":
                self.advance()
                return TimeIndex()
            if tok.text in FUNCTIONS:
                self.advance()
                self.expect("(")
                child = self.expr()
                self.expect(")")
                return Unary(tok.text, child)
            if tok.text in AGGREGATES:
                return self.aggregate()
            raise UnknownFunction(f"unknown function {tok.text!r}", tok.pos, self.text)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        self.fail("a number, t, variable, function or '('")

    def varref(self) -> ExprNode:
        start = self.tok.pos
        var = self.variable()
        self.expect("[")
        self.expect("t")
        if self.tok.kind == "op" and self.tok.text == "]":
            raise ZeroLag("variable reference needs a lag >= 1", start, self.text)
        self.expect("-")
        lag, pos = self.integer()
        if lag < 1:
            raise ZeroLag("variable reference needs a lag >= 1", pos, self.text)
        self.expect("]")
        return VarRef(var, lag)

    def aggregate(self) -> ExprNode:
        kind = AGGREGATES[self.advance().text]
        self.expect("(")
        var = self.variable()
        self.expect(",")
        lag_from, _ = self.integer()
        self.expect(",")
        lag_to, pos = self.integer()
        self.expect(")")
        if lag_to < 1:
            raise ZeroLag("window lags must be >= 1", pos, self.text)
        if lag_from <= lag_to:
            raise ExprSyntaxError("window needs lag_from > lag_to", pos, self.text)
        return WindowAgg(kind, var, lag_from, lag_to)


def parse_expression(text: str, d: int) -> ExprNode:
    """Parse a DSL string into an expression over variables ``x0 .. x{d-1}``."""
    if d < 1:
        raise ValueError("d must be >= 1")
    return _Parser(text, d).parse()

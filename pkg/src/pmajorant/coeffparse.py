"""Coefficient expressions in one variable ``x``.

Grammar (``^`` binds tighter than unary minus and is right-associative)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('+' | '-') unary | power
    power   := atom ('^' unary)?
    atom    := NUMBER | 'x' | 'pi' | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Functions: sin cos exp abs sqrt (one argument), min max (two or more).
Evaluation is vectorised over numpy arrays and raises :class:`DomainError`
instead of producing NaN.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import CoeffSyntaxError, DomainError, UnknownIdentifier

UNARY_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs, "sqrt": np.sqrt}
VARIADIC_FUNCS = {"min": np.minimum, "max": np.maximum}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)


class Token(NamedTuple):
    kind: str
    text: str
    offset: int


def _tokenize(text):
    tokens = []
    pos = 0
    raw = text.encode("utf-8")
    # work on bytes so offsets are byte offsets even for non-ascii input
    src = raw.decode("latin-1")
    while pos < len(src):
        if src[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            raise CoeffSyntaxError(f"unexpected character {src[pos]!r}", text, pos)
        kind = m.lastgroup
        tokens.append(Token(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(Token("end", "", len(src)))
    return tokens


# AST nodes are plain tuples: ("num", value) ("x",) ("pi",) ("neg", e)
# ("bin", op, lhs, rhs) ("call", name, (args...))


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        tok = self.take()
        if tok.text != text:
            found = repr(tok.text) if tok.kind != "end" else "end of input"
            raise CoeffSyntaxError(f"expected {text!r}, found {found}", self.text, tok.offset)
        return tok

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise CoeffSyntaxError(f"unexpected {tok.text!r}", self.text, tok.offset)
        return node

    def expr(self):
        node = self.term()
        while self.peek().text in ("+", "-"):
            op = self.take().text
            node = ("bin", op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek().text in ("*", "/"):
            op = self.take().text
            node = ("bin", op, node, self.unary())
        return node

    def unary(self):
        tok = self.peek()
        if tok.text == "-":
            self.take()
            return ("neg", self.unary())
        if tok.text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek().text == "^":
            self.take()
            return ("bin", "^", base, self.unary())
        return base

    def atom(self):
        tok = self.take()
        if tok.kind == "num":
            return ("num", float(tok.text))
        if tok.kind == "name":
            if tok.text == "x":
                return ("x",)
            if tok.text == "pi":
                return ("pi",)
            if tok.text in UNARY_FUNCS or tok.text in VARIADIC_FUNCS:
                self.expect("(")
                args = [self.expr()]
                while self.peek().text == ",":
                    self.take()
                    args.append(self.expr())
                close = self.expect(")")
                if tok.text in UNARY_FUNCS and len(args) != 1:
                    raise CoeffSyntaxError(f"{tok.text} takes one argument", self.text, close.offset)
                if tok.text in VARIADIC_FUNCS and len(args) < 2:
                    raise CoeffSyntaxError(f"{tok.text} takes at least two arguments", self.text, close.offset)
                return ("call", tok.text, tuple(args))
            raise UnknownIdentifier(tok.text, tok.offset)
        if tok.text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = repr(tok.text) if tok.kind != "end" else "end of input"
        raise CoeffSyntaxError(f"unexpected {found}", self.text, tok.offset)


def _first_bad(mask, x):
    if np.ndim(x) == 0:
        return float(x)
    mask = np.broadcast_to(mask, np.shape(x))
    return float(np.ravel(x)[np.flatnonzero(mask)[0]])


def _eval(node, x):
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "x":
        return x
    if kind == "pi":
        return math.pi
    if kind == "neg":
        return -_eval(node[1], x)
    if kind == "bin":
        op = node[1]
        lhs = _eval(node[2], x)
        rhs = _eval(node[3], x)
        if op == "+":
            return lhs + rhs
        if op == "-":
            return lhs - rhs
        if op == "*":
            return lhs * rhs
        if op == "/":
            zero = np.asarray(rhs) == 0
            if np.any(zero):
                raise DomainError("division by zero", _first_bad(zero, x))
            return lhs / rhs
        base = np.asarray(lhs, dtype=float)
        expo = np.asarray(rhs, dtype=float)
        bad = (base < 0) & (expo != np.round(expo))
        if np.any(bad):
            raise DomainError("negative base with non-integer exponent", _first_bad(bad, x))
        pole = (base == 0) & (expo < 0)
        if np.any(pole):
            raise DomainError("zero raised to a negative power", _first_bad(pole, x))
        with np.errstate(over="ignore"):
            out = np.power(base, expo)
        return out if np.ndim(out) else float(out)
    if kind == "call":
        name, args = node[1], node[2]
        vals = [_eval(a, x) for a in args]
        if name == "sqrt":
            neg = np.asarray(vals[0]) < 0
            if np.any(neg):
                raise DomainError("sqrt of a negative number", _first_bad(neg, x))
        if name in UNARY_FUNCS:
            with np.errstate(over="ignore"):
                out = UNARY_FUNCS[name](vals[0])
        else:
            out = vals[0]
            for v in vals[1:]:
                out = VARIADIC_FUNCS[name](out, v)
        return out if np.ndim(out) else float(out)
    raise AssertionError(node)


def _unparse(node):
    kind = node[0]
    if kind == "num":
        return repr(node[1])
    if kind == "x":
        return "x"
    if kind == "pi":
        return "pi"
    if kind == "neg":
        return f"(-{_unparse(node[1])})"
    if kind == "bin":
        return f"({_unparse(node[2])} {node[1]} {_unparse(node[3])})"
    return f"{node[1]}({', '.join(_unparse(a) for a in node[2])})"


@dataclass(frozen=True)
class CoeffFn:
    """Parsed expression; call it with a float or an array of coordinates."""

    ast: tuple
    source: str = ""

    def __call__(self, x):
        x = np.asarray(x, dtype=float) if np.ndim(x) else float(x)
        out = _eval(self.ast, x)
        if np.ndim(x):
            return np.broadcast_to(np.asarray(out, dtype=float), np.shape(x)).copy()
        return float(out)

    def __str__(self):
        return self.source or unparse(self)


def parse_coeff(text):
    if isinstance(text, CoeffFn):
        return text
    if isinstance(text, (int, float)):
        text = repr(float(text))
    try:
        ast = _Parser(text).parse()
    except RecursionError:
        raise CoeffSyntaxError("expression nested too deeply", text, 0) from None
    return CoeffFn(ast, text)


def eval_coeff(f, x):
    return f(x)


def unparse(f):
    return _unparse(f.ast)

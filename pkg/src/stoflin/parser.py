"""Recursive-descent parser for the expression grammar.

::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := ['-'] atom ['^' exponent]
    exponent := ['-'] number | '(' ['-'] number ['/' number] ')'
    atom   := number | ident | func '(' expr ')' | '(' expr ')'

Identifiers ``x1, x2, ...`` are state variables, every other identifier is a
parameter. A number written ``p/q`` with no surrounding whitespace is read as
one exact rational literal.
"""
from __future__ import annotations

import re
from fractions import Fraction

from .errors import ParseError
from .expr import FUNCTIONS, Const, Div, Expr, Func, Mul, Neg, Param, Pow, Var, Add

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)
_VAR = re.compile(r"x([1-9][0-9]*)\Z")


class _Tok:
    __slots__ = ("kind", "text", "pos")

    def __init__(self, kind, text, pos):
        self.kind, self.text, self.pos = kind, text, pos


def _tokenize(text: str):
    data = text.encode("utf-8")
    # positions are byte offsets; map character index to byte offset
    offsets = []
    b = 0
    for ch in text:
        offsets.append(b)
        b += len(ch.encode("utf-8"))
    offsets.append(b)
    toks = []
    i = 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if m is None:
            raise ParseError(f"unexpected character {text[i]!r}", offsets[i])
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), offsets[i]))
        i = m.end()
    toks.append(_Tok("end", "", len(data)))
    return toks


def _number(text: str):
    if any(c in text for c in ".eE"):
        return float(text)
    return Fraction(int(text))


class _Parser:
    def __init__(self, text: str, dim: int):
        self.toks = _tokenize(text)
        self.i = 0
        self.dim = dim

    @property
    def tok(self):
        return self.toks[self.i]

    def _adjacent(self, a: _Tok, b: _Tok) -> bool:
        return a.pos + len(a.text.encode()) == b.pos

    def advance(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text):
        if self.tok.text != text:
            found = self.tok.text or "end of input"
            raise ParseError(f"expected {text!r}, found {found!r}", self.tok.pos)
        return self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            raise ParseError(f"unexpected {self.tok.text!r}", self.tok.pos)
        return e

    def expr(self):
        terms = [self.term()]
        while self.tok.text in ("+", "-"):
            op = self.advance().text
            t = self.term()
            terms.append(t if op == "+" else Neg(t))
        return terms[0] if len(terms) == 1 else Add(terms)

    def term(self):
        left = self.factor()
        factors = [left]
        while self.tok.text in ("*", "/"):
            op = self.advance().text
            right = self.factor()
            if op == "*":
                factors.append(right)
            else:
                cur = factors[0] if len(factors) == 1 else Mul(factors)
                factors = [Div(cur, right)]
        return factors[0] if len(factors) == 1 else Mul(factors)

    def factor(self):
        if self.tok.text == "-":
            minus = self.advance()
            nxt = self.tok
            if nxt.kind == "num" and self._adjacent(minus, nxt):
                save = self.i
                value = self._rational_literal()
                if self.tok.text != "^":
                    return Const(-value)
                self.i = save
            a = self.atom()
            return Neg(self._power(a))
        return self._power(self.atom())

    def _power(self, base):
        if self.tok.text != "^":
            return base
        self.advance()
        return Pow(base, self._signed_rational())

    def _signed_rational(self):
        t = self.tok
        if t.text == "(":
            self.advance()
            sign = 1
            if self.tok.text in ("-", "+"):
                sign = -1 if self.advance().text == "-" else 1
            v = self._exponent_literal(inner=True)
            self.expect(")")
            return sign * v
        sign = 1
        if t.text in ("-", "+"):
            sign = -1 if self.advance().text == "-" else 1
        return sign * self._exponent_literal()

    def _exponent_literal(self, inner: bool = False):
        t = self.tok
        if t.kind != "num":
            raise ParseError("expected a numeric exponent", t.pos)
        self.advance()
        v = _number(t.text)
        if inner and self.tok.text == "/" and self.toks[self.i + 1].kind == "num" and isinstance(v, Fraction):
            self.advance()
            d = self.advance()
            dv = _number(d.text)
            if not isinstance(dv, Fraction) or dv == 0:
                raise ParseError("exponent denominator must be a nonzero integer", d.pos)
            v = v / dv
        return v

    def _rational_literal(self):
        t = self.advance()
        v = _number(t.text)
        if (
            isinstance(v, Fraction)
            and self.tok.text == "/"
            and self._adjacent(t, self.tok)
            and self.toks[self.i + 1].kind == "num"
            and self._adjacent(self.tok, self.toks[self.i + 1])
        ):
            d = self.toks[self.i + 1]
            dv = _number(d.text)
            if isinstance(dv, Fraction) and dv != 0:
                self.i += 2
                v = v / dv
        return v

    def atom(self):
        t = self.tok
        if t.kind == "num":
            return Const(self._rational_literal())
        if t.kind == "ident":
            self.advance()
            if self.tok.text == "(":
                if t.text not in FUNCTIONS:
                    raise ParseError(f"unknown function {t.text!r}", t.pos)
                self.advance()
                arg = self.expr()
                self.expect(")")
                return Func(t.text, arg)
            if t.text in FUNCTIONS:
                raise ParseError(f"function {t.text!r} needs an argument", self.tok.pos)
            m = _VAR.match(t.text)
            if m:
                idx = int(m.group(1))
                if idx > self.dim:
                    raise ParseError(f"variable {t.text} exceeds dimension {self.dim}", t.pos)
                return Var(idx)
            return Param(t.text)
        if t.text == "(":
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        found = t.text or "end of input"
        raise ParseError(f"unexpected {found!r}", t.pos)


def parse(text: str, dim: int) -> Expr:
    """Parse ``text`` into an expression over ``x1..x<dim>``.

    Raises
    ------
    ParseError
        On malformed input, an unknown function name or a variable index
        larger than ``dim``. The error carries the byte offset of the failure.
    """
    if not isinstance(dim, int) or dim < 1:
        raise ValueError(f"dim must be a positive integer, got {dim!r}")
    return _Parser(text, dim).parse()


def parse_many(texts, dim: int) -> tuple[Expr, ...]:
    return tuple(parse(t, dim) for t in texts)

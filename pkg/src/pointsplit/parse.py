"""Recursive-descent parser for the expression grammar.

    sum     := ["+"|"-"] product (("+"|"-") product)*
    product := power (("*" | "." | "/" | <juxtaposition>) power)*
    power   := unary ["^" ["-"] INT]          (scalar atoms only)
    unary   := "-" unary | primary
    primary := NUMBER | "(" sum ")" | "Tr" "(" sum ")" | "ln" "(" NAME|NUMBER ")"
             | ATOM | "Id" | SYMBOL ["'"] ["^"] ["[" idx ("," idx)* "]"] deriv*
    idx     := ["^"] NAME ["'"]
    deriv   := "[;" idx (";" idx)* "]"
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from pointsplit.expr import Expr, Index, check_term, make_factor
from pointsplit.registry import ALIASES, REGISTRY

ATOMS = {"m", "pi", "gE", "lam", "lamp", "c"}

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>\[;|==|[][(),;^'*./+-]))")


class ParseError(ValueError):
    def __init__(self, msg: str, line: int, col: int) -> None:
        super().__init__(f"{msg} at line {line}, column {col}")
        self.line = line
        self.col = col


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(src: str) -> list[_Tok]:
    toks = []
    pos = 0
    n = len(src)
    while pos < n:
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if not m:
            raise _error(src, pos + len(src[pos:]) - len(src[pos:].lstrip()), "unexpected character")
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    toks.append(_Tok("end", "", n))
    return toks


def _error(src: str, pos: int, msg: str) -> ParseError:
    line = src.count("\n", 0, pos) + 1
    col = pos - (src.rfind("\n", 0, pos) + 1) + 1
    return ParseError(msg, line, col)


class _Parser:
    def __init__(self, src: str) -> None:
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self, k: int = 0) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def take(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.peek()
        if t.text != text:
            raise self.err(t, f"expected {text!r}")
        return self.take()

    def err(self, tok: _Tok, msg: str) -> ParseError:
        return _error(self.src, tok.pos, msg + (f" near {tok.text!r}" if tok.text else ""))

    # grammar
    def parse_sum(self) -> Expr:
        sign = 1
        if self.peek().text in "+-" and self.peek().kind == "op":
            sign = -1 if self.take().text == "-" else 1
        acc = self.parse_product() * sign
        while self.peek().kind == "op" and self.peek().text in ("+", "-"):
            op = self.take().text
            rhs = self.parse_product()
            acc = acc + rhs if op == "+" else acc - rhs
        return acc

    def _starts_primary(self, t: _Tok) -> bool:
        return t.kind in ("num", "name") or t.text == "("

    def parse_product(self) -> Expr:
        acc = self.parse_power()
        while True:
            t = self.peek()
            if t.kind == "op" and t.text in ("*", "."):
                self.take()
                acc = acc * self.parse_power()
            elif t.kind == "op" and t.text == "/":
                self.take()
                d = self.parse_power()
                acc = acc * _invert(d, t, self)
            elif self._starts_primary(t):
                acc = acc * self.parse_power()
            else:
                return acc

    def parse_power(self) -> Expr:
        start = self.peek()
        base = self.parse_unary()
        if self.peek().text == "^" and self.peek(1).text != "[":
            self.take()
            neg = False
            if self.peek().text == "-":
                self.take()
                neg = True
            t = self.take()
            if t.kind != "num":
                raise self.err(t, "expected integer exponent")
            k = int(t.text) * (-1 if neg else 1)
            return _power(base, k, start, self)
        return base

    def parse_unary(self) -> Expr:
        if self.peek().text == "-":
            self.take()
            return -self.parse_unary()
        return self.parse_primary()

    def parse_primary(self) -> Expr:
        t = self.peek()
        if t.kind == "num":
            self.take()
            return Expr.number(int(t.text))
        if t.text == "(":
            self.take()
            e = self.parse_sum()
            self.expect(")")
            return e
        if t.kind != "name":
            raise self.err(t, "unexpected token")
        self.take()
        name = t.text
        if name == "Tr" and self.peek().text == "(":
            self.take()
            e = self.parse_sum()
            self.expect(")")
            if any(term.word is None or term.traced for term, _ in e.items()):
                raise self.err(t, "Tr needs a matrix-valued argument")
            return e.traced()
        if name == "ln" and self.peek().text == "(":
            self.take()
            a = self.take()
            if a.kind not in ("name", "num"):
                raise self.err(a, "ln takes a name or integer")
            self.expect(")")
            return Expr.atom(f"ln({a.text})")
        if name in ATOMS:
            return Expr.atom(name)
        if name == "Id":
            return Expr.identity()
        return self.parse_symbol(t)

    def parse_index(self) -> Index:
        up = False
        if self.peek().text == "^":
            self.take()
            up = True
        t = self.take()
        if t.kind != "name":
            raise self.err(t, "expected index name")
        point = "x"
        if self.peek().text == "'":
            self.take()
            point = "y"
        return Index(t.text, up, point)

    def parse_symbol(self, t: _Tok) -> Expr:
        name = ALIASES.get(t.text, t.text)
        if name not in REGISTRY:
            raise self.err(t, "unknown symbol")
        at = None
        if self.peek().text == "'":
            self.take()
            at = "y"
        all_up = False
        if self.peek().text == "^" and self.peek(1).text == "[":
            self.take()
            all_up = True
        indices: list[Index] = []
        if self.peek().text == "[":
            self.take()
            indices.append(self.parse_index())
            while self.peek().text == ",":
                self.take()
                indices.append(self.parse_index())
            self.expect("]")
            if all_up:
                indices = [Index(i.name, True, i.point) for i in indices]
        derivs: list[Index] = []
        while self.peek().text == "[;":
            self.take()
            derivs.append(self.parse_index())
            while self.peek().text == ";":
                self.take()
                derivs.append(self.parse_index())
            self.expect("]")
        try:
            f = make_factor(name, indices, derivs, at)
        except ValueError as exc:
            raise self.err(t, str(exc)) from None
        return Expr.of(f)


def _invert(d: Expr, tok: _Tok, p: _Parser) -> Expr:
    items = list(d.items())
    if len(items) != 1 or items[0][0].factors or items[0][0].word is not None:
        raise p.err(tok, "can only divide by a number or scalar atoms")
    term, c = items[0]
    if c == 0:
        raise p.err(tok, "division by zero")
    inv = Expr.number(1 / c)
    for n, e in term.scalars:
        inv = inv * Expr.atom(n, -e)
    return inv


def _power(base: Expr, k: int, tok: _Tok, p: _Parser) -> Expr:
    items = list(base.items())
    if len(items) == 1 and not items[0][0].factors and items[0][0].word is None:
        term, c = items[0]
        if c == 0 and k < 0:
            raise p.err(tok, "division by zero")
        out = Expr.number(Fraction(c) ** k)
        for n, e in term.scalars:
            out = out * Expr.atom(n, e * k)
        return out
    if k < 0:
        raise p.err(tok, "negative power of a tensor expression")
    out = Expr.number(1)
    for _ in range(k):
        out = out * base
    return out


def parse(source: str) -> Expr:
    """Parse one expression; raises ParseError with line/column on failure."""
    p = _Parser(source)
    if p.peek().kind == "end":
        raise p.err(p.peek(), "empty expression")
    e = p.parse_sum()
    if p.peek().kind != "end":
        raise p.err(p.peek(), "trailing input")
    validate(e, p)
    return e


def validate(e: Expr, p: _Parser | None = None) -> None:
    free = None
    for term, _ in e.items():
        try:
            check_term(term)
        except ValueError as exc:
            if p is None:
                raise
            raise _error(p.src, 0, str(exc)) from None
        fi = sorted(term.free_indices())
        if free is None:
            free = fi
        elif fi != free:
            msg = "terms have different free indices"
            if p is None:
                raise ValueError(msg)
            raise _error(p.src, 0, msg)


def parse_identity(source: str) -> tuple[Expr, Expr]:
    """Parse 'lhs == rhs'."""
    if source.count("==") != 1:
        raise ParseError("identity needs exactly one '=='", 1, 1)
    lhs, rhs = source.split("==")
    return parse(lhs), parse(rhs)

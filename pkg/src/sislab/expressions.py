"""Parser/evaluator for closed-form coefficient expressions.

Grammar: real literals; symbols ``x`` and ``pi`` (plus caller-supplied named
constants); binary ``+ - * / ^``; unary ``-``; one-argument functions
``sin cos abs exp sqrt`` and two-argument ``min max``; parentheses.
Whitespace is insignificant.  Everything evaluates in double precision,
vectorized over the sample points.
"""

from __future__ import annotations

import re
from typing import Mapping

import numpy as np

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)

_UNARY_FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "abs": np.abs,
    "exp": np.exp,
    "sqrt": np.sqrt,
}
_BINARY_FUNCTIONS = {"min": np.minimum, "max": np.maximum}


class ExpressionError(ValueError):
    """Malformed expression; ``position`` is a character offset into the text."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class ExpressionDomainError(ValueError):
    """Expression is syntactically fine but undefined at a sample point."""


class _Token:
    __slots__ = ("kind", "value", "pos")

    def __init__(self, kind: str, value: str, pos: int):
        self.kind = kind
        self.value = value
        self.pos = pos


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            stripped = text[i:].lstrip()
            if not stripped:
                break
            at = i + (len(text) - i - len(stripped))
            raise ExpressionError(f"unexpected character {stripped[0]!r}", at)
        if m.group("num") is not None:
            tokens.append(_Token("num", m.group("num"), m.start("num")))
        elif m.group("name") is not None:
            tokens.append(_Token("name", m.group("name"), m.start("name")))
        else:
            tokens.append(_Token("op", m.group("op"), m.start("op")))
        i = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


# AST nodes are plain tuples: ("num", v), ("sym", name, pos),
# ("call", name, args, pos), ("bin", op, lhs, rhs, pos), ("neg", operand, pos).


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def next(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str) -> _Token:
        tok = self.next()
        if tok.kind != "op" or tok.value != op:
            raise ExpressionError(f"expected {op!r}", tok.pos)
        return tok

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ExpressionError(f"unexpected trailing input {tok.value!r}", tok.pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek().kind == "op" and self.peek().value in "+-":
            tok = self.next()
            node = ("bin", tok.value, node, self.term(), tok.pos)
        return node

    def term(self):
        node = self.factor()
        while self.peek().kind == "op" and self.peek().value in "*/":
            tok = self.next()
            node = ("bin", tok.value, node, self.factor(), tok.pos)
        return node

    def factor(self):
        tok = self.peek()
        if tok.kind == "op" and tok.value == "-":
            self.next()
            return ("neg", self.factor(), tok.pos)
        return self.power()

    def power(self):
        node = self.atom()
        tok = self.peek()
        if tok.kind == "op" and tok.value == "^":
            self.next()
            # right-associative; allow a signed exponent
            node = ("bin", "^", node, self.factor(), tok.pos)
        return node

    def atom(self):
        tok = self.next()
        if tok.kind == "num":
            return ("num", float(tok.value))
        if tok.kind == "name":
            if self.peek().kind == "op" and self.peek().value == "(":
                self.next()
                args = [self.expr()]
                while self.peek().kind == "op" and self.peek().value == ",":
                    self.next()
                    args.append(self.expr())
                self.expect_op(")")
                return self._check_call(tok, args)
            return ("sym", tok.value, tok.pos)
        if tok.kind == "op" and tok.value == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExpressionError(
            "expected a number, symbol, function or '('"
            if tok.kind != "end"
            else "unexpected end of expression",
            tok.pos,
        )

    def _check_call(self, tok: _Token, args: list):
        name = tok.value
        if name in _UNARY_FUNCTIONS:
            arity = 1
        elif name in _BINARY_FUNCTIONS:
            arity = 2
        else:
            raise ExpressionError(f"unknown function {name!r}", tok.pos)
        if len(args) != arity:
            raise ExpressionError(
                f"{name} takes {arity} argument(s), got {len(args)}", tok.pos
            )
        return ("call", name, args, tok.pos)


class Expression:
    """A parsed coefficient expression, reusable across grids."""

    def __init__(self, text: str):
        self.text = text
        self._ast = _Parser(text).parse()

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Expression({self.text!r})"

    def evaluate(self, x, params: Mapping[str, float] | None = None) -> np.ndarray:
        """Evaluate at the points ``x`` (scalar or array), returning float64."""
        x = np.asarray(x, dtype=float)
        out = self._eval(self._ast, x, params or {})
        return np.broadcast_to(np.asarray(out, dtype=float), x.shape).copy()

    def _eval(self, node, x: np.ndarray, params: Mapping[str, float]):
        kind = node[0]
        if kind == "num":
            return node[1]
        if kind == "sym":
            name = node[1]
            if name == "x":
                return x
            if name == "pi":
                return np.pi
            if name in params:
                return float(params[name])
            raise ExpressionError(f"unknown symbol {name!r}", node[2])
        if kind == "neg":
            return -self._eval(node[1], x, params)
        if kind == "call":
            name, args = node[1], node[2]
            vals = [self._eval(a, x, params) for a in args]
            if name == "sqrt":
                if np.any(np.asarray(vals[0]) < 0):
                    raise ExpressionDomainError(
                        self._where(x, np.asarray(vals[0]) < 0, "sqrt of a negative value")
                    )
                return np.sqrt(vals[0])
            fn = _UNARY_FUNCTIONS.get(name) or _BINARY_FUNCTIONS[name]
            result = fn(*vals)
            return self._require_finite(result, x, f"{name}() overflowed")
        # binary operator
        op, lhs, rhs = node[1], node[2], node[3]
        a = self._eval(lhs, x, params)
        b = self._eval(rhs, x, params)
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            bad = np.asarray(b) == 0
            if np.any(bad):
                raise ExpressionDomainError(self._where(x, bad, "division by zero"))
            return a / b
        # op == "^"
        with np.errstate(all="ignore"):
            result = np.power(np.asarray(a, dtype=float), b)
        return self._require_finite(result, x, "undefined power")

    def _require_finite(self, result, x: np.ndarray, what: str):
        bad = ~np.isfinite(np.asarray(result, dtype=float))
        if np.any(bad):
            raise ExpressionDomainError(self._where(x, bad, what))
        return result

    def _where(self, x: np.ndarray, bad, what: str) -> str:
        bad = np.broadcast_to(bad, x.shape) if np.ndim(bad) == 0 else bad
        if np.ndim(x) == 0:
            return f"{what} in {self.text!r} at x={float(x)}"
        idx = int(np.argmax(bad))
        return f"{what} in {self.text!r} at node x={x.flat[idx]}"


def parse_expression(text: str) -> Expression:
    return Expression(text)

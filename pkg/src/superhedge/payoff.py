"""Text payoffs over price paths: parser, canonical printer and vectorized evaluator.

Grammar (whitespace is ignored)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | atom
    atom    := NUMBER | "x" "[" INT "]" "[" INT "]" | NAME "(" args ")" | "(" expr ")"

``x[t][n]`` is the price of asset ``n`` at date ``t`` (both 1-based). Functions are
``max(a, b)``, ``min(a, b)``, ``abs(a)``, ``pos(a)`` (positive part) and
``powi(a, k)`` with ``k`` a nonnegative integer literal.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np


class PayoffSyntaxError(ValueError):
    def __init__(self, message: str, offset: int, text: str = ""):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset
        self.text = text


class BindingError(ValueError):
    pass


class EvaluationError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    t: int
    n: int


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Node = Union[Num, Var, Neg, BinOp, Call]

_ARITY = {"max": 2, "min": 2, "abs": 1, "pos": 1, "powi": 2}

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/()\[\],])
""", re.VERBOSE)


def _tokenize(text: str):
    pos = 0
    out = []
    raw = text.encode("utf-8")
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            off = len(text[:pos].encode("utf-8"))
            raise PayoffSyntaxError(f"unexpected character {text[pos]!r}", off, text)
        kind = m.lastgroup
        if kind != "ws":
            off = len(text[:pos].encode("utf-8"))
            out.append((kind, m.group(), off))
        pos = m.end()
    out.append(("end", "", len(raw)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, off = self.take()
        if val != value:
            shown = val or "end of input"
            raise PayoffSyntaxError(f"expected {value!r}, found {shown!r}", off, self.text)

    def fail(self, msg):
        raise PayoffSyntaxError(msg, self.peek()[2], self.text)

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.atom()

    def integer(self) -> int:
        kind, val, off = self.take()
        if kind != "num" or not val.isdigit():
            raise PayoffSyntaxError(f"expected an integer, found {val!r}", off, self.text)
        return int(val)

    def atom(self) -> Node:
        kind, val, off = self.peek()
        if kind == "num":
            self.take()
            return Num(float(val))
        if val == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        if kind == "name":
            self.take()
            if val == "x":
                self.expect("[")
                t = self.integer()
                self.expect("]")
                self.expect("[")
                n = self.integer()
                self.expect("]")
                return Var(t, n)
            if val not in _ARITY:
                raise PayoffSyntaxError(f"unknown identifier {val!r}", off, self.text)
            self.expect("(")
            args = [self.expr()]
            while self.peek()[1] == ",":
                self.take()
                if val == "powi" and len(args) == 1:
                    k_off = self.peek()[2]
                    k = self.integer()
                    args.append(Num(float(k)))
                    if self.peek()[1] != ")":
                        raise PayoffSyntaxError("powi exponent must be an integer literal",
                                                k_off, self.text)
                else:
                    args.append(self.expr())
            if len(args) != _ARITY[val]:
                raise PayoffSyntaxError(f"{val} takes {_ARITY[val]} argument(s), got {len(args)}",
                                        off, self.text)
            self.expect(")")
            return Call(val, tuple(args))
        if kind == "end":
            self.fail("unexpected end of input")
        self.fail(f"unexpected token {val!r}")


def parse(text: str) -> Node:
    p = _Parser(text)
    node = p.expr()
    kind, val, off = p.peek()
    if kind != "end":
        raise PayoffSyntaxError(f"trailing input {val!r}", off, text)
    return node


def to_text(node: Node) -> str:
    """Canonical fully parenthesized text; ``parse(to_text(e)) == e``."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return f"x[{node.t}][{node.n}]"
    if isinstance(node, Neg):
        return f"(-{to_text(node.arg)})"
    if isinstance(node, BinOp):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if node.name == "powi":
        return f"powi({to_text(node.args[0])}, {int(node.args[1].value)})"
    return f"{node.name}({', '.join(to_text(a) for a in node.args)})"


def variables(node: Node) -> set[tuple[int, int]]:
    if isinstance(node, Var):
        return {(node.t, node.n)}
    if isinstance(node, Num):
        return set()
    if isinstance(node, Neg):
        return variables(node.arg)
    if isinstance(node, BinOp):
        return variables(node.left) | variables(node.right)
    out = set()
    for a in node.args:
        out |= variables(a)
    return out


@dataclass(frozen=True)
class Payoff:
    """A parsed expression checked against ``d`` assets and ``T`` dates."""

    node: Node
    d: int
    T: int
    text: str = ""

    def __call__(self, paths) -> np.ndarray | float:
        return evaluate(self, paths)

    def __str__(self) -> str:
        return self.text or to_text(self.node)


def bind(expr: Node | str, d: int, T: int) -> Payoff:
    text = expr if isinstance(expr, str) else ""
    node = parse(expr) if isinstance(expr, str) else expr
    for t, n in sorted(variables(node)):
        if not 1 <= t <= T:
            raise BindingError(f"x[{t}][{n}]: date {t} outside 1..{T}")
        if not 1 <= n <= d:
            raise BindingError(f"x[{t}][{n}]: asset {n} outside 1..{d}")
    return Payoff(node, d, T, text)


def _eval(node: Node, X: np.ndarray) -> np.ndarray:
    if isinstance(node, Num):
        return np.full(X.shape[0], node.value)
    if isinstance(node, Var):
        return X[:, node.t - 1, node.n - 1].astype(float)
    if isinstance(node, Neg):
        return -_eval(node.arg, X)
    if isinstance(node, BinOp):
        a, b = _eval(node.left, X), _eval(node.right, X)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if np.any(b == 0):
            p = int(np.argmax(b == 0))
            raise EvaluationError(f"division by zero in {to_text(node)} on path {p}")
        return a / b
    args = [_eval(a, X) for a in node.args]
    if node.name == "max":
        return np.maximum(args[0], args[1])
    if node.name == "min":
        return np.minimum(args[0], args[1])
    if node.name == "abs":
        return np.abs(args[0])
    if node.name == "pos":
        return np.maximum(args[0], 0.0)
    k = int(node.args[1].value)
    out = np.ones_like(args[0])
    for _ in range(k):
        out = out * args[0]
    return out


def evaluate(payoff: Payoff | Node, paths) -> np.ndarray | float:
    """Evaluate on one path ``(T, d)`` or a batch ``(P, T, d)``.

    A single path may also be given as a flat length-``T`` vector when ``d == 1``.
    """
    node = payoff.node if isinstance(payoff, Payoff) else payoff
    X = np.asarray(paths, dtype=float)
    single = False
    if isinstance(payoff, Payoff) and X.ndim == 1 and payoff.d == 1:
        X = X[:, None]
    if X.ndim == 2:
        X, single = X[None], True
    if X.ndim != 3:
        raise ValueError("paths must have shape (T, d) or (P, T, d)")
    if isinstance(payoff, Payoff) and X.shape[1:] != (payoff.T, payoff.d):
        raise ValueError(f"paths have shape {X.shape[1:]}, payoff expects {(payoff.T, payoff.d)}")
    out = _eval(node, X)
    return float(out[0]) if single else out

"""Expression language for scalar fields on a chart.

Grammar (lowest to highest precedence)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?          # right-associative
    atom    := number | ident | ident '(' expr ')' | '(' expr ')'

Identifiers are the coordinates ``x1``..``xn`` and the functions ``sin``,
``cos`` and ``exp``.  The exponent of ``^`` must fold to an integer
constant so that every expression is single-valued on the whole torus.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np

from . import jets as J


class ExprError(ValueError):
    """Base class for expression errors; ``offset`` is a byte offset into the source."""

    def __init__(self, message, offset=None):
        self.offset = offset
        where = f" at offset {offset}" if offset is not None else ""
        super().__init__(f"{message}{where}")


class ExprSyntaxError(ExprError):
    pass


class UnknownIdentifierError(ExprError):
    pass


class CoordinateRangeError(ExprError):
    pass


class NonIntegerExponentError(ExprError):
    pass


# ----------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Coord:
    index: int


@dataclass(frozen=True)
class Unary:
    op: str
    child: "ExprNode"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "ExprNode"
    right: "ExprNode"


ExprNode = Union[Const, Coord, Unary, Binary]

UNARY_OPS = ("neg", "sin", "cos", "exp")
BINARY_OPS = ("add", "sub", "mul", "div", "pow")
FUNCTIONS = ("sin", "cos", "exp")


# ----------------------------------------------------------------------
# Tokenizer

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<id>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(source):
    tokens = []
    pos = 0
    raw = source.encode("utf-8")
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if not m or m.end() == pos:
            off = len(source[:pos].encode("utf-8"))
            while pos < len(source) and source[pos].isspace():
                pos += 1
                off = len(source[:pos].encode("utf-8"))
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", off)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), len(source[:start].encode("utf-8"))))
        pos = m.end()
    tokens.append(("end", "", len(raw)))
    return tokens


class _Parser:
    def __init__(self, source, dim):
        self.tokens = _tokenize(source)
        self.i = 0
        self.dim = dim

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        tok = self.take()
        if tok[1] != value:
            got = "end of input" if tok[0] == "end" else repr(tok[1])
            raise ExprSyntaxError(f"expected {value!r}, got {got}", tok[2])
        return tok

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExprSyntaxError(f"unexpected token {tok[1]!r}", tok[2])
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = "add" if self.take()[1] == "+" else "sub"
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = "mul" if self.take()[1] == "*" else "div"
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.take()
            return Unary("neg", self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            tok = self.take()
            exponent = self.unary()
            value = _fold_constant(exponent)
            if value is None or not float(value).is_integer():
                raise NonIntegerExponentError("non-integer exponent", tok[2])
            return Binary("pow", base, Const(float(int(value))))
        return base

    def atom(self):
        kind, text, off = self.take()
        if kind == "num":
            return Const(float(text))
        if kind == "id":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Unary(text, arg)
            m = re.fullmatch(r"x(\d+)", text)
            if m:
                k = int(m.group(1))
                if not 1 <= k <= self.dim:
                    raise CoordinateRangeError(f"coordinate {text} out of range for dimension {self.dim}", off)
                return Coord(k - 1)
            raise UnknownIdentifierError(f"unknown identifier {text!r}", off)
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        got = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"unexpected {got}", off)


def _fold_constant(node):
    """Value of a coordinate-free subtree, or None if it depends on coordinates."""
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Coord):
        return None
    if isinstance(node, Unary):
        c = _fold_constant(node.child)
        if c is None:
            return None
        return {"neg": lambda x: -x, "sin": math.sin, "cos": math.cos, "exp": math.exp}[node.op](c)
    a, b = _fold_constant(node.left), _fold_constant(node.right)
    if a is None or b is None:
        return None
    if node.op == "add":
        return a + b
    if node.op == "sub":
        return a - b
    if node.op == "mul":
        return a * b
    if node.op == "div":
        return a / b if b != 0 else None
    return a**b


@lru_cache(maxsize=4096)
def parse_expr(source: str, dim: int) -> ExprNode:
    """Parse ``source`` into an expression tree over coordinates x1..x{dim}."""
    if not isinstance(source, str):
        source = repr(float(source))
    return _Parser(source, dim).parse()


def max_coordinate(node):
    if isinstance(node, Const):
        return -1
    if isinstance(node, Coord):
        return node.index
    if isinstance(node, Unary):
        return max_coordinate(node.child)
    return max(max_coordinate(node.left), max_coordinate(node.right))


def is_constant(node):
    return _fold_constant(node) is not None


def format_expr(node):
    """Render a tree back to source text (fully parenthesized where needed)."""
    if isinstance(node, Const):
        return repr(node.value)
    if isinstance(node, Coord):
        return f"x{node.index + 1}"
    if isinstance(node, Unary):
        if node.op == "neg":
            return f"(-{format_expr(node.child)})"
        return f"{node.op}({format_expr(node.child)})"
    sym = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}[node.op]
    return f"({format_expr(node.left)} {sym} {format_expr(node.right)})"


# ----------------------------------------------------------------------
# Evaluation


def evaluate(node, points, order=2):
    """Evaluate on a batch of points of shape (N, n), returning a scalar :class:`JetArray`."""
    points = np.asarray(points, dtype=float)
    batch, n = points.shape
    if isinstance(node, str):
        node = parse_expr(node, n)
    if max_coordinate(node) >= n:
        raise CoordinateRangeError(f"expression uses x{max_coordinate(node) + 1} on a {n}-dimensional chart")
    coords = J.JetArray.coordinates(points).truncate(order)
    memo = {}

    def rec(e):
        key = id(e)
        if key in memo:
            return memo[key][1]
        out = _eval(e)
        memo[key] = (e, out)
        return out

    def _eval(e):
        if isinstance(e, Const):
            return J.JetArray.constant(e.value, batch, n, order=order)
        if isinstance(e, Coord):
            return coords[e.index]
        if isinstance(e, Unary):
            c = rec(e.child)
            if e.op == "neg":
                return -c
            return {"sin": J.sin, "cos": J.cos, "exp": J.exp}[e.op](c)
        a = rec(e.left)
        if e.op == "pow":
            return J.integer_power(a, int(e.right.value))
        b = rec(e.right)
        if e.op == "add":
            return a + b
        if e.op == "sub":
            return a - b
        if e.op == "mul":
            return J.elementwise_product(a, b)
        return J.elementwise_product(a, J.reciprocal(b))

    return rec(node)


def evaluate_values(node, points):
    """Plain values (no derivatives) on a batch of points."""
    return evaluate(node, points, order=0).v


def evaluate_array(nodes, points, order=2):
    """Evaluate a nested list of trees into one :class:`JetArray` of matching tensor shape."""
    if isinstance(nodes, (str, Const, Coord, Unary, Binary)):
        return evaluate(nodes, points, order)
    nodes_arr = np.empty(np.shape(nodes), dtype=object)
    _fill(nodes_arr, nodes)
    flat = [evaluate(e, points, order) for e in nodes_arr.ravel()]
    return J.stack(flat, axis=0).reshape(nodes_arr.shape)


def _fill(target, nested):
    for idx in np.ndindex(target.shape):
        item = nested
        for k in idx:
            item = item[k]
        target[idx] = item


# ----------------------------------------------------------------------
# Single-point API


def eval_jet(e, p):
    """Value, gradient and Hessian of ``e`` at the point ``p`` (order budget 2)."""
    coords = np.asarray(getattr(p, "coords", p), dtype=float)[None, :]
    jet = evaluate(e, coords, order=2)
    return J.Jet2Scalar(float(jet.v[0]), jet.d1[0].copy(), jet.d2[0].copy(), 2)

"""Scalar-field expressions over a coordinate chart, evaluated as order-2 jets.

Every structure function of a model (anchor components, bracket coefficients,
form coefficients) is one of these expressions.  Evaluation returns the value
together with the exact gradient and Hessian at the point, so downstream
operators (exterior derivative, Lie derivative, connection curvature) never
resort to finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

_FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")


class ExprError(Exception):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, offset: int, expected: str):
        self.offset = offset
        self.expected = expected
        super().__init__(f"syntax error at offset {offset}: expected {expected}")


class UnknownCoordinateError(ExprError):
    def __init__(self, name: str, offset: int):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown coordinate {name!r} at offset {offset}")


class DomainError(ExprError):
    """Raised when evaluation leaves the domain of a partial function."""

    def __init__(self, op: str, point: Sequence[float]):
        self.op = op
        self.point = tuple(float(v) for v in point)
        super().__init__(f"domain error in {op} at point {self.point}")


# AST nodes.  Kept as plain frozen dataclasses; evaluation walks the tree
# left to right so results are bit-reproducible.

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Coord:
    index: int
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Const | Coord | Neg | BinOp | Call


@dataclass(frozen=True)
class Expression:
    """A parsed scalar field tied to a chart (tuple of coordinate names)."""

    ast: Node
    chart: tuple[str, ...]

    def __call__(self, point: Sequence[float]) -> float:
        return eval_jet2(self, point).value

    def jet(self, point: Sequence[float]) -> "Jet2":
        return eval_jet2(self, point)


_UPPER_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _upper_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _UPPER_CACHE:
        _UPPER_CACHE[n] = np.triu_indices(n)
    return _UPPER_CACHE[n]


class Jet2:
    """Value, gradient and Hessian of a scalar field at a point.

    The Hessian is stored as the packed upper triangle, so symmetry is exact
    by construction.  Gradient/Hessian may be absent for jets produced by
    derivative-consuming operations (each application of ``partial`` drops
    one order); arithmetic propagates whatever orders both operands carry.
    """

    __slots__ = ("value", "gradient", "hess_upper", "dim")

    def __init__(self, value: float, gradient: Optional[np.ndarray],
                 hess_upper: Optional[np.ndarray], dim: int):
        self.value = float(value)
        self.gradient = gradient
        self.hess_upper = hess_upper
        self.dim = dim

    # -- constructors -------------------------------------------------

    @staticmethod
    def constant(value: float, dim: int) -> "Jet2":
        m = dim * (dim + 1) // 2
        return Jet2(value, np.zeros(dim), np.zeros(m), dim)

    @staticmethod
    def coordinate(value: float, index: int, dim: int) -> "Jet2":
        g = np.zeros(dim)
        g[index] = 1.0
        m = dim * (dim + 1) // 2
        return Jet2(value, g, np.zeros(m), dim)

    # -- views ---------------------------------------------------------

    @property
    def hessian(self) -> Optional[np.ndarray]:
        """Full symmetric Hessian matrix rebuilt from the packed triangle."""
        if self.hess_upper is None:
            return None
        h = np.zeros((self.dim, self.dim))
        iu, ju = _upper_indices(self.dim)
        h[iu, ju] = self.hess_upper
        h[ju, iu] = self.hess_upper
        return h

    @property
    def order(self) -> int:
        if self.hess_upper is not None:
            return 2
        if self.gradient is not None:
            return 1
        return 0

    def partial(self, i: int) -> "Jet2":
        """Jet of the i-th partial derivative (one order lower)."""
        if self.gradient is None:
            raise ValueError("jet carries no gradient; cannot differentiate")
        g = None
        if self.hess_upper is not None:
            g = self.hessian[i]
        return Jet2(self.gradient[i], g, None, self.dim)

    # -- arithmetic ----------------------------------------------------

    def __add__(self, other: "Jet2") -> "Jet2":
        g = h = None
        if self.gradient is not None and other.gradient is not None:
            g = self.gradient + other.gradient
            if self.hess_upper is not None and other.hess_upper is not None:
                h = self.hess_upper + other.hess_upper
        return Jet2(self.value + other.value, g, h, self.dim)

    def __sub__(self, other: "Jet2") -> "Jet2":
        g = h = None
        if self.gradient is not None and other.gradient is not None:
            g = self.gradient - other.gradient
            if self.hess_upper is not None and other.hess_upper is not None:
                h = self.hess_upper - other.hess_upper
        return Jet2(self.value - other.value, g, h, self.dim)

    def __neg__(self) -> "Jet2":
        g = None if self.gradient is None else -self.gradient
        h = None if self.hess_upper is None else -self.hess_upper
        return Jet2(-self.value, g, h, self.dim)

    def __mul__(self, other: "Jet2") -> "Jet2":
        g = h = None
        if self.gradient is not None and other.gradient is not None:
            g = self.value * other.gradient + other.value * self.gradient
            if self.hess_upper is not None and other.hess_upper is not None:
                iu, ju = _upper_indices(self.dim)
                cross = (self.gradient[iu] * other.gradient[ju]
                         + self.gradient[ju] * other.gradient[iu])
                h = self.value * other.hess_upper + other.value * self.hess_upper + cross
        return Jet2(self.value * other.value, g, h, self.dim)

    def scaled(self, c: float) -> "Jet2":
        g = None if self.gradient is None else c * self.gradient
        h = None if self.hess_upper is None else c * self.hess_upper
        return Jet2(c * self.value, g, h, self.dim)

    def _chain(self, f0: float, f1: float, f2: float) -> "Jet2":
        g = h = None
        if self.gradient is not None:
            g = f1 * self.gradient
            if self.hess_upper is not None:
                iu, ju = _upper_indices(self.dim)
                h = f1 * self.hess_upper + f2 * self.gradient[iu] * self.gradient[ju]
        return Jet2(f0, g, h, self.dim)

    def reciprocal(self, point: Sequence[float]) -> "Jet2":
        t = self.value
        if t == 0.0:
            raise DomainError("divide", point)
        return self._chain(1.0 / t, -1.0 / (t * t), 2.0 / (t * t * t))

    def pow_const(self, c: float, point: Sequence[float]) -> "Jet2":
        t = self.value
        if c == int(c):
            ci = int(c)
            if ci < 0 and t == 0.0:
                raise DomainError("pow", point)
            f0 = t ** ci
            f1 = ci * t ** (ci - 1) if ci != 0 else 0.0
            f2 = ci * (ci - 1) * t ** (ci - 2) if ci not in (0, 1) else 0.0
        else:
            if t <= 0.0:
                raise DomainError("pow", point)
            f0 = t ** c
            f1 = c * t ** (c - 1.0)
            f2 = c * (c - 1.0) * t ** (c - 2.0)
        return self._chain(f0, f1, f2)

    def sin(self) -> "Jet2":
        s, c = math.sin(self.value), math.cos(self.value)
        return self._chain(s, c, -s)

    def cos(self) -> "Jet2":
        s, c = math.sin(self.value), math.cos(self.value)
        return self._chain(c, -s, -c)

    def exp(self) -> "Jet2":
        e = math.exp(self.value)
        return self._chain(e, e, e)

    def log(self, point: Sequence[float]) -> "Jet2":
        t = self.value
        if t <= 0.0:
            raise DomainError("log", point)
        return self._chain(math.log(t), 1.0 / t, -1.0 / (t * t))

    def sqrt(self, point: Sequence[float]) -> "Jet2":
        t = self.value
        if t <= 0.0:
            raise DomainError("sqrt", point)
        r = math.sqrt(t)
        return self._chain(r, 0.5 / r, -0.25 / (t * r))


# ----------------------------------------------------------------------
# Tokenizer / parser.  Grammar (also published in docs/model-format.md):
#
#   expr   = term , { ("+" | "-") , term } ;
#   term   = unary , { ("*" | "/") , unary } ;
#   unary  = "-" , unary | power ;
#   power  = atom , [ "^" , unary ] ;          (right associative)
#   atom   = number | name , "(" , expr , ")" | name | "(" , expr , ")" ;
#
# so "^" binds tighter than unary minus and "-x^2" reads as "-(x^2)".

_TOKEN_OPS = set("+-*/^()")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens: list[tuple[str, str, int]] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _TOKEN_OPS:
            tokens.append(("op", ch, i))
            i += 1
            continue
        if ch.isdigit() or ch == ".":
            j = i
            seen_dot = False
            while j < n and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                if text[j] == ".":
                    seen_dot = True
                j += 1
            # exponent part: 1e-3, 2.5E+10
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    while k < n and text[k].isdigit():
                        k += 1
                    j = k
            tokens.append(("num", text[i:j], i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j], i))
            i = j
            continue
        raise ExprSyntaxError(i, "number, name, operator or parenthesis")
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, tokens: list[tuple[str, str, int]], chart: Sequence[str]):
        self.tokens = tokens
        self.pos = 0
        self.chart = list(chart)

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str):
        kind, val, off = self.peek()
        if kind != "op" or val != op:
            raise ExprSyntaxError(off, repr(op))
        return self.take()

    def parse_expr(self) -> Node:
        node = self.parse_term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                rhs = self.parse_term()
                node = BinOp(val, node, rhs)
            else:
                return node

    def parse_term(self) -> Node:
        node = self.parse_unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.take()
                rhs = self.parse_unary()
                node = BinOp(val, node, rhs)
            else:
                return node

    def parse_unary(self) -> Node:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return Neg(self.parse_unary())
        return self.parse_power()

    def parse_power(self) -> Node:
        base = self.parse_atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.take()
            return BinOp("^", base, self.parse_unary())
        return base

    def parse_atom(self) -> Node:
        kind, val, off = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "name":
            nkind, nval, _ = self.peek()
            if nkind == "op" and nval == "(":
                if val not in _FUNCTIONS:
                    raise ExprSyntaxError(off, f"one of {', '.join(_FUNCTIONS)}")
                self.take()
                arg = self.parse_expr()
                self.expect_op(")")
                return Call(val, arg)
            if val in self.chart:
                return Coord(self.chart.index(val), val)
            raise UnknownCoordinateError(val, off)
        if kind == "op" and val == "(":
            node = self.parse_expr()
            self.expect_op(")")
            return node
        raise ExprSyntaxError(off, "number, coordinate, function call or '('")


def parse_expression(text: str, chart: Sequence[str]) -> Expression:
    """Parse ``text`` against the coordinate names in ``chart``."""
    parser = _Parser(_tokenize(text), chart)
    node = parser.parse_expr()
    kind, _, off = parser.peek()
    if kind != "end":
        raise ExprSyntaxError(off, "end of expression or operator")
    return Expression(node, tuple(chart))


def _eval_node(node: Node, point: Sequence[float], dim: int) -> Jet2:
    if isinstance(node, Const):
        return Jet2.constant(node.value, dim)
    if isinstance(node, Coord):
        return Jet2.coordinate(point[node.index], node.index, dim)
    if isinstance(node, Neg):
        return -_eval_node(node.arg, point, dim)
    if isinstance(node, Call):
        arg = _eval_node(node.arg, point, dim)
        if node.func == "sin":
            return arg.sin()
        if node.func == "cos":
            return arg.cos()
        if node.func == "exp":
            return arg.exp()
        if node.func == "log":
            return arg.log(point)
        if node.func == "sqrt":
            return arg.sqrt(point)
        raise ValueError(f"unknown function {node.func!r}")
    if isinstance(node, BinOp):
        left = _eval_node(node.left, point, dim)
        if node.op == "^":
            if isinstance(node.right, Const):
                return left.pow_const(node.right.value, point)
            if isinstance(node.right, Neg) and isinstance(node.right.arg, Const):
                return left.pow_const(-node.right.arg.value, point)
            right = _eval_node(node.right, point, dim)
            # general exponent via exp(g * log f)
            return (right * left.log(point)).exp()
        right = _eval_node(node.right, point, dim)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        if node.op == "/":
            return left * right.reciprocal(point)
    raise TypeError(f"unexpected node {node!r}")


def eval_jet2(expr: Expression, point: Sequence[float]) -> Jet2:
    """Evaluate ``expr`` at ``point`` as an order-2 jet."""
    p = np.asarray(point, dtype=float)
    if p.shape != (len(expr.chart),):
        raise ValueError(f"point has dimension {p.shape}, chart has {len(expr.chart)}")
    return _eval_node(expr.ast, p, len(expr.chart))


# ----------------------------------------------------------------------
# Expression building blocks.  Used to synthesize reduced-model
# coefficients (substituted anchors, Cramer-rule bivectors) as honest
# expression trees that can be serialized back to model files.

def const_expr(value: float, chart: Sequence[str]) -> Expression:
    return Expression(Const(float(value)), tuple(chart))


def coord_expr(name: str, chart: Sequence[str]) -> Expression:
    return Expression(Coord(list(chart).index(name), name), tuple(chart))


def _is_const(node: Node, value: Optional[float] = None) -> bool:
    if not isinstance(node, Const):
        return False
    return value is None or node.value == value


def _combine(op: str, a: Node, b: Node) -> Node:
    # light constant folding keeps generated files readable
    if isinstance(a, Const) and isinstance(b, Const):
        if op == "+":
            return Const(a.value + b.value)
        if op == "-":
            return Const(a.value - b.value)
        if op == "*":
            return Const(a.value * b.value)
        if op == "/" and b.value != 0.0:
            return Const(a.value / b.value)
    if op == "+":
        if _is_const(a, 0.0):
            return b
        if _is_const(b, 0.0):
            return a
    if op == "-" and _is_const(b, 0.0):
        return a
    if op == "*":
        if _is_const(a, 0.0) or _is_const(b, 0.0):
            return Const(0.0)
        if _is_const(a, 1.0):
            return b
        if _is_const(b, 1.0):
            return a
    if op == "/" and _is_const(a, 0.0):
        return Const(0.0)
    return BinOp(op, a, b)


def _same_chart(a: Expression, b: Expression) -> tuple[str, ...]:
    if a.chart != b.chart:
        raise ValueError("expressions live on different charts")
    return a.chart


def ex_add(a: Expression, b: Expression) -> Expression:
    return Expression(_combine("+", a.ast, b.ast), _same_chart(a, b))


def ex_sub(a: Expression, b: Expression) -> Expression:
    return Expression(_combine("-", a.ast, b.ast), _same_chart(a, b))


def ex_mul(a: Expression, b: Expression) -> Expression:
    return Expression(_combine("*", a.ast, b.ast), _same_chart(a, b))


def ex_div(a: Expression, b: Expression) -> Expression:
    return Expression(_combine("/", a.ast, b.ast), _same_chart(a, b))


def ex_neg(a: Expression) -> Expression:
    if isinstance(a.ast, Const):
        return Expression(Const(-a.ast.value), a.chart)
    return Expression(Neg(a.ast), a.chart)


def substitute(expr: Expression, values: dict[str, float],
               new_chart: Sequence[str]) -> Expression:
    """Replace coordinates in ``values`` by constants and re-index the rest
    against ``new_chart``."""
    new_chart = tuple(new_chart)

    def walk(node: Node) -> Node:
        if isinstance(node, Const):
            return node
        if isinstance(node, Coord):
            if node.name in values:
                return Const(float(values[node.name]))
            if node.name not in new_chart:
                raise ValueError(f"coordinate {node.name!r} missing from target chart")
            return Coord(new_chart.index(node.name), node.name)
        if isinstance(node, Neg):
            return Neg(walk(node.arg))
        if isinstance(node, BinOp):
            return BinOp(node.op, walk(node.left), walk(node.right))
        if isinstance(node, Call):
            return Call(node.func, walk(node.arg))
        raise TypeError(node)

    return Expression(walk(expr.ast), new_chart)


def _fmt_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def to_text(expr: Expression) -> str:
    """Serialize an expression back to parseable text."""

    def walk(node: Node, parent_prec: int, right_side: bool) -> str:
        if isinstance(node, Const):
            if node.value < 0:
                s = "-" + _fmt_number(-node.value)
                return f"({s})" if parent_prec > _PREC["neg"] or (parent_prec > 0) else s
            return _fmt_number(node.value)
        if isinstance(node, Coord):
            return node.name
        if isinstance(node, Call):
            return f"{node.func}({walk(node.arg, 0, False)})"
        if isinstance(node, Neg):
            inner = walk(node.arg, _PREC["neg"], False)
            s = f"-{inner}"
            return f"({s})" if parent_prec >= _PREC["neg"] else s
        if isinstance(node, BinOp):
            prec = _PREC[node.op]
            left = walk(node.left, prec, False)
            # right operand needs a bump for left-assoc ops; ^ is right-assoc
            rp = prec if node.op == "^" else prec + (0 if node.op in "+*" else 1)
            right = walk(node.right, rp if node.op != "^" else prec - 1, True)
            s = f"{left} {node.op} {right}" if node.op in "+-" else f"{left}{node.op}{right}"
            return f"({s})" if parent_prec > prec or (parent_prec == prec and right_side) else s
        raise TypeError(node)

    return walk(expr.ast, 0, False)

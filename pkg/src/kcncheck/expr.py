"""Closed-form scalar expressions over chart coordinates.

Expressions are parsed from a small infix grammar and evaluated to 2-jets
(value, gradient, Hessian) by forward-mode differentiation. Evaluation is
vectorised: ``points`` may carry any number of leading batch axes.

Grammar, loosest binding first::

    sum     := product (('+' | '-') product)*
    product := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' exponent)?
    atom    := number | coord | func '(' sum ')' | '(' sum ')'
    exponent:= ['-'] integer | '(' ['-'] integer ')'
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

MAX_POWER = 16
FUNCTIONS = ("sin", "cos", "exp", "sqrt")
# |denominator| at or below this is treated as a division by zero
DIV_EPS = 1e-12


class ExprError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int, source: str = ""):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.source = source


class ExprDomainError(ExprError):
    def __init__(self, message: str, subexpr: str, point=None):
        where = "" if point is None else f" at point {tuple(float(x) for x in point)}"
        super().__init__(f"{message} in {subexpr}{where}")
        self.subexpr = subexpr
        self.point = point


# ---------------------------------------------------------------- AST nodes


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
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Const, Coord, Neg, BinOp, Pow, Call]


def serialize_node(node: Node) -> str:
    """Fully parenthesised canonical text for ``node``."""
    if isinstance(node, Const):
        return repr(float(node.value))
    if isinstance(node, Coord):
        return node.name
    if isinstance(node, Neg):
        return f"(-{serialize_node(node.arg)})"
    if isinstance(node, BinOp):
        return f"({serialize_node(node.left)} {node.op} {serialize_node(node.right)})"
    if isinstance(node, Pow):
        return f"({serialize_node(node.base)} ^ {node.exponent})"
    if isinstance(node, Call):
        return f"{node.func}({serialize_node(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------- jets


@dataclass(frozen=True)
class Jet2:
    """Value, gradient and Hessian of a scalar function.

    Arrays carry the same leading batch shape; ``gradient`` adds one axis
    of length m and ``hessian`` two.
    """

    value: np.ndarray
    gradient: np.ndarray
    hessian: np.ndarray

    @property
    def dim(self) -> int:
        return self.gradient.shape[-1]


def _outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., :, None] * b[..., None, :]


def _chain(u: Jet2, f0, f1, f2) -> Jet2:
    """Compose a scalar function with derivatives (f0, f1, f2) at u.value."""
    g = u.gradient
    hess = f1[..., None, None] * u.hessian + f2[..., None, None] * _outer(g, g)
    return Jet2(f0, f1[..., None] * g, _symmetrize(hess))


def _symmetrize(h: np.ndarray) -> np.ndarray:
    return 0.5 * (h + np.swapaxes(h, -1, -2))


def _add(a: Jet2, b: Jet2, sign: float) -> Jet2:
    return Jet2(a.value + sign * b.value, a.gradient + sign * b.gradient,
                a.hessian + sign * b.hessian)


def _mul(a: Jet2, b: Jet2) -> Jet2:
    av, bv = a.value[..., None], b.value[..., None]
    cross = _outer(a.gradient, b.gradient)
    hess = (av[..., None] * b.hessian + bv[..., None] * a.hessian
            + cross + np.swapaxes(cross, -1, -2))
    return Jet2(a.value * b.value, av * b.gradient + bv * a.gradient, hess)


# ------------------------------------------------------------------ Expression


@dataclass(frozen=True)
class Expression:
    """Immutable parsed expression together with its coordinate names."""

    root: Node
    coords: tuple

    @property
    def dim(self) -> int:
        return len(self.coords)

    def serialize(self) -> str:
        return serialize_node(self.root)

    def __str__(self) -> str:
        return self.serialize()

    def eval_jet2(self, point) -> Jet2:
        return eval_jet2(self, point)

    def value(self, point) -> np.ndarray:
        return eval_jet2(self, point).value

    def is_constant(self) -> bool:
        return not _uses_coords(self.root)


def _uses_coords(node: Node) -> bool:
    if isinstance(node, Coord):
        return True
    if isinstance(node, Const):
        return False
    if isinstance(node, BinOp):
        return _uses_coords(node.left) or _uses_coords(node.right)
    if isinstance(node, Pow):
        return _uses_coords(node.base)
    return _uses_coords(node.arg)


def eval_jet2(e: Expression, point) -> Jet2:
    """Evaluate the 2-jet of ``e`` at ``point`` (shape (..., dim))."""
    x = np.asarray(point, dtype=float)
    if x.ndim == 0 or x.shape[-1] != e.dim:
        raise ValueError(f"point must have trailing length {e.dim}, got shape {x.shape}")
    with np.errstate(all="ignore"):
        return _eval(e.root, x, e.dim)


def _bad_point(mask: np.ndarray, x: np.ndarray):
    if mask.ndim == 0:
        return x
    idx = np.argwhere(mask)[0]
    return x[tuple(idx)]


def _eval(node: Node, x: np.ndarray, m: int) -> Jet2:
    batch = x.shape[:-1]
    if isinstance(node, Const):
        return Jet2(np.full(batch, node.value), np.zeros(batch + (m,)),
                    np.zeros(batch + (m, m)))
    if isinstance(node, Coord):
        grad = np.zeros(batch + (m,))
        grad[..., node.index] = 1.0
        return Jet2(x[..., node.index].copy(), grad, np.zeros(batch + (m, m)))
    if isinstance(node, Neg):
        u = _eval(node.arg, x, m)
        return Jet2(-u.value, -u.gradient, -u.hessian)
    if isinstance(node, BinOp):
        a = _eval(node.left, x, m)
        b = _eval(node.right, x, m)
        if node.op == "+":
            return _add(a, b, 1.0)
        if node.op == "-":
            return _add(a, b, -1.0)
        if node.op == "*":
            return _mul(a, b)
        bad = np.abs(b.value) <= DIV_EPS
        if np.any(bad):
            raise ExprDomainError("division by ~0", serialize_node(node.right),
                                  _bad_point(bad, x))
        r = 1.0 / b.value
        return _mul(a, _chain(b, r, -r * r, 2.0 * r * r * r))
    if isinstance(node, Pow):
        u = _eval(node.base, x, m)
        k = node.exponent
        if k == 0:
            return _eval(Const(1.0), x, m)
        if k < 0:
            bad = np.abs(u.value) <= DIV_EPS
            if np.any(bad):
                raise ExprDomainError("negative power of ~0", serialize_node(node),
                                      _bad_point(bad, x))
        v = u.value
        f1 = k * v ** (k - 1) if k != 1 else np.ones_like(v)
        if k == 1:
            f2 = np.zeros_like(v)
        elif k == 2:
            f2 = np.full_like(v, 2.0)
        else:
            f2 = k * (k - 1) * v ** (k - 2)
        return _chain(u, v ** k, f1, f2)
    if isinstance(node, Call):
        u = _eval(node.arg, x, m)
        v = u.value
        if node.func == "sin":
            s, c = np.sin(v), np.cos(v)
            return _chain(u, s, c, -s)
        if node.func == "cos":
            s, c = np.sin(v), np.cos(v)
            return _chain(u, c, -s, -c)
        if node.func == "exp":
            ev = np.exp(v)
            return _chain(u, ev, ev, ev)
        if node.func == "sqrt":
            # sqrt is not differentiable at 0
            bad = v <= 0.0
            if np.any(bad):
                raise ExprDomainError("sqrt of non-positive value", serialize_node(node),
                                      _bad_point(bad, x))
            r = np.sqrt(v)
            return _chain(u, r, 0.5 / r, -0.25 / (r * v))
    raise TypeError(f"not an expression node: {node!r}")


# --------------------------------------------------------------------- parser

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


@dataclass
class _Tok:
    kind: str
    text: str
    offset: int


def _tokenize(src: str) -> list:
    toks = []
    pos = 0
    while True:
        while pos < len(src) and src[pos].isspace():
            pos += 1
        if pos >= len(src):
            break
        m = _TOKEN_RE.match(src, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", pos, src)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append(_Tok(kind, m.group(kind), start))
        pos = m.end()
    toks.append(_Tok("end", "", len(src)))
    return toks


class _Parser:
    def __init__(self, src: str, coords: Sequence[str]):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0
        self.coords = {name: k for k, name in enumerate(coords)}

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, message: str, tok: _Tok = None):
        tok = tok or self.tok
        if tok.kind == "end":
            message = f"{message} (unexpected end of input)"
        raise ExprSyntaxError(message, tok.offset, self.src)

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str):
        if not self.accept(text):
            self.error(f"expected {text!r}")

    def parse(self) -> Node:
        node = self.sum()
        if self.tok.kind != "end":
            self.error(f"unexpected token {self.tok.text!r}")
        return node

    def sum(self) -> Node:
        node = self.product()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.product())
        return node

    def product(self) -> Node:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.accept("-"):
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.accept("^"):
            return Pow(base, self.exponent())
        return base

    def exponent(self) -> int:
        paren = self.accept("(")
        sign = -1 if self.accept("-") else 1
        tok = self.tok
        if tok.kind != "num" or not tok.text.isdigit():
            self.error("exponent must be an integer literal")
        k = sign * int(tok.text)
        if abs(k) > MAX_POWER:
            self.error(f"exponent {k} exceeds |k| <= {MAX_POWER}", tok)
        self.i += 1
        if paren:
            self.expect(")")
        return k

    def atom(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Const(float(tok.text))
        if tok.kind == "name":
            self.i += 1
            if tok.text in FUNCTIONS:
                if not self.accept("("):
                    self.error(f"function {tok.text} requires an argument list")
                arg = self.sum()
                if self.tok.kind == "op" and self.tok.text == ",":
                    self.error(f"function {tok.text} takes exactly 1 argument")
                self.expect(")")
                return Call(tok.text, arg)
            if tok.text in self.coords:
                if self.tok.kind == "op" and self.tok.text == "(":
                    self.error(f"coordinate {tok.text} cannot be called")
                return Coord(self.coords[tok.text], tok.text)
            self.error(f"unknown identifier {tok.text!r}", tok)
        if self.accept("("):
            node = self.sum()
            self.expect(")")
            return node
        self.error("expected a number, coordinate, function call or '('")


def default_coords(dim: int) -> tuple:
    return tuple(f"x{k + 1}" for k in range(dim))


def parse(source: str, coords: Union[int, Sequence[str]]) -> Expression:
    """Parse ``source``; ``coords`` is a list of coordinate names or a dimension.

    A bare dimension ``n`` declares the coordinates ``x1 .. xn``.
    """
    if isinstance(coords, (int, np.integer)):
        if coords <= 0:
            raise ValueError("dimension must be positive")
        coords = default_coords(int(coords))
    coords = tuple(coords)
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0, source)
    return Expression(_Parser(source, coords).parse(), coords)


def constant(value: float, coords: Union[int, Sequence[str]]) -> Expression:
    if isinstance(coords, (int, np.integer)):
        coords = default_coords(int(coords))
    if value < 0:
        return Expression(Neg(Const(-float(value))), tuple(coords))
    return Expression(Const(float(value)), tuple(coords))


def is_zero(e: Expression) -> bool:
    return isinstance(e.root, Const) and e.root.value == 0.0

"""Expression trees for Lagrangians: parsing, printing, evaluation and
symbolic differentiation.

Variables are ``t`` and ``y0`` ... ``y32`` where ``yk`` stands for the k-th
derivative of the unknown. Trees are immutable; evaluation accepts floats or
numpy arrays and walks the tree in left-to-right post-order.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .errors import (
    DomainError,
    ExponentError,
    NonSmoothError,
    ParseError,
    UnboundVariableError,
    UnknownIdentifierError,
)

MAX_ORDER = 32
UNARY_OPS = ("neg", "sin", "cos", "exp", "log", "sqrt", "abs")
BINARY_OPS = ("add", "sub", "mul", "div")
_VAR_RE = re.compile(r"t|y(0|[1-9][0-9]?)")


def is_variable_name(name: str) -> bool:
    m = _VAR_RE.fullmatch(name)
    if m is None:
        return False
    return name == "t" or int(name[1:]) <= MAX_ORDER


class Expr:
    __slots__ = ()

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True)
class Const(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def __post_init__(self):
        if not is_variable_name(self.name):
            raise ValueError(f"invalid variable name {self.name!r}")


@dataclass(frozen=True)
class Unary(Expr):
    op: str
    arg: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int


Number = Union[float, np.ndarray]

# ---------------------------------------------------------------------------
# constant-folding constructors


def const(v) -> Const:
    return Const(float(v))


def _fold(node: Expr) -> Expr:
    if isinstance(node, Unary) and isinstance(node.arg, Const):
        return Const(float(_apply_unary(node, node.op, np.float64(node.arg.value))))
    if isinstance(node, Binary) and isinstance(node.left, Const) and isinstance(node.right, Const):
        return Const(float(_apply_binary(node, node.op, np.float64(node.left.value),
                                         np.float64(node.right.value))))
    if isinstance(node, Pow) and isinstance(node.base, Const):
        return Const(float(_apply_pow(node, np.float64(node.base.value), node.exponent)))
    return node


def unary(op: str, arg: Expr) -> Expr:
    if op not in UNARY_OPS:
        raise ValueError(f"unknown unary op {op!r}")
    return _fold(Unary(op, arg))


def binary(op: str, left: Expr, right: Expr) -> Expr:
    if op not in BINARY_OPS:
        raise ValueError(f"unknown binary op {op!r}")
    return _fold(Binary(op, left, right))


def power(base: Expr, exponent: int) -> Expr:
    if int(exponent) != exponent:
        raise ValueError("exponent must be an integer")
    return _fold(Pow(base, int(exponent)))


# 0/1 identities, used only when building derivative trees.

def _is(e: Expr, v: float) -> bool:
    return isinstance(e, Const) and e.value == v


def s_add(a, b):
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    return binary("add", a, b)


def s_sub(a, b):
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return s_neg(b)
    return binary("sub", a, b)


def s_mul(a, b):
    if _is(a, 0.0) or _is(b, 0.0):
        return Const(0.0)
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    return binary("mul", a, b)


def s_div(a, b):
    if _is(a, 0.0):
        return Const(0.0)
    if _is(b, 1.0):
        return a
    return binary("div", a, b)


def s_neg(a):
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return unary("neg", a)


def s_pow(a, k):
    if k == 0:
        return Const(1.0)
    if k == 1:
        return a
    return power(a, k)


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    raw = text.encode("utf-8")
    # byte offsets of each character position
    offsets = [len(text[:i].encode("utf-8")) for i in range(len(text) + 1)]
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos
            while bad < len(text) and text[bad].isspace():
                bad += 1
            raise ParseError(f"unexpected character {text[bad]!r}", offsets[bad])
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), offsets[start]))
        pos = m.end()
    tokens.append(("eof", "", len(raw)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        tok = self.take()
        if tok[1] != value or tok[0] != "op":
            raise ParseError(f"expected {value!r}", tok[2])
        return tok

    def parse(self):
        e = self.expr()
        tok = self.peek()
        if tok[0] != "eof":
            raise ParseError(f"unexpected token {tok[1]!r}", tok[2])
        return e

    def expr(self):
        e = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            e = binary("add" if op == "+" else "sub", e, self.term())
        return e

    def term(self):
        e = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            e = binary("mul" if op == "*" else "div", e, self.unary())
        return e

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.take()
            return unary("neg", self.unary())
        if tok[0] == "op" and tok[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.primary()
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "^":
            self.take()
            at = self.peek()[2]
            exponent = self.unary()
            if not isinstance(exponent, Const) or exponent.value != int(exponent.value):
                raise ExponentError("exponent must be an integer constant", at)
            return power(base, int(exponent.value))
        return base

    def primary(self):
        tok = self.take()
        kind, value, offset = tok
        if kind == "num":
            return Const(float(value))
        if kind == "name":
            if value in UNARY_OPS and value != "neg":
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return unary(value, arg)
            if is_variable_name(value):
                return Var(value)
            raise UnknownIdentifierError(f"unknown identifier {value!r}", offset)
        if kind == "op" and value == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "eof":
            # point at the operator that is missing its operand
            prev = self.tokens[self.i - 2] if self.i >= 2 else tok
            raise ParseError("unexpected end of input", prev[2])
        raise ParseError(f"unexpected token {value!r}", offset)


def parse(text: str) -> Expr:
    """Parse infix text into a constant-folded expression tree.

    Precedence, tightest first: ``^`` (integer exponents only), unary minus,
    ``* /``, ``+ -``. Unary functions use call syntax, e.g. ``sin(t)``.
    """
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# printing


def _fmt_const(v: float) -> str:
    s = repr(float(v))
    return f"({s})" if s.startswith("-") else s


def to_text(e: Expr) -> str:
    """Fully parenthesised text that :func:`parse` maps back to an equal tree."""
    if isinstance(e, Const):
        return _fmt_const(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            return f"(-{to_text(e.arg)})"
        return f"{e.op}({to_text(e.arg)})"
    if isinstance(e, Binary):
        sym = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[e.op]
        return f"({to_text(e.left)} {sym} {to_text(e.right)})"
    if isinstance(e, Pow):
        exp = f"({e.exponent})" if e.exponent < 0 else str(e.exponent)
        return f"({to_text(e.base)}^{exp})"
    raise TypeError(type(e))


# ---------------------------------------------------------------------------
# evaluation


def _first_bad(mask):
    idx = np.flatnonzero(np.atleast_1d(mask))
    return None if np.ndim(mask) == 0 else int(idx[0])


def _apply_unary(node, op, x):
    with np.errstate(all="ignore"):
        if op == "neg":
            return -x
        if op == "sin":
            return np.sin(x)
        if op == "cos":
            return np.cos(x)
        if op == "exp":
            return np.exp(x)
        if op == "abs":
            return np.abs(x)
        if op == "log":
            bad = x <= 0
            if np.any(bad):
                raise DomainError("log of non-positive value", node=to_text(node), index=_first_bad(bad))
            return np.log(x)
        if op == "sqrt":
            bad = x < 0
            if np.any(bad):
                raise DomainError("sqrt of negative value", node=to_text(node), index=_first_bad(bad))
            return np.sqrt(x)
    raise ValueError(op)


def _apply_binary(node, op, x, y):
    with np.errstate(all="ignore"):
        if op == "add":
            return x + y
        if op == "sub":
            return x - y
        if op == "mul":
            return x * y
        if op == "div":
            bad = y == 0
            if np.any(bad):
                raise DomainError("division by zero", node=to_text(node), index=_first_bad(bad))
            return x / y
    raise ValueError(op)


def _apply_pow(node, x, k):
    if k < 0:
        bad = x == 0
        if np.any(bad):
            raise DomainError("zero to a negative power", node=to_text(node), index=_first_bad(bad))
    with np.errstate(all="ignore"):
        return x ** k


def _eval(e, env):
    if isinstance(e, Const):
        return np.float64(e.value)
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise UnboundVariableError(f"variable {e.name!r} is not bound") from None
    if isinstance(e, Unary):
        return _apply_unary(e, e.op, _eval(e.arg, env))
    if isinstance(e, Binary):
        left = _eval(e.left, env)
        right = _eval(e.right, env)
        return _apply_binary(e, e.op, left, right)
    if isinstance(e, Pow):
        return _apply_pow(e, _eval(e.base, env), e.exponent)
    raise TypeError(type(e))


def evaluate(e: Expr, bindings: Mapping[str, Number]) -> Number:
    """Evaluate ``e`` under ``bindings`` (floats or same-shape arrays).

    Returns a float for scalar bindings and an array broadcast against the
    bindings otherwise.
    """
    env = {k: (np.asarray(v, dtype=float) if np.ndim(v) else np.float64(v)) for k, v in bindings.items()}
    out = _eval(e, env)
    if np.ndim(out) == 0:
        return float(out)
    return out


def evaluate_like(e: Expr, bindings: Mapping[str, Number], like) -> np.ndarray:
    """Evaluate and broadcast to the shape of ``like`` (constants included)."""
    shape = like if isinstance(like, tuple) else np.shape(like)
    return np.broadcast_to(np.asarray(evaluate(e, bindings), dtype=float), shape).copy()


# ---------------------------------------------------------------------------
# structure queries


def free_variables(e: Expr) -> frozenset:
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, Var):
        return frozenset([e.name])
    if isinstance(e, Unary):
        return free_variables(e.arg)
    if isinstance(e, Binary):
        return free_variables(e.left) | free_variables(e.right)
    if isinstance(e, Pow):
        return free_variables(e.base)
    raise TypeError(type(e))


def contains_abs(e: Expr) -> bool:
    if isinstance(e, Unary):
        return e.op == "abs" or contains_abs(e.arg)
    if isinstance(e, Binary):
        return contains_abs(e.left) or contains_abs(e.right)
    if isinstance(e, Pow):
        return contains_abs(e.base)
    return False


def size(e: Expr) -> int:
    if isinstance(e, Unary):
        return 1 + size(e.arg)
    if isinstance(e, Binary):
        return 1 + size(e.left) + size(e.right)
    if isinstance(e, Pow):
        return 1 + size(e.base)
    return 1


# ---------------------------------------------------------------------------
# differentiation


def differentiate(e: Expr, var: str) -> Expr:
    """Exact partial derivative of ``e`` with respect to ``var``."""
    if not is_variable_name(var):
        raise ValueError(f"invalid variable name {var!r}")
    return _d(e, var)


def _d(e, v):
    if isinstance(e, Const):
        return Const(0.0)
    if isinstance(e, Var):
        return Const(1.0 if e.name == v else 0.0)
    if isinstance(e, Unary):
        a = e.arg
        if e.op == "abs":
            if v in free_variables(a):
                raise NonSmoothError(f"abs is not differentiable: {to_text(e)}")
            return Const(0.0)
        da = _d(a, v)
        if _is(da, 0.0):
            return Const(0.0)
        if e.op == "neg":
            return s_neg(da)
        if e.op == "sin":
            return s_mul(unary("cos", a), da)
        if e.op == "cos":
            return s_mul(s_neg(unary("sin", a)), da)
        if e.op == "exp":
            return s_mul(unary("exp", a), da)
        if e.op == "log":
            return s_div(da, a)
        if e.op == "sqrt":
            return s_div(da, s_mul(Const(2.0), unary("sqrt", a)))
        raise ValueError(e.op)
    if isinstance(e, Binary):
        a, b = e.left, e.right
        da, db = _d(a, v), _d(b, v)
        if e.op == "add":
            return s_add(da, db)
        if e.op == "sub":
            return s_sub(da, db)
        if e.op == "mul":
            return s_add(s_mul(da, b), s_mul(a, db))
        if e.op == "div":
            if _is(db, 0.0):
                return s_div(da, b)
            return s_div(s_sub(s_mul(da, b), s_mul(a, db)), s_pow(b, 2))
        raise ValueError(e.op)
    if isinstance(e, Pow):
        da = _d(e.base, v)
        if _is(da, 0.0) or e.exponent == 0:
            return Const(0.0)
        return s_mul(s_mul(Const(float(e.exponent)), s_pow(e.base, e.exponent - 1)), da)
    raise TypeError(type(e))


# ---------------------------------------------------------------------------
# Lagrangians


def yvar(k: int) -> str:
    return f"y{k}"


class Lagrangian:
    """Integrand f(t, y0, ..., yn) of an order-n energy functional.

    First partials are built on construction, second partials on first use
    (under a lock, so concurrent callers see one consistent tree). A
    Lagrangian containing ``abs`` is flagged non-smooth and refuses partials.
    """

    def __init__(self, order: int, f: Union[Expr, str]):
        if int(order) != order or order < 1:
            raise ValueError("order must be a positive integer")
        if order > MAX_ORDER:
            raise ValueError(f"order must be at most {MAX_ORDER}")
        self.order = int(order)
        self.f = parse(f) if isinstance(f, str) else f
        for name in free_variables(self.f):
            if name != "t" and int(name[1:]) > self.order:
                raise ValueError(f"{name} exceeds the order {self.order}")
        self.smooth = not contains_abs(self.f)
        self._dt = None
        self._dy = None
        if self.smooth:
            self._dt = differentiate(self.f, "t")
            self._dy = tuple(differentiate(self.f, yvar(k)) for k in range(self.order + 1))
        self._second = None
        self._lock = threading.Lock()

    def _require_smooth(self):
        if not self.smooth:
            raise NonSmoothError("Lagrangian contains abs; mollify it before differentiating")

    @property
    def dt(self) -> Expr:
        self._require_smooth()
        return self._dt

    @property
    def dy(self) -> tuple:
        self._require_smooth()
        return self._dy

    @property
    def second(self) -> tuple:
        """Matrix (tuple of tuples) of d2f/dyj dyk; entry [j][k] = d/dyk (df/dyj)."""
        self._require_smooth()
        if self._second is None:
            with self._lock:
                if self._second is None:
                    n = self.order
                    self._second = tuple(
                        tuple(differentiate(self._dy[j], yvar(k)) for k in range(n + 1))
                        for j in range(n + 1)
                    )
        return self._second

    def bindings(self, t, jet) -> dict:
        env = {"t": t}
        for k in range(self.order + 1):
            env[yvar(k)] = jet[k]
        return env

    def value(self, t, jet):
        return evaluate_like(self.f, self.bindings(t, jet), t)

    def partials(self, t, jet) -> np.ndarray:
        """Array (n+1, *t.shape) of df/dyk along the jet."""
        env = self.bindings(t, jet)
        return np.stack([evaluate_like(d, env, t) for d in self.dy])

    def second_partials(self, t, jet) -> np.ndarray:
        env = self.bindings(t, jet)
        sec = self.second
        n = self.order
        return np.stack([np.stack([evaluate_like(sec[j][k], env, t) for k in range(n + 1)])
                         for j in range(n + 1)])

    def __repr__(self):
        return f"Lagrangian(order={self.order}, f={to_text(self.f)!r})"

"""Closed-form scalar fields on a 3-coordinate chart.

Expressions are immutable, hash-consed trees (structurally equal expressions
are the same object), so a derived expression shares every unchanged subtree
with its source.  Evaluation is vectorized over numpy arrays of points, and
partial derivatives are exact and memoized per ``(node, axis)``.

Grammar accepted by :func:`parse_expr`::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := unary ('^' factor)?
    unary  := '-' unary | atom
    atom   := NUMBER | 'pi' | 'u1' | 'u2' | 'u3' | FUNC '(' expr ')' | '(' expr ')'

``^`` is right-associative and a leading minus applies to the whole power,
so ``-u1^2`` means ``-(u1^2)``.
"""

from __future__ import annotations

import math
import re
import threading
import weakref
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "FUNCTIONS",
    "ScalarExpr",
    "ExprError",
    "ParseError",
    "UnknownIdentifierError",
    "DomainError",
    "as_expr",
    "const",
    "coord",
    "parse_expr",
    "to_dag",
    "from_dag",
    "evaluate",
    "evaluate_many",
    "derive",
    "fd_check",
    "func",
    "ZERO",
    "ONE",
    "PI",
    "U1",
    "U2",
    "U3",
]

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh", "tanh", "atan")

_NUM = "num"
_VAR = "var"
_PI = "pi"
_NEG = "neg"
_ADD = "+"
_SUB = "-"
_MUL = "*"
_DIV = "/"
_POW = "^"


class ExprError(Exception):
    """Base class for expression errors."""


class ParseError(ExprError, ValueError):
    def __init__(self, message: str, offset: int, expected: Iterable[str] = ()):
        self.offset = offset
        self.expected = frozenset(expected)
        detail = f"{message} at offset {offset}"
        if self.expected:
            detail += " (expected one of: " + ", ".join(sorted(self.expected)) + ")"
        super().__init__(detail)


class UnknownIdentifierError(ParseError):
    def __init__(self, name: str, offset: int):
        self.name = name
        super().__init__(f"unknown identifier {name!r}", offset)


class DomainError(ExprError, ArithmeticError):
    """Raised when an expression is evaluated outside its domain."""

    def __init__(self, message: str, subexpr: "ScalarExpr"):
        self.subexpr = subexpr
        text = str(subexpr)
        if len(text) > 200:
            text = text[:197] + "..."
        super().__init__(f"{message} in subexpression {text}")


_intern_lock = threading.Lock()
_intern: "weakref.WeakValueDictionary[tuple, ScalarExpr]" = weakref.WeakValueDictionary()


def _make(op: str, args: tuple = (), value=None) -> "ScalarExpr":
    key = (op, value, args)
    node = _intern.get(key)
    if node is not None:
        return node
    with _intern_lock:
        node = _intern.get(key)
        if node is None:
            node = object.__new__(ScalarExpr)
            node.op = op
            node.args = args
            node.value = value
            node._d = {}
            _intern[key] = node
        return node


class ScalarExpr:
    """A node of an expression tree.

    Build expressions with :func:`parse_expr`, :func:`const`, :func:`coord`,
    :func:`func` or the arithmetic operators; never instantiate directly.
    ``value`` holds the number for literals, the axis (1-3) for coordinates,
    the exponent for powers and the function name for function nodes.
    """

    __slots__ = ("op", "args", "value", "_d", "__weakref__")

    def __new__(cls, *a, **k):
        raise TypeError("use parse_expr / const / coord to build expressions")

    # -- inspection -------------------------------------------------------
    @property
    def is_const(self) -> bool:
        return self.op in (_NUM, _PI)

    @property
    def const_value(self) -> float:
        if self.op == _NUM:
            return self.value
        if self.op == _PI:
            return math.pi
        raise ExprError(f"{self} is not a constant")

    def diff(self, axis: int) -> "ScalarExpr":
        return derive(self, axis)

    def __call__(self, point):
        return evaluate(self, point)

    def __str__(self) -> str:
        return _format(self)

    def __repr__(self) -> str:
        text = _format(self)
        if len(text) > 120:
            text = text[:117] + "..."
        return f"ScalarExpr({text!r})"

    def __reduce__(self):
        return (parse_expr, (_format(self),))

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pos__(self):
        return self

    def __pow__(self, other):
        return power(self, as_expr(other))

    def __rpow__(self, other):
        return power(as_expr(other), self)


def const(value: float) -> ScalarExpr:
    value = float(value)
    if not math.isfinite(value):
        raise ExprError(f"non-finite constant {value}")
    if value == 0.0:
        value = 0.0  # fold -0.0
    return _make(_NUM, (), value)


def coord(axis: int) -> ScalarExpr:
    if axis not in (1, 2, 3):
        raise ValueError(f"axis must be 1, 2 or 3, got {axis}")
    return _make(_VAR, (), axis)


ZERO = const(0.0)
ONE = const(1.0)
PI = _make(_PI)
U1, U2, U3 = coord(1), coord(2), coord(3)


def as_expr(x) -> ScalarExpr:
    if isinstance(x, ScalarExpr):
        return x
    if isinstance(x, str):
        return parse_expr(x)
    if isinstance(x, (int, float, np.integer, np.floating)):
        return const(x)
    raise TypeError(f"cannot convert {type(x).__name__} to ScalarExpr")


# -- smart constructors (constant folding, 0/1 elimination) -----------------

def _num(e: ScalarExpr) -> bool:
    return e.op == _NUM


def _fold(fn, *vals):
    try:
        with np.errstate(all="raise"):
            out = float(fn(*vals))
    except (ArithmeticError, ValueError, FloatingPointError):
        return None
    return out if math.isfinite(out) else None


def neg(a: ScalarExpr) -> ScalarExpr:
    if _num(a):
        return const(-a.value)
    if a.op == _NEG:
        return a.args[0]
    return _make(_NEG, (a,))


def add(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr:
    if _num(a) and _num(b):
        v = _fold(lambda x, y: x + y, a.value, b.value)
        if v is not None:
            return const(v)
    if a is ZERO:
        return b
    if b is ZERO:
        return a
    return _make(_ADD, (a, b))


def sub(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr:
    if _num(a) and _num(b):
        v = _fold(lambda x, y: x - y, a.value, b.value)
        if v is not None:
            return const(v)
    if b is ZERO:
        return a
    if a is ZERO:
        return neg(b)
    return _make(_SUB, (a, b))


def mul(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr:
    if _num(a) and _num(b):
        v = _fold(lambda x, y: x * y, a.value, b.value)
        if v is not None:
            return const(v)
    if a is ZERO or b is ZERO:
        return ZERO
    if a is ONE:
        return b
    if b is ONE:
        return a
    if _num(a) and a.value == -1.0:
        return neg(b)
    if _num(b) and b.value == -1.0:
        return neg(a)
    return _make(_MUL, (a, b))


def div(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr:
    if _num(a) and _num(b) and b.value != 0.0:
        v = _fold(lambda x, y: x / y, a.value, b.value)
        if v is not None:
            return const(v)
    if b is ONE:
        return a
    if a is ZERO and not (_num(b) and b.value == 0.0):
        return ZERO
    return _make(_DIV, (a, b))


def _pow_const(base: ScalarExpr, k: float) -> ScalarExpr:
    if k == 0.0:
        return ONE
    if k == 1.0:
        return base
    if base.is_const:
        v = _fold(lambda x: x**k, base.const_value)
        if v is not None:
            return const(v)
    if base is ZERO and k > 0:
        return ZERO
    return _make(_POW, (base,), float(k))


def power(base: ScalarExpr, exponent: ScalarExpr) -> ScalarExpr:
    """``base ^ exponent``; non-constant exponents become ``exp(exponent*log(base))``."""
    if exponent.is_const:
        return _pow_const(base, exponent.const_value)
    return func("exp", mul(exponent, func("log", base)))


_FOLDERS = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
    "sinh": math.sinh,
    "cosh": math.cosh,
    "tanh": math.tanh,
    "atan": math.atan,
}


def func(name: str, arg) -> ScalarExpr:
    if name not in _FOLDERS:
        raise UnknownIdentifierError(name, 0)
    arg = as_expr(arg)
    if arg.is_const:
        v = _fold(_FOLDERS[name], arg.const_value)
        if v is not None:
            return const(v)
    return _make(name, (arg,), name)


# -- traversal --------------------------------------------------------------

def _postorder(roots: Iterable[ScalarExpr], skip=None) -> list[ScalarExpr]:
    """Unique nodes reachable from ``roots``, children before parents.

    Nodes for which ``skip(node)`` is true are treated as leaves.
    """
    seen: set[int] = set()
    order: list[ScalarExpr] = []
    stack: list[tuple[ScalarExpr, bool]] = [(r, False) for r in roots]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        if skip is None or not skip(node):
            for child in node.args:
                if id(child) not in seen:
                    stack.append((child, False))
    return order


# -- differentiation --------------------------------------------------------

def _d_rule(node: ScalarExpr, axis: int, d: Sequence[ScalarExpr]) -> ScalarExpr:
    op = node.op
    if op in (_NUM, _PI):
        return ZERO
    if op == _VAR:
        return ONE if node.value == axis else ZERO
    if op == _NEG:
        return neg(d[0])
    if op == _ADD:
        return add(d[0], d[1])
    if op == _SUB:
        return sub(d[0], d[1])
    a = node.args[0]
    if op == _MUL:
        b = node.args[1]
        return add(mul(d[0], b), mul(a, d[1]))
    if op == _DIV:
        b = node.args[1]
        if d[1] is ZERO:
            return div(d[0], b)
        return div(sub(mul(d[0], b), mul(a, d[1])), _pow_const(b, 2.0))
    da = d[0]
    if da is ZERO:
        return ZERO
    if op == _POW:
        k = node.value
        return mul(mul(const(k), _pow_const(a, k - 1.0)), da)
    if op == "sin":
        return mul(func("cos", a), da)
    if op == "cos":
        return neg(mul(func("sin", a), da))
    if op == "tan":
        return div(da, _pow_const(func("cos", a), 2.0))
    if op == "exp":
        return mul(node, da)
    if op == "log":
        return div(da, a)
    if op == "sqrt":
        return div(da, mul(const(2.0), node))
    if op == "sinh":
        return mul(func("cosh", a), da)
    if op == "cosh":
        return mul(func("sinh", a), da)
    if op == "tanh":
        return mul(sub(ONE, _pow_const(node, 2.0)), da)
    if op == "atan":
        return div(da, add(ONE, _pow_const(a, 2.0)))
    raise ExprError(f"no derivative rule for {op!r}")


def derive(e, axis: int) -> ScalarExpr:
    """Exact partial derivative of ``e`` with respect to coordinate ``axis`` (1-3)."""
    e = as_expr(e)
    if axis not in (1, 2, 3):
        raise ValueError(f"axis must be 1, 2 or 3, got {axis}")
    hit = e._d.get(axis)
    if hit is not None:
        return hit
    for node in _postorder([e], skip=lambda n: axis in n._d):
        if axis not in node._d:
            node._d[axis] = _d_rule(node, axis, [c._d[axis] for c in node.args])
    return e._d[axis]


# -- evaluation -------------------------------------------------------------

def _as_coords(point):
    arr = np.asarray(point, dtype=float)
    if arr.shape[-1:] != (3,):
        raise ValueError(f"points must have a trailing axis of length 3, got shape {arr.shape}")
    return arr[..., 0], arr[..., 1], arr[..., 2], arr.shape[:-1]


def _apply(node: ScalarExpr, vals, coords):
    op = node.op
    if op == _NUM:
        return node.value
    if op == _VAR:
        return coords[node.value - 1]
    if op == _PI:
        return math.pi
    if op == _NEG:
        return -vals[0]
    if op == _ADD:
        return vals[0] + vals[1]
    if op == _SUB:
        return vals[0] - vals[1]
    if op == _MUL:
        return vals[0] * vals[1]
    x = vals[0]
    if op == _DIV:
        if np.any(np.asarray(vals[1]) == 0.0):
            raise DomainError("division by zero", node)
        return x / vals[1]
    if op == _POW:
        k = node.value
        xa = np.asarray(x)
        if k < 0 and np.any(xa == 0.0):
            raise DomainError("zero raised to a negative power", node)
        if not float(k).is_integer() and np.any(xa < 0.0):
            raise DomainError("negative base with non-integer exponent", node)
        if k == 2.0:
            return x * x
        return np.power(x, k)
    if op == "log":
        if np.any(np.asarray(x) <= 0.0):
            raise DomainError("log of non-positive value", node)
        return np.log(x)
    if op == "sqrt":
        if np.any(np.asarray(x) < 0.0):
            raise DomainError("sqrt of negative value", node)
        return np.sqrt(x)
    return getattr(np, "arctan" if op == "atan" else op)(x)


def evaluate_many(exprs: Sequence, points) -> list:
    """Evaluate several expressions at the same points, sharing subexpressions.

    ``points`` has shape ``(..., 3)``; each result has shape ``points.shape[:-1]``
    (a python float for a single point).
    """
    exprs = [as_expr(e) for e in exprs]
    u1, u2, u3, shape = _as_coords(points)
    coords = (u1, u2, u3)
    cache: dict[int, object] = {}
    with np.errstate(all="ignore"):
        for node in _postorder(exprs):
            cache[id(node)] = _apply(node, [cache[id(c)] for c in node.args], coords)
    out = []
    for e in exprs:
        v = cache[id(e)]
        if shape == ():
            out.append(float(v))
        else:
            out.append(np.array(np.broadcast_to(v, shape), dtype=float))
    return out


def evaluate(e, point):
    """Value of ``e`` at ``point`` (shape ``(3,)``) or at every row of ``(..., 3)``."""
    return evaluate_many([e], point)[0]


def fd_check(e, point, axis: int, h: float = 1e-4) -> tuple[float, float]:
    """Symbolic partial derivative and its central finite-difference estimate."""
    if h <= 0:
        raise ValueError("h must be positive")
    e = as_expr(e)
    p = np.asarray(point, dtype=float)
    step = np.zeros(3)
    step[axis - 1] = h
    symbolic = evaluate(derive(e, axis), p)
    central = (evaluate(e, p + step) - evaluate(e, p - step)) / (2.0 * h)
    return symbolic, central


# -- printing ---------------------------------------------------------------

_PREC = {_ADD: 1, _SUB: 1, _MUL: 2, _DIV: 2, _NEG: 3, _POW: 4}


def _fmt_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _prec(node: ScalarExpr) -> int:
    if node.op == _NUM:
        return 3 if node.value < 0 else 5
    return _PREC.get(node.op, 5)


def _format(root: ScalarExpr) -> str:
    text: dict[int, str] = {}

    def wrap(child: ScalarExpr, minimum: int) -> str:
        s = text[id(child)]
        return f"({s})" if _prec(child) < minimum else s

    for node in _postorder([root]):
        op = node.op
        if op == _NUM:
            s = _fmt_number(node.value)
        elif op == _VAR:
            s = f"u{node.value}"
        elif op == _PI:
            s = "pi"
        elif op == _NEG:
            s = "-" + wrap(node.args[0], 3)
        elif op in (_ADD, _SUB):
            s = f"{wrap(node.args[0], 1)} {op} {wrap(node.args[1], 2)}"
        elif op in (_MUL, _DIV):
            s = f"{wrap(node.args[0], 2)}{op}{wrap(node.args[1], 3)}"
        elif op == _POW:
            s = f"{wrap(node.args[0], 5)}^{_fmt_number(node.value)}"
        else:
            s = f"{op}({text[id(node.args[0])]})"
        text[id(node)] = s
    return text[id(root)]


# -- parsing ----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^()]))"
)
_ATOM_START = ("number", "'pi'", "'u1'", "'u2'", "'u3'", "function name", "'('", "'-'")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while True:
            while pos < len(text) and text[pos].isspace():
                pos += 1
            if pos >= len(text):
                break
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                raise ParseError(f"unexpected character {text[pos]!r}", self._offset(pos))
            kind = m.lastgroup
            self.tokens.append((kind, m.group(kind), self._offset(m.start(kind))))
            pos = m.end()
        self.tokens.append(("end", "", self._offset(len(text))))
        self.i = 0

    def _offset(self, pos: int) -> int:
        return len(self.text[:pos].encode("utf-8"))

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, expected):
        kind, value, off = self.peek()
        what = "end of input" if kind == "end" else repr(value)
        raise ParseError(f"unexpected {what}", off, expected)

    def parse(self) -> ScalarExpr:
        e = self.expr()
        if self.peek()[0] != "end":
            self.fail(("'+'", "'-'", "'*'", "'/'", "'^'", "end of input"))
        return e

    def expr(self) -> ScalarExpr:
        left = self.term()
        while self.peek()[:2] in (("op", "+"), ("op", "-")):
            sym = self.take()[1]
            right = self.term()
            left = add(left, right) if sym == "+" else sub(left, right)
        return left

    def term(self) -> ScalarExpr:
        left = self.factor()
        while self.peek()[:2] in (("op", "*"), ("op", "/")):
            sym = self.take()[1]
            right = self.factor()
            left = mul(left, right) if sym == "*" else div(left, right)
        return left

    def factor(self) -> ScalarExpr:
        # same language as ``unary ('^' factor)?`` but the minus scopes over the power
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return neg(self.factor())
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return power(base, self.factor())
        return base

    def atom(self) -> ScalarExpr:
        kind, value, off = self.peek()
        if kind == "num":
            self.take()
            return const(float(value))
        if kind == "name":
            self.take()
            if value == "pi":
                return PI
            if value in ("u1", "u2", "u3"):
                return coord(int(value[1]))
            if value in FUNCTIONS:
                if self.peek()[:2] != ("op", "("):
                    self.fail(("'('",))
                self.take()
                arg = self.expr()
                if self.peek()[:2] != ("op", ")"):
                    self.fail(("')'", "'+'", "'-'", "'*'", "'/'", "'^'"))
                self.take()
                return func(value, arg)
            raise UnknownIdentifierError(value, off)
        if (kind, value) == ("op", "("):
            self.take()
            inner = self.expr()
            if self.peek()[:2] != ("op", ")"):
                self.fail(("')'", "'+'", "'-'", "'*'", "'/'", "'^'"))
            self.take()
            return inner
        self.fail(_ATOM_START)


def parse_expr(text: str) -> ScalarExpr:
    """Parse ``text`` into a :class:`ScalarExpr`.

    Raises :class:`ParseError` (with byte ``offset`` and ``expected`` token set)
    or :class:`UnknownIdentifierError`.
    """
    return _Parser(text).parse()


# -- shared-node serialization ----------------------------------------------

def to_dag(exprs: Sequence) -> dict:
    """JSON-ready graph of ``exprs`` with every shared subexpression stored once.

    ``nodes[i]`` is ``[op, value, child indices...]``; children always precede
    their parents, and ``roots`` indexes the requested expressions.
    """
    roots = [as_expr(e) for e in exprs]
    index: dict[int, int] = {}
    nodes = []
    for node in _postorder(roots):
        index[id(node)] = len(nodes)
        nodes.append([node.op, node.value, *(index[id(c)] for c in node.args)])
    return {"nodes": nodes, "roots": [index[id(r)] for r in roots]}


def from_dag(data: dict) -> list[ScalarExpr]:
    """Inverse of :func:`to_dag`."""
    built: list[ScalarExpr] = []
    for op, value, *kids in data["nodes"]:
        args = [built[k] for k in kids]
        if op == _NUM:
            built.append(const(value))
        elif op == _VAR:
            built.append(coord(value))
        elif op == _PI:
            built.append(PI)
        elif op == _NEG:
            built.append(neg(args[0]))
        elif op in (_ADD, _SUB, _MUL, _DIV):
            built.append({_ADD: add, _SUB: sub, _MUL: mul, _DIV: div}[op](*args))
        elif op == _POW:
            built.append(_pow_const(args[0], value))
        elif op in FUNCTIONS:
            built.append(func(op, args[0]))
        else:
            raise ExprError(f"unknown node type {op!r}")
    return [built[r] for r in data["roots"]]

"""Coordinate expressions: parsing, printing and evaluation.

Grammar (whitespace-insensitive)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := ("-" | "+") unary | power
    power   := atom (("^" | "**") unary)?        # right-associative
    atom    := NUMBER | NAME | NAME "(" expr ")" | "(" expr ")"

Names are chart coordinates (``x0``, ``x1``, ... unless other names are
declared), optional aliases, the constant ``pi``, or one of the functions
``sin cos exp sqrt ln`` (``log`` is accepted for ``ln``).  Exponents must be
constant.

Expressions are immutable trees.  Python operators on :class:`Expr` build new
trees, which is how the model catalog assembles its structures.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .jet import Jet

UNARY_FUNCS = ("neg", "sin", "cos", "exp", "sqrt", "ln")
_CALLABLE = {"sin": "sin", "cos": "cos", "exp": "exp", "sqrt": "sqrt", "ln": "ln", "log": "ln"}
_CONSTANTS = {"pi": math.pi}


class ExprError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, source: str, position: int):
        self.source = source
        self.position = position
        pointer = " " * position + "^"
        super().__init__(f"{message} at position {position}\n  {source}\n  {pointer}")


class UnboundIdentifierError(ExprError):
    def __init__(self, name: str, position: int):
        self.name = name
        self.position = position
        super().__init__(f"unbound identifier {name!r} at position {position}")


class ArityError(ExprError):
    def __init__(self, name: str, got: int, position: int):
        self.name = name
        super().__init__(f"function {name!r} takes 1 argument, got {got} (position {position})")


class DomainError(ExprError, ArithmeticError):
    """An expression left its domain (e.g. ``ln`` of a nonpositive number)."""

    def __init__(self, message: str, point=None):
        self.point = None if point is None else tuple(float(v) for v in point)
        where = "" if point is None else f" at point {self.point}"
        super().__init__(message + where)


# ---------------------------------------------------------------------------
# tree nodes
# ---------------------------------------------------------------------------


class Expr:
    """Base node.  Subclasses are frozen dataclasses."""

    __slots__ = ()

    # builder operators -----------------------------------------------------

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

    def __pow__(self, p):
        return power(self, p)

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True, eq=False, repr=False)
class Const(Expr):
    value: float

    def __repr__(self):
        return f"Const({self.value!r})"


@dataclass(frozen=True, eq=False, repr=False)
class Var(Expr):
    index: int

    def __repr__(self):
        return f"Var({self.index})"


@dataclass(frozen=True, eq=False, repr=False)
class Unary(Expr):
    op: str
    arg: Expr

    def __repr__(self):
        return f"Unary({self.op!r}, {self.arg!r})"


@dataclass(frozen=True, eq=False, repr=False)
class Binary(Expr):
    op: str  # add, sub, mul, div, pow
    left: Expr
    right: Expr

    def __repr__(self):
        return f"Binary({self.op!r}, {self.left!r}, {self.right!r})"


ZERO = Const(0.0)
ONE = Const(1.0)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    return Const(float(x))


def _is_const(e: Expr, value: float | None = None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


# Constructors fold only trivial constants (0 and 1 identities, constant
# arithmetic) so catalog trees stay small.  No other rewriting happens.


def add(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Binary("add", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return Binary("sub", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a, -1.0):
        return neg(b)
    if _is_const(b, -1.0):
        return neg(a)
    return Binary("mul", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 0.0):
        raise DomainError("division by the constant 0")
    if _is_const(a) and _is_const(b):
        return Const(a.value / b.value)
    if _is_const(a, 0.0):
        return ZERO
    if _is_const(b, 1.0):
        return a
    return Binary("div", a, b)


def neg(a: Expr) -> Expr:
    if _is_const(a):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def power(a: Expr, p) -> Expr:
    p = as_expr(p)
    if not _is_const(p):
        raise ExprError("exponent must be a constant")
    if p.value == 0.0:
        return ONE
    if p.value == 1.0:
        return a
    if _is_const(a):
        return Const(a.value**p.value)
    return Binary("pow", a, p)


def _unary(op: str):
    fn = {"sin": math.sin, "cos": math.cos, "exp": math.exp, "sqrt": math.sqrt, "ln": math.log}[op]

    def build(a) -> Expr:
        a = as_expr(a)
        if _is_const(a):
            return Const(fn(a.value))
        return Unary(op, a)

    build.__name__ = op
    return build


sin = _unary("sin")
cos = _unary("cos")
exp = _unary("exp")
sqrt = _unary("sqrt")
ln = _unary("ln")


def var(i: int) -> Var:
    return Var(int(i))


def variables(d: int) -> list[Var]:
    return [Var(i) for i in range(d)]


def dot(a: Sequence[Expr], b: Sequence[Expr]) -> Expr:
    total: Expr = ZERO
    for x, y in zip(a, b):
        total = add(total, mul(as_expr(x), as_expr(y)))
    return total


def max_var_index(e: Expr) -> int:
    """Largest variable index used by ``e`` (``-1`` for a constant)."""
    best = -1
    for node in _topo_order([e]):
        if isinstance(node, Var):
            best = max(best, node.index)
    return best


def is_constant(e: Expr) -> bool:
    return max_var_index(e) < 0


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(source: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    n = len(source)
    while pos < n:
        if source[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", source, pos)
        start = m.start(m.lastgroup)
        toks.append(_Tok(m.lastgroup, m.group(m.lastgroup), start))
        pos = m.end()
    toks.append(_Tok("end", "", n))
    return toks


def default_names(d: int, prefix: str = "x") -> list[str]:
    return [f"{prefix}{i}" for i in range(d)]


@dataclass
class _Parser:
    source: str
    names: dict[str, int]
    toks: list[_Tok] = field(init=False)
    i: int = 0

    def __post_init__(self):
        self.toks = _tokenize(self.source)

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        if self.tok.text != text:
            what = "end of input" if self.tok.kind == "end" else repr(self.tok.text)
            raise ExprSyntaxError(f"expected {text!r}, found {what}", self.source, self.tok.pos)
        return self.take()

    def parse(self) -> Expr:
        if self.tok.kind == "end":
            raise ExprSyntaxError("empty expression", self.source, 0)
        e = self.expr()
        if self.tok.kind != "end":
            raise ExprSyntaxError(f"unexpected {self.tok.text!r}", self.source, self.tok.pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.tok.text in ("+", "-"):
            op = self.take().text
            rhs = self.term()
            e = Binary("add" if op == "+" else "sub", e, rhs)
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.tok.text in ("*", "/"):
            op = self.take().text
            rhs = self.unary()
            e = Binary("mul" if op == "*" else "div", e, rhs)
        return e

    def unary(self) -> Expr:
        if self.tok.text == "-":
            self.take()
            return Unary("neg", self.unary())
        if self.tok.text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.tok.text in ("^", "**"):
            pos = self.take().pos
            exponent = self.unary()
            if not is_constant(exponent):
                raise ExprSyntaxError("exponent must be constant", self.source, pos)
            value = evaluate(exponent, np.zeros((1, 0)))[0]
            return Binary("pow", base, Const(float(value)))
        return base

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.take()
            return Const(float(t.text))
        if t.kind == "name":
            self.take()
            if self.tok.text == "(":
                if t.text not in _CALLABLE:
                    if t.text in self.names or t.text in _CONSTANTS:
                        raise ExprSyntaxError(f"{t.text!r} is not a function", self.source, t.pos)
                    raise UnboundIdentifierError(t.text, t.pos)
                self.take()
                args = [self.expr()]
                while self.tok.text == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != 1:
                    raise ArityError(t.text, len(args), t.pos)
                return Unary(_CALLABLE[t.text], args[0])
            if t.text in self.names:
                return Var(self.names[t.text])
            if t.text in _CONSTANTS:
                return Const(_CONSTANTS[t.text])
            if t.text in _CALLABLE:
                raise ArityError(t.text, 0, t.pos)
            raise UnboundIdentifierError(t.text, t.pos)
        if t.text == "(":
            self.take()
            e = self.expr()
            self.expect(")")
            return e
        what = "end of input" if t.kind == "end" else repr(t.text)
        raise ExprSyntaxError(f"unexpected {what}", self.source, t.pos)


def parse(
    source: str,
    d: int | None = None,
    names: Sequence[str] | None = None,
    aliases: Mapping[str, str] | None = None,
) -> Expr:
    """Parse ``source`` into an expression tree.

    Coordinates are bound either by ``names`` (in chart order) or by ``d``,
    which binds ``x0 ... x{d-1}``.  ``aliases`` maps extra names onto bound
    coordinate names, e.g. ``{"theta": "x0"}``.
    """
    if names is None:
        if d is None:
            raise ValueError("either d or names must be given")
        names = default_names(d)
    table = {name: i for i, name in enumerate(names)}
    for alias, target in (aliases or {}).items():
        if target not in table:
            raise UnboundIdentifierError(target, 0)
        table[alias] = table[target]
    return _Parser(str(source), table).parse()


# ---------------------------------------------------------------------------
# printing
# ---------------------------------------------------------------------------

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}
_SYM = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}


def _fmt_const(v: float) -> str:
    if v == math.pi:
        return "pi"
    text = repr(float(v))
    if text in ("inf", "-inf", "nan"):
        raise ExprError(f"cannot print non-finite constant {text}")
    return text


def to_text(e: Expr, names: Sequence[str] | None = None) -> str:
    """Render ``e`` in the input grammar; ``parse(to_text(e))`` evaluates identically."""

    def name_of(i: int) -> str:
        return names[i] if names is not None else f"x{i}"

    def go(node: Expr) -> tuple[str, int]:
        if isinstance(node, Const):
            text = _fmt_const(node.value)
            return (f"({text})" if node.value < 0 else text), 5
        if isinstance(node, Var):
            return name_of(node.index), 5
        if isinstance(node, Unary):
            inner, _ = go(node.arg)
            if node.op == "neg":
                arg, p = go(node.arg)
                return "-" + (arg if p > 3 else f"({arg})"), 3
            return f"{node.op}({inner})", 5
        left, lp = go(node.left)
        right, rp = go(node.right)
        prec = _PREC[node.op]
        if node.op == "pow":
            left = left if lp > prec else f"({left})"
            right = right if rp > prec else f"({right})"
        else:
            left = left if lp >= prec else f"({left})"
            # left-associative: equal precedence on the right needs parentheses
            right = right if rp > prec else f"({right})"
        return f"{left} {_SYM[node.op]} {right}", prec

    return go(e)[0]


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def _topo_order(roots: Sequence[Expr]) -> list[Expr]:
    order: list[Expr] = []
    seen: set[int] = set()
    stack: list[tuple[Expr, bool]] = [(r, False) for r in reversed(roots)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        if isinstance(node, Unary):
            stack.append((node.arg, False))
        elif isinstance(node, Binary):
            stack.append((node.right, False))
            stack.append((node.left, False))
    return order


def _children(node: Expr) -> tuple[Expr, ...]:
    if isinstance(node, Unary):
        return (node.arg,)
    if isinstance(node, Binary):
        return (node.left, node.right)
    return ()


def _first_bad(mask: np.ndarray, points: np.ndarray | None):
    if points is None or points.ndim != 2 or points.shape[0] == 0:
        return None
    idx = int(np.flatnonzero(mask.reshape(-1))[0]) if mask.ndim else 0
    if idx >= points.shape[0]:
        return None
    return points[idx]


def _check(mask, message, points):
    if np.any(mask):
        raise DomainError(message, _first_bad(np.asarray(mask), points))


def _apply_value(node: Expr, args: list, points) -> np.ndarray:
    if isinstance(node, Unary):
        x = args[0]
        op = node.op
        if op == "neg":
            return -x
        if op == "sin":
            return np.sin(x)
        if op == "cos":
            return np.cos(x)
        if op == "exp":
            out = np.exp(x)
            _check(~np.isfinite(out), "exp overflow", points)
            return out
        if op == "sqrt":
            _check(x < 0, "sqrt of a negative number", points)
            return np.sqrt(x)
        if op == "ln":
            _check(x <= 0, "ln of a nonpositive number", points)
            return np.log(x)
        raise ExprError(f"unknown unary op {op}")
    a, b = args
    op = node.op
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        _check(b == 0, "division by zero", points)
        return a / b
    if op == "pow":
        p = node.right.value
        if not float(p).is_integer():
            _check(a <= 0 if p < 0 else a < 0, "non-integer power of a negative number", points)
        elif p < 0:
            _check(a == 0, "negative power of zero", points)
        return a**p
    raise ExprError(f"unknown binary op {op}")


def _apply_jet(node: Expr, args: list, points) -> Jet:
    if isinstance(node, Unary):
        x: Jet = args[0]
        op = node.op
        if op == "neg":
            return -x
        if op == "sin":
            return x.sin()
        if op == "cos":
            return x.cos()
        if op == "exp":
            out = x.exp()
            _check(~np.isfinite(out.val), "exp overflow", points)
            return out
        if op == "sqrt":
            _check(x.val <= 0, "sqrt of a nonpositive number (not differentiable)", points)
            return x.sqrt()
        if op == "ln":
            _check(x.val <= 0, "ln of a nonpositive number", points)
            return x.log()
        raise ExprError(f"unknown unary op {op}")
    a, b = args
    op = node.op
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        _check(b.val == 0, "division by zero", points)
        return a / b
    if op == "pow":
        p = node.right.value
        if float(p).is_integer():
            if p < 0:
                _check(a.val == 0, "negative power of zero", points)
        else:
            _check(a.val <= 0, "non-integer power of a nonpositive number", points)
        return a.power(p)
    raise ExprError(f"unknown binary op {op}")


def _run(roots: Sequence[Expr], leaf, apply, points):
    """Evaluate a DAG of expressions bottom-up, freeing intermediates early."""
    order = _topo_order(roots)
    uses: dict[int, int] = {}
    for node in order:
        for c in _children(node):
            uses[id(c)] = uses.get(id(c), 0) + 1
    for r in roots:
        uses[id(r)] = uses.get(id(r), 0) + 1
    results: dict[int, object] = {}
    for node in order:
        if isinstance(node, (Const, Var)):
            results[id(node)] = leaf(node)
            continue
        kids = _children(node)
        vals = [results[id(c)] for c in kids]
        results[id(node)] = apply(node, vals, points)
        for c in kids:
            uses[id(c)] -= 1
            if uses[id(c)] == 0:
                del results[id(c)]
    return [results[id(r)] for r in roots]


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    return pts


def evaluate_many(exprs: Sequence[Expr], points) -> np.ndarray:
    """Values of several expressions at points of shape (N, d); returns (len(exprs), N)."""
    pts = _as_points(points)
    N = pts.shape[0]

    def leaf(node):
        if isinstance(node, Const):
            return np.full(N, node.value)
        if node.index >= pts.shape[1]:
            raise UnboundIdentifierError(f"x{node.index}", 0)
        return pts[:, node.index]

    out = _run(list(exprs), leaf, _apply_value, pts)
    result = np.array([np.broadcast_to(v, (N,)) for v in out]).reshape(len(exprs), N)
    bad = ~np.isfinite(result)
    if bad.any():
        raise DomainError("non-finite value", pts[np.flatnonzero(bad.any(axis=0))[0]])
    return result


def evaluate(e: Expr, points) -> np.ndarray:
    return evaluate_many([e], points)[0]


def eval_jets_on(exprs: Sequence[Expr], inputs: Sequence[Jet], points=None) -> list[Jet]:
    """Evaluate expressions with variable ``i`` bound to the jet ``inputs[i]``.

    Binding the variables to jets of another map composes the two, so this is
    also the chain rule for expressions of expressions.
    """
    shape = inputs[0].val.shape
    d = inputs[0].dim

    def leaf(node):
        if isinstance(node, Const):
            return Jet.constant(node.value, shape, d)
        if node.index >= len(inputs):
            raise UnboundIdentifierError(f"x{node.index}", 0)
        return inputs[node.index]

    out = _run(list(exprs), leaf, _apply_jet, points)
    for j in out:
        if not np.all(np.isfinite(j.val)):
            raise DomainError("non-finite value", _first_bad(~np.isfinite(j.val), points))
    return out


def eval_jet2_many(exprs: Sequence[Expr], points) -> list[Jet]:
    pts = _as_points(points)
    return eval_jets_on(exprs, Jet.seed(pts), pts)


@dataclass(frozen=True)
class JetValue:
    """Value, gradient and (exactly symmetric) Hessian at one point."""

    value: float
    partials: np.ndarray
    second_partials: np.ndarray


def eval_jet2(e: Expr, point) -> JetValue:
    """Exact first and second partials of ``e`` at a single chart point."""
    pt = np.asarray(point, dtype=float).reshape(1, -1)
    j = eval_jet2_many([e], pt)[0]
    return JetValue(float(j.val[0]), j.grad[0].copy(), j.hess[0].copy())


# ---------------------------------------------------------------------------
# independent finite-difference oracle
# ---------------------------------------------------------------------------

_C1 = {-2: 1.0 / 12.0, -1: -8.0 / 12.0, 1: 8.0 / 12.0, 2: -1.0 / 12.0}
_C2 = {-2: -1.0 / 12.0, -1: 16.0 / 12.0, 0: -30.0 / 12.0, 1: 16.0 / 12.0, 2: -1.0 / 12.0}


def derivative_oracle(e: Expr, point, h: float = 1e-3) -> tuple[np.ndarray, np.ndarray]:
    """Fourth-order central-difference gradient and Hessian of ``e`` at ``point``.

    Only plain evaluation is used, never the jet engine.
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    p = np.asarray(point, dtype=float).reshape(-1)
    d = p.size

    # collect every stencil point, evaluate in one batch
    offsets: list[np.ndarray] = [np.zeros(d)]
    for i in range(d):
        for a in (-2, -1, 1, 2):
            off = np.zeros(d)
            off[i] = a * h
            offsets.append(off)
    for i in range(d):
        for j in range(i + 1, d):
            for a in (-2, -1, 1, 2):
                for b in (-2, -1, 1, 2):
                    off = np.zeros(d)
                    off[i] = a * h
                    off[j] = b * h
                    offsets.append(off)
    vals = evaluate(e, p[None, :] + np.array(offsets))
    f0 = vals[0]
    vals = vals - f0  # stencils annihilate constants exactly
    k = 1
    grad = np.zeros(d)
    hess = np.zeros((d, d))
    for i in range(d):
        fv = dict(zip((-2, -1, 1, 2), vals[k : k + 4]))
        k += 4
        grad[i] = sum(_C1[a] * fv[a] for a in _C1) / h
        fv[0] = 0.0
        hess[i, i] = sum(_C2[a] * fv[a] for a in _C2) / (h * h)
    for i in range(d):
        for j in range(i + 1, d):
            acc = 0.0
            for a in (-2, -1, 1, 2):
                for b in (-2, -1, 1, 2):
                    acc += _C1[a] * _C1[b] * vals[k]
                    k += 1
            hess[i, j] = hess[j, i] = acc / (h * h)
    return grad, hess

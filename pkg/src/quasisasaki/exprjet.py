"""Closed-form scalar expressions and their order-2 jets.

Every field component of a model is an :class:`Expr` over the chart
coordinates.  :func:`eval_jet2` propagates value, gradient and Hessian
together (truncated Taylor arithmetic), so second derivatives of the metric
are exact to floating precision and the Hessian is symmetric by
construction: every Hessian update is either a scalar multiple of a
symmetric matrix or a symmetrised outer product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainViolation, NonFinite, SamplingExhausted

GUARD_EPS = 1e-6

_UNARY = ("sqrt", "sin", "cos", "exp", "pow")
_BINARY = ("add", "sub", "mul", "div")


class Expr:
    """Immutable expression node.

    ``op`` is one of ``var``, ``const``, ``add``, ``sub``, ``mul``, ``div``,
    ``pow`` (integer exponent in ``data``), ``sqrt``, ``sin``, ``cos``,
    ``exp``.  Nodes compare by identity; shared sub-expressions are
    evaluated once per call.
    """

    __slots__ = ("op", "args", "data")

    def __init__(self, op: str, args: tuple = (), data=None):
        self.op = op
        self.args = args
        self.data = data

    # -- arithmetic with light constant folding ------------------------------
    def __add__(self, other):
        other = as_expr(other)
        if _is_zero(other):
            return self
        if _is_zero(self):
            return other
        if self.op == "const" and other.op == "const":
            return Const(self.data + other.data)
        return Expr("add", (self, other))

    __radd__ = __add__

    def __sub__(self, other):
        other = as_expr(other)
        if _is_zero(other):
            return self
        if self.op == "const" and other.op == "const":
            return Const(self.data - other.data)
        return Expr("sub", (self, other))

    def __rsub__(self, other):
        return as_expr(other).__sub__(self)

    def __mul__(self, other):
        other = as_expr(other)
        if _is_zero(self) or _is_zero(other):
            return ZERO
        if _is_one(other):
            return self
        if _is_one(self):
            return other
        if self.op == "const" and other.op == "const":
            return Const(self.data * other.data)
        return Expr("mul", (self, other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_expr(other)
        if _is_one(other):
            return self
        if _is_zero(self):
            return ZERO
        if self.op == "const" and other.op == "const" and other.data != 0:
            return Const(_const_div(self.data, other.data))
        return Expr("div", (self, other))

    def __rtruediv__(self, other):
        return as_expr(other).__truediv__(self)

    def __neg__(self):
        if self.op == "const":
            return Const(-self.data)
        return Expr("sub", (ZERO, self))

    def __pos__(self):
        return self

    def __pow__(self, n):
        if not isinstance(n, int):
            raise TypeError("only integer powers are supported")
        if n == 1:
            return self
        if n == 0:
            return ONE
        if self.op == "const" and (self.data != 0 or n > 0):
            return Const(_const_pow(self.data, n))
        return Expr("pow", (self,), n)

    def __repr__(self):
        if self.op == "var":
            return f"x{self.data}"
        if self.op == "const":
            return str(self.data)
        if self.op == "pow":
            return f"({self.args[0]!r})**{self.data}"
        sym = {"add": "+", "sub": "-", "mul": "*", "div": "/"}.get(self.op)
        if sym:
            return f"({self.args[0]!r} {sym} {self.args[1]!r})"
        return f"{self.op}({self.args[0]!r})"

    def max_var(self) -> int:
        """Largest variable index occurring in the expression (-1 if none)."""
        best = -1
        for node in _postorder([self]):
            if node.op == "var":
                best = max(best, node.data)
        return best


def Var(i: int) -> Expr:
    if i < 0:
        raise ValueError("variable index must be non-negative")
    return Expr("var", (), int(i))


def Const(c) -> Expr:
    if isinstance(c, Expr):
        return c
    if isinstance(c, (int, Fraction)):
        return Expr("const", (), Fraction(c))
    if isinstance(c, Real):
        c = float(c)
        if not math.isfinite(c):
            raise NonFinite(f"constant {c!r} is not finite")
        return Expr("const", (), c)
    raise TypeError(f"cannot make a constant from {type(c).__name__}")


def as_expr(x) -> Expr:
    return x if isinstance(x, Expr) else Const(x)


def sqrt(e) -> Expr:
    e = as_expr(e)
    return Expr("sqrt", (e,))


def sin(e) -> Expr:
    return Expr("sin", (as_expr(e),))


def cos(e) -> Expr:
    return Expr("cos", (as_expr(e),))


def exp(e) -> Expr:
    return Expr("exp", (as_expr(e),))


def _const_div(a, b):
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a / b
    return float(a) / float(b)


def _const_pow(a, n):
    if isinstance(a, Fraction):
        return a**n
    return float(a) ** n


def _is_zero(e: Expr) -> bool:
    return e.op == "const" and e.data == 0


def _is_one(e: Expr) -> bool:
    return e.op == "const" and e.data == 1


ZERO = Expr("const", (), Fraction(0))
ONE = Expr("const", (), Fraction(1))


def _postorder(roots: Iterable[Expr]) -> list[Expr]:
    """Nodes reachable from ``roots``, children before parents, each once."""
    seen: set[int] = set()
    order: list[Expr] = []
    stack: list[tuple[Expr, bool]] = [(r, False) for r in reversed(list(roots))]
    while stack:
        node, expanded = stack.pop()
        if id(node) in seen:
            continue
        if expanded:
            seen.add(id(node))
            order.append(node)
            continue
        stack.append((node, True))
        for child in reversed(node.args):
            if id(child) not in seen:
                stack.append((child, False))
    return order


# -- chart domains -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ChartDomain:
    """Open box with a guard expression; a point is admissible iff guard > 0."""

    dimension: int
    lower: tuple
    upper: tuple
    guard: Expr = ONE

    def __post_init__(self):
        if len(self.lower) != self.dimension or len(self.upper) != self.dimension:
            raise ValueError("box bounds must match the dimension")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("box must be nonempty")

    @classmethod
    def box(cls, dimension: int, half_width: float = 1.0, guard: Expr = ONE):
        return cls(dimension, (-half_width,) * dimension, (half_width,) * dimension, guard)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lower, float) + np.asarray(self.upper, float))

    def guard_value(self, p) -> float:
        return float(eval_value(self.guard, np.asarray(p, float)))

    def contains(self, p, margin: float = 0.0) -> bool:
        p = np.asarray(p, float)
        if p.shape != (self.dimension,):
            return False
        if np.any(p <= self.lower) or np.any(p >= self.upper):
            return False
        return self.guard_value(p) > margin

    def check(self, p) -> None:
        if not self.contains(p):
            raise DomainViolation(f"point {np.asarray(p).tolist()} outside chart domain")


def sample_points(dom: ChartDomain, k: int, seed: int, max_draws: int | None = None) -> list:
    """``k`` seeded points uniform in the box, rejection-filtered by the guard.

    The guard must exceed ``GUARD_EPS`` so jets stay away from chart
    boundary singularities.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    rng = np.random.default_rng(seed)
    lo = np.asarray(dom.lower, float)
    hi = np.asarray(dom.upper, float)
    budget = max_draws if max_draws is not None else 200 * k + 1000
    out: list = []
    drawn = 0
    while len(out) < k:
        batch = min(max(4 * k, 16), budget - drawn)
        if batch <= 0:
            raise SamplingExhausted(
                f"accepted {len(out)} of {k} points after {drawn} draws"
            )
        cand = lo + (hi - lo) * rng.random((batch, dom.dimension))
        drawn += batch
        guards = eval_value(dom.guard, cand.T)
        guards = np.broadcast_to(np.asarray(guards, float), (batch,))
        for x, gv in zip(cand, guards):
            if gv > GUARD_EPS and np.all(x > lo) and np.all(x < hi):
                out.append(x)
                if len(out) == k:
                    break
    return out


# -- jets ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Jet2:
    """Value, gradient and Hessian of a scalar at a point."""

    value: float
    grad: np.ndarray
    hess: np.ndarray

    def __add__(self, other: "Jet2") -> "Jet2":
        return Jet2(self.value + other.value, self.grad + other.grad, self.hess + other.hess)

    def __sub__(self, other: "Jet2") -> "Jet2":
        return Jet2(self.value - other.value, self.grad - other.grad, self.hess - other.hess)

    def scale(self, a: float) -> "Jet2":
        return Jet2(a * self.value, a * self.grad, a * self.hess)


def _check_finite(v, node):
    if not math.isfinite(v):
        raise NonFinite(f"non-finite value in {node.op} node")


def _unary(fv, d1, d2, g, h):
    """Chain rule for f(u): value fv, f'(u)=d1, f''(u)=d2."""
    if g is None:
        return fv, None, None
    ng = d1 * g
    nh = np.multiply.outer(g, g) * d2
    if h is not None:
        nh = d1 * h + nh
    return fv, ng, nh


def _mul(a, b):
    va, ga, ha = a
    vb, gb, hb = b
    v = va * vb
    if ga is None and gb is None:
        return v, None, None
    if ga is None:
        return v, va * gb, (va * hb if hb is not None else None)
    if gb is None:
        return v, vb * ga, (vb * ha if ha is not None else None)
    g = va * gb + vb * ga
    cross = np.multiply.outer(ga, gb)
    h = cross + cross.T
    if ha is not None:
        h = h + vb * ha
    if hb is not None:
        h = h + va * hb
    return v, g, h


def _addsub(a, b, sign):
    va, ga, ha = a
    vb, gb, hb = b
    v = va + vb if sign > 0 else va - vb
    if gb is None:
        g = ga
    elif ga is None:
        g = gb if sign > 0 else -gb
    else:
        g = ga + gb if sign > 0 else ga - gb
    if hb is None:
        h = ha
    elif ha is None:
        h = hb if sign > 0 else -hb
    else:
        h = ha + hb if sign > 0 else ha - hb
    return v, g, h


def _eval_tuples(roots: Sequence[Expr], p: np.ndarray, memo: dict | None = None) -> dict:
    """Evaluate all nodes under ``roots``; returns id(node) -> (v, g|None, h|None).

    ``None`` derivative slots stand for exact zeros.
    """
    dim = p.shape[0]
    if memo is None:
        memo = {}
    for node in _postorder(roots):
        key = id(node)
        if key in memo:
            continue
        op = node.op
        if op == "const":
            res = (float(node.data), None, None)
        elif op == "var":
            if node.data >= dim:
                raise IndexError(f"variable x{node.data} outside chart dimension {dim}")
            g = np.zeros(dim)
            g[node.data] = 1.0
            res = (float(p[node.data]), g, None)
        elif op in ("add", "sub"):
            res = _addsub(memo[id(node.args[0])], memo[id(node.args[1])], 1 if op == "add" else -1)
        elif op == "mul":
            res = _mul(memo[id(node.args[0])], memo[id(node.args[1])])
        elif op == "div":
            vb, gb, hb = memo[id(node.args[1])]
            if vb == 0.0:
                raise NonFinite("division by zero")
            inv = _unary(1.0 / vb, -1.0 / vb**2, 2.0 / vb**3, gb, hb)
            res = _mul(memo[id(node.args[0])], inv)
        else:
            v, g, h = memo[id(node.args[0])]
            if op == "sqrt":
                if v <= 0.0:
                    raise DomainViolation(f"sqrt of non-positive radicand {v!r}")
                s = math.sqrt(v)
                res = _unary(s, 0.5 / s, -0.25 / (s * v), g, h)
            elif op == "sin":
                s, c = math.sin(v), math.cos(v)
                res = _unary(s, c, -s, g, h)
            elif op == "cos":
                s, c = math.sin(v), math.cos(v)
                res = _unary(c, -s, -c, g, h)
            elif op == "exp":
                try:
                    ev = math.exp(v)
                except OverflowError as err:
                    raise NonFinite("exp overflow") from err
                res = _unary(ev, ev, ev, g, h)
            elif op == "pow":
                n = node.data
                if v == 0.0 and n < 0:
                    raise NonFinite("negative power of zero")
                d1 = n * v ** (n - 1) if n != 0 else 0.0
                d2 = n * (n - 1) * v ** (n - 2) if n not in (0, 1) else 0.0
                res = _unary(v**n, d1, d2, g, h)
            else:  # pragma: no cover - construction prevents this
                raise ValueError(f"unknown op {op}")
        _check_finite(res[0], node)
        if res[1] is not None and not np.all(np.isfinite(res[1])):
            raise NonFinite(f"non-finite gradient in {op} node")
        memo[key] = res
    return memo


def _to_jet(t, dim) -> Jet2:
    v, g, h = t
    return Jet2(
        v,
        np.zeros(dim) if g is None else np.array(g, dtype=float),
        np.zeros((dim, dim)) if h is None else np.array(h, dtype=float),
    )


def eval_jet2(e: Expr, p, domain: ChartDomain | None = None) -> Jet2:
    """Exact value, gradient and Hessian of ``e`` at ``p``."""
    p = np.asarray(p, dtype=float)
    if domain is not None:
        domain.check(p)
    memo = _eval_tuples([e], p)
    return _to_jet(memo[id(e)], p.shape[0])


def eval_jets(exprs: Iterable[Expr], p, domain: ChartDomain | None = None) -> list[Jet2]:
    """Jets of several expressions, sharing common sub-expressions."""
    exprs = list(exprs)
    p = np.asarray(p, dtype=float)
    if domain is not None:
        domain.check(p)
    memo = _eval_tuples(exprs, p)
    return [_to_jet(memo[id(e)], p.shape[0]) for e in exprs]


def jet_arrays(exprs, p, memo: dict | None = None):
    """Jets of an array of expressions as (value, grad, hess) arrays.

    ``exprs`` is any nested sequence/object array of Expr with shape S; the
    result has shapes S, S+(d,), S+(d, d).
    """
    arr = np.asarray(exprs, dtype=object)
    p = np.asarray(p, dtype=float)
    dim = p.shape[0]
    flat = [as_expr(e) for e in arr.ravel()]
    memo = _eval_tuples(flat, p, memo)
    n = len(flat)
    val = np.empty(n)
    grad = np.zeros((n, dim))
    hess = np.zeros((n, dim, dim))
    for i, e in enumerate(flat):
        v, g, h = memo[id(e)]
        val[i] = v
        if g is not None:
            grad[i] = g
        if h is not None:
            hess[i] = h
    s = arr.shape
    return val.reshape(s), grad.reshape(s + (dim,)), hess.reshape(s + (dim, dim))


_NP_FUNCS = {"sqrt": np.sqrt, "sin": np.sin, "cos": np.cos, "exp": np.exp}


def eval_value(e: Expr, p, dtype=float):
    """Value-only evaluation; ``p`` may carry trailing batch axes (dim, ...).

    Independent of the jet path; used for guards and finite-difference
    oracles (``dtype=np.longdouble`` gives extended precision).
    """
    p = np.asarray(p, dtype=dtype)
    memo: dict[int, object] = {}
    for node in _postorder([e]):
        op = node.op
        if op == "const":
            d = node.data
            val = (dtype(d.numerator) / dtype(d.denominator)) if isinstance(d, Fraction) else dtype(d)
        elif op == "var":
            val = p[node.data]
        elif op == "add":
            val = memo[id(node.args[0])] + memo[id(node.args[1])]
        elif op == "sub":
            val = memo[id(node.args[0])] - memo[id(node.args[1])]
        elif op == "mul":
            val = memo[id(node.args[0])] * memo[id(node.args[1])]
        elif op == "div":
            val = memo[id(node.args[0])] / memo[id(node.args[1])]
        elif op == "pow":
            val = memo[id(node.args[0])] ** node.data
        else:
            val = _NP_FUNCS[op](memo[id(node.args[0])])
        memo[id(node)] = val
    return memo[id(e)]


# -- random expressions (test and benchmark support) -------------------------


def random_expr(rng: np.random.Generator, depth: int, dim: int) -> Expr:
    """A random expression of depth <= ``depth`` that is smooth on [-1, 1]^dim.

    Denominators and radicands are kept bounded away from zero and
    exponentials are fed bounded arguments.
    """
    if depth <= 1 or rng.random() < 0.15:
        if rng.random() < 0.7:
            return Var(int(rng.integers(dim)))
        return Const(float(np.round(rng.uniform(-2.0, 2.0), 3)))
    kind = rng.choice(["add", "sub", "mul", "div", "pow", "sqrt", "sin", "cos", "exp", "scale"])
    a = random_expr(rng, depth - 1, dim)
    if kind in ("add", "sub", "mul"):
        b = random_expr(rng, depth - 1, dim)
        return {"add": a + b, "sub": a - b, "mul": a * b}[kind]
    if kind == "div":
        b = random_expr(rng, depth - 1, dim)
        return a / (Const(Fraction(3, 2)) + sin(b) ** 2)
    if kind == "pow":
        return sin(a) ** int(rng.integers(2, 4))
    if kind == "sqrt":
        return sqrt(ONE + a * a)
    if kind == "exp":
        return exp(sin(a))
    if kind == "scale":
        return Const(Fraction(int(rng.integers(1, 5)), int(rng.integers(1, 5)))) * a
    return sin(a) if kind == "sin" else cos(a)


# -- serialisation -------------------------------------------------------------


def dump_table(roots: Sequence[Expr]) -> tuple[list, list[int]]:
    """Flatten expressions into a node table (children first) plus root ids."""
    order = _postorder(roots)
    index = {id(n): i for i, n in enumerate(order)}
    table = []
    for n in order:
        if n.op == "const":
            d = n.data
            data = [d.numerator, d.denominator] if isinstance(d, Fraction) else float(d)
            table.append(["const", data])
        elif n.op == "var":
            table.append(["var", n.data])
        elif n.op == "pow":
            table.append(["pow", index[id(n.args[0])], n.data])
        else:
            table.append([n.op] + [index[id(c)] for c in n.args])
    return table, [index[id(r)] for r in roots]


def load_table(table: list, roots: list[int]) -> list[Expr]:
    nodes: list[Expr] = []
    for row in table:
        op = row[0]
        if op == "const":
            d = row[1]
            nodes.append(Const(Fraction(d[0], d[1]) if isinstance(d, list) else float(d)))
        elif op == "var":
            nodes.append(Var(row[1]))
        elif op == "pow":
            nodes.append(Expr("pow", (nodes[row[1]],), int(row[2])))
        elif op in _BINARY:
            nodes.append(Expr(op, (nodes[row[1]], nodes[row[2]])))
        elif op in _UNARY:
            nodes.append(Expr(op, (nodes[row[1]],)))
        else:
            raise ValueError(f"unknown node kind {op!r}")
    return [nodes[r] for r in roots]

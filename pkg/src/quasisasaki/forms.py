"""Pointwise exterior algebra on sorted multi-indices.

Conventions: a p-form is stored by its components on strictly increasing
index tuples; the wedge product is the alternation of the tensor product,

    (a ^ b) = Alt(a (x) b),   Alt T = (1/k!) sum_sigma sgn(sigma) T o sigma,

which pairs with d(omega)(X0..Xp) = 1/(p+1) * (alternating sum).  With these
conventions d(eta)(X, Y) = (1/2)(X eta(Y) - Y eta(X) - eta([X, Y])).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(eq=False)
class Form:
    degree: int
    dim: int
    comps: dict = field(default_factory=dict)

    @classmethod
    def scalar(cls, dim: int, value: float = 1.0) -> "Form":
        return cls(0, dim, {(): float(value)})

    @classmethod
    def from_dense(cls, arr, atol: float = 0.0) -> "Form":
        """Read components ``arr[I]`` for increasing ``I`` (``arr`` assumed alternating)."""
        arr = np.asarray(arr, dtype=float)
        deg = arr.ndim
        dim = arr.shape[0] if deg else 0
        comps = {}
        for idx in itertools.combinations(range(dim), deg):
            v = float(arr[idx])
            if abs(v) > atol:
                comps[idx] = v
        return cls(deg, dim, comps)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.dim,) * self.degree)
        for idx, v in self.comps.items():
            for perm in itertools.permutations(range(self.degree)):
                out[tuple(idx[k] for k in perm)] = _perm_sign(perm) * v
        return out

    def max_abs(self) -> float:
        return max((abs(v) for v in self.comps.values()), default=0.0)

    def __xor__(self, other: "Form") -> "Form":
        return wedge(self, other)


def _perm_sign(perm) -> int:
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


def _merge_sign(a: tuple, b: tuple) -> int:
    """Sign of the permutation sorting the concatenation ``a + b``."""
    inversions = 0
    for x in a:
        for y in b:
            if x > y:
                inversions += 1
    return -1 if inversions % 2 else 1


def wedge(a: Form, b: Form) -> Form:
    if a.dim != b.dim:
        raise ValueError("forms live on spaces of different dimension")
    p, q = a.degree, b.degree
    if p + q > a.dim:
        return Form(p + q, a.dim, {})
    coef = math.factorial(p) * math.factorial(q) / math.factorial(p + q)
    out: dict = {}
    for I, va in a.comps.items():
        sI = set(I)
        for J, vb in b.comps.items():
            if sI.intersection(J):
                continue
            K = tuple(sorted(I + J))
            out[K] = out.get(K, 0.0) + coef * _merge_sign(I, J) * va * vb
    return Form(p + q, a.dim, out)


def wedge_power(form: Form, k: int) -> Form:
    if k < 0:
        raise ValueError("power must be non-negative")
    out = Form.scalar(form.dim)
    for _ in range(k):
        out = wedge(out, form)
    return out


def alternation(tensor: np.ndarray) -> np.ndarray:
    """Brute-force Alt over all slot permutations (reference implementation)."""
    k = tensor.ndim
    out = np.zeros_like(tensor, dtype=float)
    for perm in itertools.permutations(range(k)):
        out += _perm_sign(perm) * np.transpose(tensor, perm)
    return out / math.factorial(k)


def evaluate_on_frame(form: Form, frame: np.ndarray) -> float:
    """omega(E_1, ..., E_p) for the columns of ``frame`` (shape dim x p)."""
    frame = np.asarray(frame, float)
    if frame.shape[1] != form.degree:
        raise ValueError("frame must have one column per form slot")
    total = 0.0
    for I, v in form.comps.items():
        total += v * np.linalg.det(frame[list(I), :]) if I else v
    return total

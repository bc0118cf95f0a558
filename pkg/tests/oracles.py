"""Reference computations that share no code path with the jet engine."""

from __future__ import annotations

import itertools
import math

import numpy as np

from quasisasaki.exprjet import eval_value


def fd_stencil(p, h):
    """Stencil points for central gradient and Hessian differences, shape (d, 2d + 4d^2)."""
    p = np.asarray(p, dtype=np.longdouble)
    d = p.shape[0]
    eye = np.eye(d, dtype=np.longdouble) * np.longdouble(h)
    pts = [p + eye[i] for i in range(d)] + [p - eye[i] for i in range(d)]
    for i, j in itertools.product(range(d), repeat=2):
        for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            pts.append(p + si * eye[i] + sj * eye[j])
    return np.stack(pts, axis=1)


def fd_from_values(vals, d, h):
    h = np.longdouble(h)
    plus, minus = vals[:d], vals[d : 2 * d]
    grad = (plus - minus) / (2 * h)
    mixed = vals[2 * d :].reshape(d, d, 4)
    hess = (mixed[..., 0] - mixed[..., 1] - mixed[..., 2] + mixed[..., 3]) / (4 * h * h)
    return grad.astype(float), hess.astype(float)


def fd_jet(e, p, h=1e-5):
    """Gradient and Hessian by central differences in extended precision."""
    d = len(p)
    vals = np.broadcast_to(eval_value(e, fd_stencil(p, h), dtype=np.longdouble), (2 * d + 4 * d * d,))
    return fd_from_values(vals, d, h)


def fd_jets_batch(e, points, h=1e-5):
    """fd_jet at many points with a single vectorised evaluation."""
    d = len(points[0])
    stencils = [fd_stencil(p, h) for p in points]
    n = stencils[0].shape[1]
    vals = np.broadcast_to(eval_value(e, np.concatenate(stencils, axis=1), dtype=np.longdouble),
                           (n * len(points),))
    return [fd_from_values(vals[k * n : (k + 1) * n], d, h) for k in range(len(points))]


def metric_values(M, p):
    return np.array([[float(eval_value(M.metric[i, j], np.asarray(p, float))) for j in range(M.dim)]
                     for i in range(M.dim)])


def koszul_christoffel(M, p, h=1e-5):
    """Christoffel symbols from central differences of metric values."""
    p = np.asarray(p, float)
    d = M.dim
    dg = np.zeros((d, d, d))
    for m in range(d):
        e = np.zeros(d)
        e[m] = h
        dg[:, :, m] = (metric_values(M, p + e) - metric_values(M, p - e)) / (2 * h)
    ginv = np.linalg.inv(metric_values(M, p))
    out = np.zeros((d, d, d))
    for k, i, j in itertools.product(range(d), repeat=3):
        out[k, i, j] = 0.5 * sum(ginv[k, l] * (dg[j, l, i] + dg[i, l, j] - dg[i, j, l]) for l in range(d))
    return out


def perm_sign(perm) -> int:
    inv = sum(1 for a, b in itertools.combinations(perm, 2) if a > b)
    return -1 if inv % 2 else 1


def brute_wedge(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Alt(a (x) b) by summing over all permutations of the slots."""
    t = np.multiply.outer(a, b)
    k = t.ndim
    out = np.zeros_like(t)
    for perm in itertools.permutations(range(k)):
        out += perm_sign(perm) * np.transpose(t, perm)
    return out / math.factorial(k)


def random_two_form(rng, d):
    a = rng.normal(size=(d, d))
    return a - a.T

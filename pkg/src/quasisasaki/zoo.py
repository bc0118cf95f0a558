"""Concrete chart models: flat 3-cosymplectic space, spheres, products, deformations, cones."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import forms
from .contact import (
    StructureTag, check_almost_contact_metric, check_quasi_sasakian, check_three_structure, classify,
)
from .errors import ClassificationContradiction, StructureViolation, UnknownModel
from .exprjet import (
    ONE,
    ZERO,
    ChartDomain,
    Const,
    Var,
    dump_table,
    load_table,
    sample_points,
    sqrt,
)
from .geometry import CYCLIC, ManifoldModel, local
from .report import check

SELF_CHECK_POINTS = 16
SELF_CHECK_TOL = 1e-8
SPHERE_BOX = 0.35  # chart half-width as a fraction of the radius


# -- quaternions -----------------------------------------------------------------


def _left_mult(q: int) -> np.ndarray:
    """Matrix of left multiplication by i, j or k (q = 1, 2, 3) on basis (1, i, j, k)."""
    # quaternion product table on basis indices: unit[a] * unit[b] = sign * unit[c]
    table = {
        (0, 0): (1, 0), (0, 1): (1, 1), (0, 2): (1, 2), (0, 3): (1, 3),
        (1, 0): (1, 1), (1, 1): (-1, 0), (1, 2): (1, 3), (1, 3): (-1, 2),
        (2, 0): (1, 2), (2, 1): (-1, 3), (2, 2): (-1, 0), (2, 3): (1, 1),
        (3, 0): (1, 3), (3, 1): (1, 2), (3, 2): (-1, 1), (3, 3): (-1, 0),
    }
    m = np.zeros((4, 4), dtype=int)
    for b in range(4):
        s, c = table[(q, b)]
        m[c, b] = s
    return m


@dataclass(frozen=True)
class QuaternionConvention:
    """Left multiplication by i, j, k on R^4 = H with basis (1, i, j, k)."""

    J: tuple = field(default_factory=lambda: tuple(_left_mult(q) for q in (1, 2, 3)))

    def verify(self) -> None:
        I4 = np.eye(4, dtype=int)
        for a, b, c in CYCLIC:
            Ja, Jb, Jc = self.J[a], self.J[b], self.J[c]
            if not (np.array_equal(Ja @ Ja, -I4) and np.array_equal(Ja.T, -Ja)):
                raise StructureViolation(f"J{a + 1} is not an orthogonal complex structure")
            if not (np.array_equal(Ja @ Jb, Jc) and np.array_equal(Jb @ Ja, -Jc)):
                raise StructureViolation(f"J{a + 1} J{b + 1} != J{c + 1}")

    def block(self, a: int, copies: int) -> np.ndarray:
        """J_{a+1} repeated on ``copies`` quaternionic blocks."""
        return np.kron(np.eye(copies, dtype=int), self.J[a])


QUATERNIONS = QuaternionConvention()
QUATERNIONS.verify()


def _vertical_phi(a: int) -> np.ndarray:
    """Action of phi_{a+1} on span(xi_1, xi_2, xi_3): v -> e_a x v."""
    m = np.zeros((3, 3), dtype=int)
    for b in range(3):
        e_a, e_b = np.eye(3, dtype=int)[a], np.eye(3, dtype=int)[b]
        m[:, b] = np.cross(e_a, e_b)
    return m


def _as_number(x):
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    return float(x)


def _const_matrix(m) -> np.ndarray:
    m = np.asarray(m)
    out = np.empty(m.shape, dtype=object)
    for idx in np.ndindex(m.shape):
        out[idx] = Const(int(m[idx])) if float(m[idx]).is_integer() else Const(float(m[idx]))
    return out


def _zeros(shape) -> np.ndarray:
    out = np.empty(shape, dtype=object)
    out.fill(ZERO)
    return out


def _block_diag(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n, m = a.shape[0], b.shape[0]
    out = _zeros((n + m, n + m))
    out[:n, :n] = a
    out[n:, n:] = b
    return out


# -- verification ----------------------------------------------------------------


def self_verify(M: ManifoldModel, points: int = SELF_CHECK_POINTS, seed: int = 0,
                tol: float = SELF_CHECK_TOL, quasi_sasakian: bool = True) -> None:
    """Raise StructureViolation unless the structure identities hold at seeded points."""
    for p in sample_points(M.dom, points, seed):
        recs = [check_three_structure(M, p, tol)]
        for idx in (1, 2, 3):
            recs.append(check_almost_contact_metric(M, p, idx, tol))
            if quasi_sasakian:
                recs.append(check_quasi_sasakian(M, p, idx, tol))
        for rec in recs:
            if not rec.passed:
                worst = max(rec.residuals, key=rec.residuals.get)
                raise StructureViolation(
                    f"{M.name}: {rec.check}.{worst} = {rec.residuals[worst]:.3e} at {np.round(p, 6).tolist()}"
                )


# -- constructors ----------------------------------------------------------------


def flat_hyperkahler(m: int):
    """(metric, J_1..J_3) of flat R^{4m} as constant Expr matrices."""
    if m < 1:
        raise ValueError("m must be at least 1")
    metric = _const_matrix(np.eye(4 * m, dtype=int))
    Js = [_const_matrix(QUATERNIONS.block(a, m)) for a in range(3)]
    return metric, Js


def flat_three_cosymplectic(n: int = 1, verify: bool = True) -> ManifoldModel:
    """R^{4n} x R^3 with constant structure; xi_a = d/dz_a."""
    if n < 0:
        raise ValueError("n must be non-negative")
    d = 4 * n + 3
    phi = []
    for a in range(3):
        m = np.zeros((d, d), dtype=int)
        if n:
            m[: 4 * n, : 4 * n] = QUATERNIONS.block(a, n)
        m[4 * n :, 4 * n :] = _vertical_phi(a)
        phi.append(_const_matrix(m))
    xi = _const_matrix(np.eye(d, dtype=int)[4 * n :])
    model = ManifoldModel(
        name=f"flat(n={n})",
        dom=ChartDomain.box(d, 1.0),
        metric=_const_matrix(np.eye(d, dtype=int)),
        phi=np.stack(phi),
        xi=xi,
        eta=xi.copy(),
        declared_c=0.0,
        params={"family": "flat", "n": n},
        block_fields={"E4l": [], "E4m": [_const_matrix(np.eye(d, dtype=int)[i]) for i in range(4 * n)]},
    )
    if verify:
        self_verify(model)
    return model


def _signed_perm_apply(J: np.ndarray, col: list) -> list:
    """J @ col for an integer signed-permutation matrix J and a list of Expr."""
    out = []
    for row in J:
        (nz,) = np.nonzero(row)
        e = ZERO
        for k in nz:
            e = e + col[k] if row[k] > 0 else e - col[k]
        out.append(e)
    return out


def _sphere_fields(n: int, r):
    """Structure Expr arrays of the graph chart of S^{4n+3}(r) in H^{n+1}."""
    d = 4 * n + 3
    N = d + 1
    rr = Const(_as_number(r))
    x = [Var(i) for i in range(d)]
    sq = ZERO
    for xi_ in x:
        sq = sq + xi_ * xi_
    guard = rr * rr - sq
    w = sqrt(guard)
    P = x + [w]
    nu = [c / rr for c in P]
    # ambient lift of the chart basis: d_j -> e_j - (x_j / w) e_N
    lift = [[(ONE if i == j else ZERO) for j in range(d)] for i in range(d)]
    lift.append([-x[j] / w for j in range(d)])
    metric = _zeros((d, d))
    for i in range(d):
        for j in range(d):
            metric[i, j] = (ONE if i == j else ZERO) + x[i] * x[j] / (w * w)
    phi, xi, eta = [], [], []
    for a in range(3):
        J = QUATERNIONS.block(a, n + 1)
        JP = _signed_perm_apply(J, P)
        xi.append([-JP[i] / rr for i in range(d)])
        JL = [_signed_perm_apply(J, [lift[b][j] for b in range(N)]) for j in range(d)]  # JL[j][b]
        eta_a = []
        for j in range(d):
            e = ZERO
            for b in range(N):
                e = e + nu[b] * JL[j][b]
            eta_a.append(e)
        eta.append(eta_a)
        ph = _zeros((d, d))
        for i in range(d):
            for j in range(d):
                ph[i, j] = JL[j][i] - nu[i] * eta_a[j]
        phi.append(ph)
    return guard, metric, np.stack(phi), np.array(xi, dtype=object), np.array(eta, dtype=object)


def _horizontal_fields(xi: np.ndarray, eta: np.ndarray, coords, d: int) -> list:
    """Horizontal projections d_i - sum_b eta_b(d_i) xi_b of coordinate fields."""
    out = []
    for i in coords:
        v = np.empty(d, dtype=object)
        for k in range(d):
            e = ONE if k == i else ZERO
            for b in range(3):
                e = e - eta[b][i] * xi[b][k]
            v[k] = e
        out.append(v)
    return out


def sphere_three_alpha(n: int = 1, r=1, verify: bool = True) -> ManifoldModel:
    """Graph chart of the round sphere S^{4n+3}(r) with its 3-(1/r)-Sasakian structure."""
    if n < 0 or float(r) <= 0:
        raise ValueError("need n >= 0 and r > 0")
    d = 4 * n + 3
    guard, metric, phi, xi, eta = _sphere_fields(n, r)
    half = SPHERE_BOX * float(r)
    model = ManifoldModel(
        name=f"sphere(n={n}, r={r})",
        dom=ChartDomain.box(d, half, guard),
        metric=metric,
        phi=phi,
        xi=xi,
        eta=eta,
        declared_c=2.0 / float(r),
        params={"family": "sphere", "n": n, "r": float(r)},
        block_fields={"E4l": _horizontal_fields(xi, eta, range(d), d) if n else [], "E4m": []},
    )
    if verify:
        self_verify(model)
    return model


def product_three_qs(l: int = 0, m: int = 1, r=1, verify: bool = True) -> ManifoldModel:
    """S^{4l+3}(r) x R^{4m} with the sphere structure on the first factor."""
    if l < 0 or m < 0 or float(r) <= 0:
        raise ValueError("need l, m >= 0 and r > 0")
    ds = 4 * l + 3
    d = ds + 4 * m
    guard, s_metric, s_phi, s_xi, s_eta = _sphere_fields(l, r)
    if m:
        f_metric, f_J = flat_hyperkahler(m)
        metric = _block_diag(s_metric, f_metric)
        phi = np.stack([_block_diag(s_phi[a], f_J[a]) for a in range(3)])
    else:
        metric, phi = s_metric, s_phi
    xi = _zeros((3, d))
    eta = _zeros((3, d))
    xi[:, :ds] = s_xi
    eta[:, :ds] = s_eta
    lower = (-SPHERE_BOX * float(r),) * ds + (-1.0,) * (4 * m)
    upper = (SPHERE_BOX * float(r),) * ds + (1.0,) * (4 * m)
    e4m = [_const_matrix(np.eye(d, dtype=int)[ds + i]) for i in range(4 * m)]
    model = ManifoldModel(
        name=f"product(l={l}, m={m}, r={r})",
        dom=ChartDomain(d, lower, upper, guard),
        metric=metric,
        phi=phi,
        xi=xi,
        eta=eta,
        declared_c=2.0 / float(r),
        params={"family": "product", "l": l, "m": m, "r": float(r)},
        block_fields={"E4l": _horizontal_fields(xi, eta, range(ds), d) if l else [], "E4m": e4m},
    )
    if verify:
        self_verify(model)
    return model


def homothetic_deform(M: ManifoldModel, a, check: bool = True, verify: bool = True) -> ManifoldModel:
    """phi -> phi, xi -> xi/a, eta -> a eta, g -> a^2 g.

    With ``a`` equal to the model's alpha the result is 3-Sasakian.
    """
    if float(a) == 0.0:
        raise ValueError("deformation factor must be nonzero")
    if check:
        cls = classify(M, sample_points(M.dom, 4, 0))
        if cls.tag is not StructureTag.THREE_ALPHA_SASAKIAN:
            raise ClassificationContradiction(f"{M.name} is {cls.describe()}, not 3-alpha-Sasakian")
    k = Const(_as_number(a))
    scale = np.vectorize(lambda e, s: e * s, otypes=[object])
    c = None if M.declared_c is None else M.declared_c / float(a)
    model = ManifoldModel(
        name=f"deform({M.name}, {a})",
        dom=M.dom,
        metric=scale(M.metric, k * k),
        phi=M.phi,
        xi=scale(M.xi, ONE / k),
        eta=scale(M.eta, k),
        declared_c=c,
        params={**M.params, "deform": float(a) * M.params.get("deform", 1.0)},
        block_fields=M.block_fields,
    )
    if verify:
        self_verify(model)
    return model


def perturb(M: ManifoldModel, part: str, index: tuple, eps: float = 1e-3) -> ManifoldModel:
    """Copy of ``M`` with one component of metric/phi/xi/eta shifted by ``eps``.

    Metric perturbations are applied symmetrically.
    """
    arrays = {"metric": M.metric.copy(), "phi": M.phi.copy(), "xi": M.xi.copy(), "eta": M.eta.copy()}
    if part not in arrays:
        raise ValueError(f"unknown structure part {part!r}")
    arr = arrays[part]
    index = tuple(index)
    arr[index] = arr[index] + Const(float(eps))
    if part == "metric" and index[0] != index[1]:
        swapped = (index[1], index[0])
        arr[swapped] = arr[swapped] + Const(float(eps))
    return ManifoldModel(
        name=f"{M.name}+{part}{list(index)}",
        dom=M.dom,
        declared_c=M.declared_c,
        params={**M.params, "perturbed": [part, list(index), float(eps)]},
        block_fields=M.block_fields,
        **arrays,
    )


def swap_reeb(M: ManifoldModel, a: int = 1, b: int = 2) -> ManifoldModel:
    """Copy of ``M`` with xi_{a+1} and xi_{b+1} exchanged (fault injection)."""
    xi = M.xi.copy()
    xi[[a, b]] = xi[[b, a]]
    return ManifoldModel(
        name=f"{M.name}+swap_xi{a + 1}{b + 1}", dom=M.dom, metric=M.metric, phi=M.phi, xi=xi,
        eta=M.eta, declared_c=M.declared_c, params=dict(M.params), block_fields=M.block_fields,
    )


# -- cone ------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConeModel:
    """M x R with G = g + dt^2 and the almost hypercomplex structure built from (phi, xi, eta).

    ``chart`` carries the product as a ManifoldModel so the jet machinery applies.
    """

    base: ManifoldModel
    alpha: float
    chart: ManifoldModel  # dim d+1 carrier: metric G, phi slots hold J_a

    @property
    def dim(self) -> int:
        return self.base.dim + 1

    @property
    def J(self) -> np.ndarray:
        return self.chart.phi

    @property
    def G(self) -> np.ndarray:
        return self.chart.metric


def cone_hermitian(M: ManifoldModel, alpha: float | None = None) -> ConeModel:
    """J_a(X, f d/dt) = (phi_a X - f xi_a, eta_a(X) d/dt) on M x R."""
    if alpha is None:
        cls = classify(M, sample_points(M.dom, 4, 0))
        if cls.tag is not StructureTag.THREE_ALPHA_SASAKIAN:
            raise ClassificationContradiction(f"{M.name} is {cls.describe()}, not 3-alpha-Sasakian")
        alpha = cls.alpha
    d = M.dim
    G = _block_diag(M.metric, np.array([[ONE]], dtype=object))
    J = _zeros((3, d + 1, d + 1))
    for a in range(3):
        J[a, :d, :d] = M.phi[a]
        J[a, :d, d] = -M.xi[a]
        J[a, d, :d] = M.eta[a]
    dom = ChartDomain(d + 1, tuple(M.dom.lower) + (-1.0,), tuple(M.dom.upper) + (1.0,), M.dom.guard)
    # the carrier has no almost contact structure of its own; xi/eta slots are zero
    chart = ManifoldModel(
        name=f"cone({M.name})", dom=dom, metric=G, phi=J,
        xi=_zeros((3, d + 1)), eta=_zeros((3, d + 1)), params={"family": "cone", **M.params},
    )
    return ConeModel(M, float(alpha), chart)


def cone_check(C: ConeModel, p, tol: float = 1e-7, algebra_tol: float = 1e-9) -> list:
    """Quaternionic relations, compatibility and dOmega = 2 omega ^ Omega on M x R."""
    p = np.asarray(p, float)
    d = C.base.dim
    Lc = local(C.chart, p)
    Lb = local(C.base, p[:d])
    J, G = Lc.phi, Lc.g
    I = np.eye(d + 1)
    r_q = 0.0
    for a, b, c in CYCLIC:
        r_q = max(r_q, _maxabs(J[a] @ J[b] - J[c]), _maxabs(J[b] @ J[a] + J[c]), _maxabs(J[a] @ J[a] + I))
    r_g = max(_maxabs(J[a].T @ G @ J[a] - G) for a in range(3))
    Omega = Lc.Phi
    r_o = max(_maxabs(Omega[a][:d, :d] - Lb.Phi[a]) for a in range(3))
    r_t = max(_maxabs(Omega[a][:d, d] + Lb.eta[a]) for a in range(3))
    dOmega = Lc.dPhi
    r_d = max(_maxabs(dOmega[a][:d, :d, d] + (2.0 / 3.0) * Lb.deta[a]) for a in range(3))
    omega = np.zeros(d + 1)
    omega[d] = -C.alpha
    r_w = 0.0
    for a in range(3):
        wedge = forms.alternation(np.einsum("i,jk->ijk", omega, Omega[a]))
        scale = max(1.0, _maxabs(dOmega[a]))
        r_w = max(r_w, _maxabs(dOmega[a] - 2.0 * wedge) / scale)
    return [
        check("cone.quaternionic", "J_a J_b = -J_b J_a = J_c, J_a^2 = -I", r_q, algebra_tol, "absolute"),
        check("cone.compatible", "G(J_a X, J_a Y) = G(X, Y)", r_g, algebra_tol),
        check("cone.Omega_base", "Omega_a(X, Y) = Phi_a(X, Y)", r_o, algebra_tol),
        check("cone.Omega_dt", "Omega_a(X, d/dt) = -eta_a(X)", r_t, algebra_tol),
        check("cone.dOmega_dt", "dOmega_a(X, Y, d/dt) = -(2/3) d eta_a(X, Y)", r_d, tol),
        check("cone.dOmega_omega", "dOmega_a = 2 omega ^ Omega_a, omega = -alpha dt", r_w, tol),
    ]


def _maxabs(x) -> float:
    x = np.asarray(x, float)
    return float(np.max(np.abs(x))) if x.size else 0.0


# -- persistence -----------------------------------------------------------------


def save_model(M: ManifoldModel, path) -> None:
    """Write ``M`` as JSON (shared expression node table)."""
    d = M.dim
    roots = [M.dom.guard] + M.all_exprs()
    blocks = {k: len(v) for k, v in M.block_fields.items()}
    for k in sorted(M.block_fields):
        for v in M.block_fields[k]:
            roots.extend(v)
    table, ids = dump_table(roots)
    doc = {
        "name": M.name,
        "dimension": d,
        "lower": list(M.dom.lower),
        "upper": list(M.dom.upper),
        "declared_c": M.declared_c,
        "params": M.params,
        "blocks": blocks,
        "nodes": table,
        "roots": ids,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def load_model(path) -> ManifoldModel:
    doc = json.loads(Path(path).read_text())
    d = doc["dimension"]
    exprs = load_table(doc["nodes"], doc["roots"])
    guard, rest = exprs[0], exprs[1:]
    sizes = [d * d, 3 * d * d, 3 * d, 3 * d]
    parts = []
    for s in sizes:
        parts.append(np.array(rest[:s], dtype=object))
        rest = rest[s:]
    blocks = {}
    for k in sorted(doc["blocks"]):
        cnt = doc["blocks"][k]
        blocks[k] = [np.array(rest[i * d:(i + 1) * d], dtype=object) for i in range(cnt)]
        rest = rest[cnt * d:]
    return ManifoldModel(
        name=doc["name"],
        dom=ChartDomain(d, tuple(doc["lower"]), tuple(doc["upper"]), guard),
        metric=parts[0].reshape(d, d),
        phi=parts[1].reshape(3, d, d),
        xi=parts[2].reshape(3, d),
        eta=parts[3].reshape(3, d),
        declared_c=doc["declared_c"],
        params=doc["params"],
        block_fields=blocks,
    )


# -- catalogue -------------------------------------------------------------------


@dataclass(frozen=True)
class CatalogueEntry:
    summary: str
    builder: object
    defaults: dict


def _sphere_named(n):
    return lambda r=1, **_: sphere_three_alpha(n, r)


CATALOGUE = {
    "flat": CatalogueEntry("flat 3-cosymplectic R^{4n+3}", lambda n=1, **_: flat_three_cosymplectic(n), {"n": 1}),
    "product": CatalogueEntry("S^{4l+3}(r) x R^{4m}", lambda l=0, m=1, r=1, **_: product_three_qs(l, m, r),
                              {"l": 0, "m": 1, "r": 1}),
    "s3": CatalogueEntry("round S^3(r), 3-alpha-Sasakian", _sphere_named(0), {"r": 1}),
    "s3xr4": CatalogueEntry("S^3(r) x R^4, rank 3", lambda r=1, **_: product_three_qs(0, 1, r), {"r": 1}),
    "s3xr8": CatalogueEntry("S^3(r) x R^8, rank 3", lambda r=1, **_: product_three_qs(0, 2, r), {"r": 1}),
    "s7": CatalogueEntry("round S^7(r), 3-alpha-Sasakian", _sphere_named(1), {"r": 1}),
    "s7xr4": CatalogueEntry("S^7(r) x R^4, rank 7 in dimension 11", lambda r=1, **_: product_three_qs(1, 1, r),
                            {"r": 1}),
    "sphere": CatalogueEntry("round S^{4n+3}(r)", lambda n=1, r=1, **_: sphere_three_alpha(n, r), {"n": 1, "r": 1}),
}


def list_models() -> list:
    return sorted(CATALOGUE)


def _normalise(params: dict) -> tuple:
    clean = {}
    for k, v in params.items():
        if v is None:
            continue
        if k == "r" or k == "alpha":
            v = _as_number(v)
            if isinstance(v, float) and v.is_integer():
                v = Fraction(int(v))
        clean[k] = v
    return tuple(sorted(clean.items()))


def build(name: str, **params) -> ManifoldModel:
    """Catalogue model by name; ``alpha`` applies a homothetic deformation afterwards."""
    if name not in CATALOGUE:
        raise UnknownModel(f"unknown model {name!r}; choose from {', '.join(list_models())}")
    return _build_cached(name, _normalise(params))


@lru_cache(maxsize=32)
def _build_cached(name: str, key: tuple) -> ManifoldModel:
    params = dict(key)
    alpha = params.pop("alpha", None)
    entry = CATALOGUE[name]
    model = entry.builder(**params)
    if alpha is not None and alpha != 1:
        model = homothetic_deform(model, alpha)
    return model

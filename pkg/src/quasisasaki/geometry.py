"""Riemannian and almost-contact calculus at a point of a chart model.

Index conventions used throughout:

* endomorphisms ``A[k, j] = A^k_j`` (so ``A @ X`` applies A to X);
* bilinear forms ``B[i, j] = B(d_i, d_j)``;
* Christoffel symbols ``gamma[k, i, j] = Gamma^k_{ij}``;
* curvature ``riemann[l, k, i, j] = R^l_{kij}`` with
  ``R(d_i, d_j) d_k = R^l_{kij} d_l`` and
  ``R(X, Y) = [nabla_X, nabla_Y] - nabla_[X, Y]``;
* derivative axes come last: ``grad[..., m] = d_m (...)``.

Exterior derivatives use the alternation convention of :mod:`.forms`, i.e.
``deta[i, j] = (d_i eta_j - d_j eta_i) / 2``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from .errors import DegeneratePlane, SingularMetric
from .exprjet import ChartDomain, _eval_tuples, as_expr, jet_arrays
from . import forms
from .forms import Form

PLANE_EPS = 1e-10

# even permutations of (0, 1, 2)
CYCLIC = ((0, 1, 2), (1, 2, 0), (2, 0, 1))


@dataclass(frozen=True, eq=False)
class ManifoldModel:
    """Chart model carrying g and three almost contact structures.

    ``phi[a][k, j]`` is the (k, j) component of phi_{a+1}; ``xi[a]`` and
    ``eta[a]`` are component vectors.  All entries are :class:`Expr`.
    ``block_fields`` optionally maps ``"E4l"``/``"E4m"`` to lists of vector
    fields (component Expr arrays) spanning those distributions pointwise.
    """

    name: str
    dom: ChartDomain
    metric: np.ndarray
    phi: np.ndarray
    xi: np.ndarray
    eta: np.ndarray
    declared_c: float | None = None
    params: dict = field(default_factory=dict)
    block_fields: dict = field(default_factory=dict)

    def __post_init__(self):
        d = self.dom.dimension
        object.__setattr__(self, "metric", _obj(self.metric, (d, d)))
        object.__setattr__(self, "phi", _obj(self.phi, (3, d, d)))
        object.__setattr__(self, "xi", _obj(self.xi, (3, d)))
        object.__setattr__(self, "eta", _obj(self.eta, (3, d)))
        blocks = {k: [_obj(v, (d,)) for v in vs] for k, vs in self.block_fields.items()}
        object.__setattr__(self, "block_fields", blocks)
        for arr in (self.metric, self.phi, self.xi, self.eta):
            for e in arr.ravel():
                if e.max_var() >= d:
                    raise ValueError(f"{self.name}: expression uses a variable beyond dim {d}")

    @property
    def dim(self) -> int:
        return self.dom.dimension

    def all_exprs(self) -> list:
        return list(self.metric.ravel()) + list(self.phi.ravel()) + list(self.xi.ravel()) + list(
            self.eta.ravel()
        )


def _obj(arr, shape) -> np.ndarray:
    out = np.empty(shape, dtype=object)
    src = np.asarray(arr, dtype=object)
    if src.shape != shape:
        raise ValueError(f"expected field shape {shape}, got {src.shape}")
    for idx in np.ndindex(shape):
        out[idx] = as_expr(src[idx])
    return out


@dataclass(frozen=True, eq=False)
class TensorValue:
    """Component array of a tensor at a point; ``variance`` has one 'u'/'d' per slot."""

    array: np.ndarray
    variance: str
    point: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.array, dtype=dtype)

    @property
    def shape(self):
        return self.array.shape


# -- tensor-valued jets --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FieldJet:
    """Array-valued jet: value, first derivatives, optional second derivatives."""

    val: np.ndarray
    grad: np.ndarray | None
    hess: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.grad.shape[-1]

    def __add__(self, other: "FieldJet") -> "FieldJet":
        return FieldJet(
            self.val + other.val,
            _opt(np.add, self.grad, other.grad),
            _opt(np.add, self.hess, other.hess),
        )

    def __sub__(self, other: "FieldJet") -> "FieldJet":
        return FieldJet(
            self.val - other.val,
            _opt(np.subtract, self.grad, other.grad),
            _opt(np.subtract, self.hess, other.hess),
        )

    def scale(self, a: float) -> "FieldJet":
        return FieldJet(
            a * self.val,
            None if self.grad is None else a * self.grad,
            None if self.hess is None else a * self.hess,
        )

    def deriv(self) -> "FieldJet":
        """The first-derivative field (derivative index appended last)."""
        return FieldJet(self.grad, self.hess, None)

    def __getitem__(self, idx) -> "FieldJet":
        idx = idx if isinstance(idx, tuple) else (idx,)
        return FieldJet(
            self.val[idx],
            None if self.grad is None else self.grad[idx],
            None if self.hess is None else self.hess[idx],
        )


def _opt(op, a, b):
    if a is None or b is None:
        return None
    return op(a, b)


def constant_field(arr, dim: int) -> FieldJet:
    arr = np.asarray(arr, dtype=float)
    return FieldJet(arr, np.zeros(arr.shape + (dim,)), np.zeros(arr.shape + (dim, dim)))


def fj_einsum(spec: str, a: FieldJet, b: FieldJet) -> FieldJet:
    """Product rule for ``einsum(spec, a, b)`` on jets (lowercase index letters)."""
    ins, out = spec.split("->")
    sa, sb = ins.split(",")
    val = np.einsum(spec, a.val, b.val)
    grad = None
    if a.grad is not None and b.grad is not None:
        grad = np.einsum(f"{sa}Y,{sb}->{out}Y", a.grad, b.val) + np.einsum(
            f"{sa},{sb}Y->{out}Y", a.val, b.grad
        )
    hess = None
    if grad is not None and a.hess is not None and b.hess is not None:
        cross = np.einsum(f"{sa}Y,{sb}Z->{out}YZ", a.grad, b.grad)
        hess = (
            np.einsum(f"{sa}YZ,{sb}->{out}YZ", a.hess, b.val)
            + np.einsum(f"{sa},{sb}YZ->{out}YZ", a.val, b.hess)
            + (cross + np.swapaxes(cross, -1, -2))
        )
    return FieldJet(val, grad, hess)


def expr_field(exprs, p) -> FieldJet:
    """Jet of an array of expressions at ``p``."""
    v, g, h = jet_arrays(exprs, p)
    return FieldJet(v, g, h)


# -- differential operators on jets --------------------------------------------


def exterior_d(form: FieldJet) -> FieldJet:
    """d of a p-form given as a dense alternating jet (alternation convention)."""
    p = form.val.ndim
    deriv = form.deriv()  # the derivative axis sits at position p

    def assemble(arr):
        if arr is None:
            return None
        out = sum((-1) ** a * np.moveaxis(arr, p, a) for a in range(p + 1))
        return out / (p + 1)

    return FieldJet(assemble(deriv.val), assemble(deriv.grad), None)


def lie_derivative_jet(X: FieldJet, T: FieldJet, variance: str) -> FieldJet:
    """Lie derivative of a tensor field T (slots per ``variance``) along X."""
    dX = X.deriv()  # dX.val[i, m] = d_m X^i
    dT = T.deriv()
    k = len(variance)
    letters = "abcdefgh"[:k]
    slots = letters
    res = fj_einsum(f"i,{slots}i->{slots}", X, dT)
    for pos, kind in enumerate(variance):
        if kind == "u":
            # - T^{..i..} d_i X^a
            src = slots[:pos] + "i" + slots[pos + 1 :]
            res = res - fj_einsum(f"{src},{slots[pos]}i->{slots}", T, dX)
        else:
            # + T_{..i..} d_b X^i
            src = slots[:pos] + "i" + slots[pos + 1 :]
            res = res + fj_einsum(f"{src},i{slots[pos]}->{slots}", T, dX)
    return res


def bracket_jet(X: FieldJet, Y: FieldJet) -> FieldJet:
    return lie_derivative_jet(X, Y, "u")


# -- point geometry ------------------------------------------------------------


class LocalGeometry:
    """All jets and derived tensors of a model at one point (lazily computed)."""

    def __init__(self, model: ManifoldModel, p):
        self.model = model
        self.p = np.asarray(p, dtype=float)
        self.dim = model.dim
        d = self.dim
        memo: dict = {}
        self._pinned: list = []
        exprs = model.all_exprs()
        _eval_tuples(exprs, self.p, memo)
        self._memo = memo

        def arr(a):
            return self.field(a)

        self.g_jet = arr(model.metric)
        self.phi_jet = arr(model.phi)
        self.xi_jet = arr(model.xi)
        self.eta_jet = arr(model.eta)
        self.g = self.g_jet.val
        if not np.all(np.isfinite(self.g)):
            raise SingularMetric("metric has non-finite entries")
        try:
            np.linalg.cholesky(0.5 * (self.g + self.g.T))
        except np.linalg.LinAlgError as err:
            raise SingularMetric(f"metric not positive definite at {self.p.tolist()}") from err
        self.ginv = np.linalg.inv(self.g)
        self.phi = self.phi_jet.val
        self.xi = self.xi_jet.val
        self.eta = self.eta_jet.val
        assert self.g.shape == (d, d)

    def field(self, exprs) -> FieldJet:
        """Jet of further expressions at this point (sharing the evaluation memo)."""
        arr = np.asarray(exprs, dtype=object)
        flat = [as_expr(e) for e in arr.ravel()]
        # the memo is keyed by id(); keep roots alive so ids are never recycled
        self._pinned.extend(flat)
        _eval_tuples(flat, self.p, self._memo)
        d = self.dim
        n = len(flat)
        val = np.empty(n)
        grad = np.zeros((n, d))
        hess = np.zeros((n, d, d))
        for i, e in enumerate(flat):
            v, g, h = self._memo[id(e)]
            val[i] = v
            if g is not None:
                grad[i] = g
            if h is not None:
                hess[i] = h
        s = arr.shape
        return FieldJet(val.reshape(s), grad.reshape(s + (d,)), hess.reshape(s + (d, d)))

    # -- Levi-Civita ----------------------------------------------------------
    @cached_property
    def gamma(self) -> np.ndarray:
        dg = self.g_jet.grad  # dg[i, j, m] = d_m g_ij
        # lowered: Gamma_{l i j} = (d_i g_jl + d_j g_il - d_l g_ij) / 2
        low = 0.5 * (
            np.einsum("jli->lij", dg) + np.einsum("ilj->lij", dg) - np.einsum("ijl->lij", dg)
        )
        return np.einsum("kl,lij->kij", self.ginv, low)

    @cached_property
    def dgamma(self) -> np.ndarray:
        """dgamma[k, i, j, m] = d_m Gamma^k_ij."""
        dg = self.g_jet.grad
        ddg = self.g_jet.hess  # ddg[i, j, m, n]
        low = 0.5 * (
            np.einsum("jli->lij", dg) + np.einsum("ilj->lij", dg) - np.einsum("ijl->lij", dg)
        )
        dlow = 0.5 * (
            np.einsum("jlim->lijm", ddg) + np.einsum("iljm->lijm", ddg) - np.einsum("ijlm->lijm", ddg)
        )
        dginv = -np.einsum("ka,abm,bl->klm", self.ginv, dg, self.ginv)
        return np.einsum("klm,lij->kijm", dginv, low) + np.einsum("kl,lijm->kijm", self.ginv, dlow)

    @cached_property
    def riemann(self) -> np.ndarray:
        G, dG = self.gamma, self.dgamma
        # R^l_{kij} = T^l_{kij} - T^l_{kji},  T^l_{kij} = d_i G^l_jk + G^l_im G^m_jk
        # (built as a difference so the (i, j) antisymmetry is exact)
        t = np.einsum("ljki->lkij", dG) + np.einsum("lim,mjk->lkij", G, G)
        return t - np.swapaxes(t, 2, 3)

    @cached_property
    def riemann_lowered(self) -> np.ndarray:
        """R[a, b, c, e] = g(R(d_a, d_b) d_c, d_e)."""
        return np.einsum("le,lcab->abce", self.g, self.riemann)

    @cached_property
    def ricci(self) -> np.ndarray:
        return np.einsum("ikij->jk", self.riemann)

    @cached_property
    def scalar_curvature(self) -> float:
        return float(np.einsum("jk,jk->", self.ginv, self.ricci))

    def curvature_apply(self, X, Y, Z) -> np.ndarray:
        """R(X, Y) Z."""
        return np.einsum("lkij,i,j,k->l", self.riemann, X, Y, Z)

    def sectional(self, X, Y) -> float:
        X = np.asarray(X, float)
        Y = np.asarray(Y, float)
        gxx, gyy, gxy = X @ self.g @ X, Y @ self.g @ Y, X @ self.g @ Y
        gram = gxx * gyy - gxy**2
        if gram < PLANE_EPS * max(gxx * gyy, 1e-300):
            raise DegeneratePlane("vectors span no plane")
        num = self.curvature_apply(X, Y, Y) @ self.g @ X
        return float(num / gram)

    # -- covariant derivatives (first slot = direction) -------------------------
    def nabla_vector(self, V: FieldJet) -> np.ndarray:
        """out[k, i] = (nabla_i V)^k."""
        return np.einsum("ki->ki", V.grad) + np.einsum("kij,j->ki", self.gamma, V.val)

    def nabla_covector(self, w: FieldJet) -> np.ndarray:
        """out[i, j] = (nabla_i w)_j."""
        return np.einsum("ji->ij", w.grad) - np.einsum("kij,k->ij", self.gamma, w.val)

    def nabla_endo(self, A: FieldJet) -> np.ndarray:
        """out[i, k, j] = (nabla_i A)^k_j."""
        return (
            np.einsum("kji->ikj", A.grad)
            + np.einsum("kil,lj->ikj", self.gamma, A.val)
            - np.einsum("lij,kl->ikj", self.gamma, A.val)
        )

    def nabla_bilinear(self, B: FieldJet) -> np.ndarray:
        """out[i, j, k] = (nabla_i B)_{jk}."""
        return (
            np.einsum("jki->ijk", B.grad)
            - np.einsum("lij,lk->ijk", self.gamma, B.val)
            - np.einsum("lik,jl->ijk", self.gamma, B.val)
        )

    # -- structure tensors ------------------------------------------------------
    @cached_property
    def Phi_jet(self) -> FieldJet:
        """Fundamental 2-forms Phi_a(X, Y) = g(X, phi_a Y)."""
        return fj_einsum("ik,akj->aij", self.g_jet, self.phi_jet)

    @property
    def Phi(self) -> np.ndarray:
        return self.Phi_jet.val

    @cached_property
    def deta_jet(self) -> FieldJet:
        """d eta_a stacked along a leading structure axis (value and gradient)."""
        parts = [exterior_d(self.eta_jet[a]) for a in range(3)]
        return FieldJet(np.stack([q.val for q in parts]), np.stack([q.grad for q in parts]), None)

    @property
    def deta(self) -> np.ndarray:
        return self.deta_jet.val

    @cached_property
    def dPhi(self) -> np.ndarray:
        return np.stack([exterior_d(self.Phi_jet[a]).val for a in range(3)])

    @cached_property
    def nabla_xi(self) -> np.ndarray:
        """nabla_xi[a, k, i] = (nabla_i xi_a)^k."""
        return np.stack([self.nabla_vector(self.xi_jet[a]) for a in range(3)])

    @cached_property
    def nabla_phi(self) -> np.ndarray:
        """nabla_phi[a, i, k, j] = ((nabla_i phi_a))^k_j."""
        return np.stack([self.nabla_endo(self.phi_jet[a]) for a in range(3)])

    def nijenhuis(self, a: int):
        """(N1, N2) of structure ``a`` on the coordinate basis.

        N1[k, x, y] = ([phi, phi](d_x, d_y) + 2 deta(d_x, d_y) xi)^k and
        N2[x, y] = (L_{phi d_x} eta)(d_y) - (L_{phi d_y} eta)(d_x).
        """
        phi = self.phi_jet[a]
        P, dP = phi.val, phi.grad  # dP[k, j, m] = d_m phi^k_j
        t = np.einsum("ix,kyi->kxy", P, dP)  # phi^i_x d_i phi^k_y
        s = np.einsum("kl,lxy->kxy", P, dP)  # phi^k_l d_y phi^l_x
        bracket = t - np.swapaxes(t, 1, 2) + s - np.swapaxes(s, 1, 2)
        N1 = bracket + 2.0 * np.einsum("xy,k->kxy", self.deta[a], self.xi[a])
        eta = self.eta_jet[a]
        u = np.einsum("ix,yi->xy", P, eta.grad) + np.einsum("i,ixy->xy", eta.val, dP)
        N2 = u - u.T
        return N1, N2

    def lie(self, X: FieldJet, T: FieldJet, variance: str) -> FieldJet:
        return lie_derivative_jet(X, T, variance)


@lru_cache(maxsize=64)
def _local_cached(model: ManifoldModel, key: tuple) -> LocalGeometry:
    return LocalGeometry(model, np.array(key))


def local(model: ManifoldModel, p) -> LocalGeometry:
    return _local_cached(model, tuple(float(x) for x in np.asarray(p, float)))


# -- public operations ---------------------------------------------------------


def christoffel(M: ManifoldModel, p) -> TensorValue:
    L = local(M, p)
    return TensorValue(L.gamma, "udd", L.p)


def covariant_derivative(M: ManifoldModel, p, fld, direction, kind: str = "vector") -> TensorValue:
    """nabla_X of a vector, 1-form or endomorphism field given by Expr components."""
    L = local(M, p)
    F = fld if isinstance(fld, FieldJet) else L.field(fld)
    X = np.asarray(direction, float)
    if kind == "vector":
        return TensorValue(L.nabla_vector(F) @ X, "u", L.p)
    if kind in ("covector", "1-form"):
        return TensorValue(np.einsum("i,ij->j", X, L.nabla_covector(F)), "d", L.p)
    if kind == "endomorphism":
        return TensorValue(np.einsum("i,ikj->kj", X, L.nabla_endo(F)), "ud", L.p)
    if kind == "bilinear":
        return TensorValue(np.einsum("i,ijk->jk", X, L.nabla_bilinear(F)), "dd", L.p)
    raise ValueError(f"unknown field kind {kind!r}")


def riemann(M: ManifoldModel, p) -> TensorValue:
    L = local(M, p)
    return TensorValue(L.riemann, "uddd", L.p)


def ricci(M: ManifoldModel, p) -> TensorValue:
    L = local(M, p)
    return TensorValue(L.ricci, "dd", L.p)


def scalar_curvature(M: ManifoldModel, p) -> float:
    return local(M, p).scalar_curvature


def sectional(M: ManifoldModel, p, X, Y) -> float:
    return local(M, p).sectional(X, Y)


def exterior_derivative(M: ManifoldModel, p, form) -> TensorValue:
    """d of a 1-form or 2-form field (Expr components, or a FieldJet)."""
    L = local(M, p)
    F = form if isinstance(form, FieldJet) else L.field(form)
    out = exterior_d(F)
    return TensorValue(out.val, "d" * out.val.ndim, L.p)


_LIE_KINDS = {"function": "", "vector": "u", "1-form": "d", "2-form": "dd", "endomorphism": "ud"}


def lie_derivative(M: ManifoldModel, p, tensor, along, kind: str) -> TensorValue:
    L = local(M, p)
    T = tensor if isinstance(tensor, FieldJet) else L.field(tensor)
    X = along if isinstance(along, FieldJet) else L.field(along)
    variance = _LIE_KINDS[kind]
    return TensorValue(lie_derivative_jet(X, T, variance).val, variance, L.p)


def nijenhuis(M: ManifoldModel, p, idx: int):
    """N1 (as 'udd') and N2 (as 'dd') of structure idx in {1, 2, 3}."""
    L = local(M, p)
    N1, N2 = L.nijenhuis(idx - 1)
    return TensorValue(N1, "udd", L.p), TensorValue(N2, "dd", L.p)


def fundamental_two_form(M: ManifoldModel, p, idx: int) -> TensorValue:
    L = local(M, p)
    return TensorValue(L.Phi[idx - 1], "dd", L.p)


def wedge_power(form, k: int, p=None) -> Form:
    f = form if isinstance(form, Form) else Form.from_dense(np.asarray(form))
    return forms.wedge_power(f, k)


def orthonormal_frame(g: np.ndarray) -> np.ndarray:
    """Columns form a g-orthonormal, positively oriented basis."""
    L = np.linalg.cholesky(g)  # g = L L^T
    return np.linalg.inv(L).T


def volume_nondegenerate(form_top, p=None, g=None, tol: float = 1e-6) -> bool:
    f = form_top if isinstance(form_top, Form) else Form.from_dense(np.asarray(form_top))
    if f.degree != f.dim:
        raise ValueError("not a top-degree form")
    frame = np.eye(f.dim) if g is None else orthonormal_frame(g)
    return abs(forms.evaluate_on_frame(f, frame)) > tol


def covariant_hessian_bianchi(L: LocalGeometry) -> float:
    """Max |R(X,Y)Z + R(Y,Z)X + R(Z,X)Y| over coordinate triples."""
    R = L.riemann  # R[l, k, i, j]: R(d_i, d_j) d_k
    s = R + np.einsum("lkij->lijk", R) + np.einsum("lkij->ljki", R)
    return float(np.max(np.abs(s)))


def curvature_symmetry_residuals(L: LocalGeometry) -> dict:
    R = L.riemann_lowered  # R[a,b,c,e] = g(R(a,b)c, e)
    scale = max(1.0, float(np.max(np.abs(R))))
    return {
        "antisym_ab": float(np.max(np.abs(R + np.swapaxes(R, 0, 1)))) / scale,
        "antisym_ce": float(np.max(np.abs(R + np.swapaxes(R, 2, 3)))) / scale,
        "pair_sym": float(np.max(np.abs(R - np.einsum("abce->ceab", R)))) / scale,
        "bianchi": covariant_hessian_bianchi(L) / scale,
    }


def covariant_phi_sides(L: LocalGeometry, a: int):
    """Both sides of the covariant-derivative formula for phi_a, indexed [x, y, z].

    lhs = 2 g((nabla_X phi) Y, Z); rhs assembled from dPhi, N1, N2, eta, deta.
    """
    g = L.g
    phi = L.phi[a]
    eta = L.eta[a]
    deta = L.deta[a]
    dPhi = L.dPhi[a]
    N1, N2 = L.nijenhuis(a)
    lhs = 2.0 * np.einsum("zk,xky->xyz", g, L.nabla_phi[a])
    t1 = 3.0 * np.einsum("xbc,by,cz->xyz", dPhi, phi, phi)
    t2 = -3.0 * dPhi
    t3 = np.einsum("kl,kyz,lx->xyz", g, N1, phi)
    t4 = np.einsum("yz,x->xyz", N2, eta)
    t5 = 2.0 * np.einsum("by,bx,z->xyz", phi, deta, eta)
    t6 = -2.0 * np.einsum("bz,bx,y->xyz", phi, deta, eta)
    return lhs, t1 + t2 + t3 + t4 + t5 + t6


def covariant_phi_residual(M: ManifoldModel, p) -> float:
    """Relative residual of the covariant-derivative formula over all three structures."""
    L = local(M, p)
    worst = 0.0
    for a in range(3):
        lhs, rhs = covariant_phi_sides(L, a)
        scale = max(1.0, float(np.max(np.abs(lhs))), float(np.max(np.abs(rhs))))
        worst = max(worst, float(np.max(np.abs(lhs - rhs))) / scale)
    return worst


def basis_vector(d: int, i: int) -> np.ndarray:
    e = np.zeros(d)
    e[i] = 1.0
    return e


def coordinate_pairs(d: int):
    return itertools.product(range(d), repeat=2)

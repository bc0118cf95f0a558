"""Splitting T M = V + E4l + E4m and the identities built on it.

Frames are stored as column matrices in chart coordinates; every block is
g-orthonormal.  Projectors ``P = B B^T g`` are g-orthogonal.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import forms
from .contact import TAU_RANK, StructureTag, _rank, detect_c, rel_residual
from .errors import (
    DimensionMismatch,
    FDUnstable,
    NotHorizontal,
    SingularPairing,
    StructureViolation,
)
from .geometry import (
    CYCLIC, FieldJet, ManifoldModel, bracket_jet, fj_einsum, lie_derivative_jet, local, orthonormal_frame,
)
from .report import check, not_applicable

GS_DROP = 1e-9
ORTHO_TOL = 1e-9
INVARIANCE_TOL = 1e-8
COND_MAX = 1e8
VOLUME_TOL = 1e-6
WEDGE_TOL = 1e-9
FD_FLOOR = 1e-5


def gram_schmidt(candidates: np.ndarray, g: np.ndarray, start=None) -> np.ndarray:
    """g-orthonormalise the columns of ``candidates`` in order, dropping near-dependent ones.

    ``start`` holds already orthonormal columns that new vectors are made orthogonal to.
    """
    d = g.shape[0]
    basis = [] if start is None else [start[:, i] for i in range(start.shape[1])]
    n0 = len(basis)
    for v in np.asarray(candidates, float).T:
        w = v.copy()
        for _ in range(2):  # second pass for numerical orthogonality
            for b in basis:
                w = w - (b @ g @ w) * b
        norm = float(np.sqrt(max(w @ g @ w, 0.0)))
        if norm < GS_DROP:
            continue
        basis.append(w / norm)
    out = basis[n0:]
    return np.array(out).T if out else np.zeros((d, 0))


@dataclass(frozen=True, eq=False)
class FrameDecomposition:
    point: np.ndarray
    g: np.ndarray
    V: np.ndarray
    E4l: np.ndarray
    E4m: np.ndarray
    l: int
    m: int
    c: float

    @property
    def H(self) -> np.ndarray:
        return np.hstack([self.E4l, self.E4m])

    @property
    def rank_block(self) -> np.ndarray:
        """Columns spanning E^{4l+3} = V + E4l."""
        return np.hstack([self.V, self.E4l])

    def projector(self, B: np.ndarray) -> np.ndarray:
        return B @ B.T @ self.g

    @cached_property
    def P_V(self):
        return self.projector(self.V)

    @cached_property
    def P_l(self):
        return self.projector(self.E4l)

    @cached_property
    def P_m(self):
        return self.projector(self.E4m)

    @cached_property
    def P_H(self):
        return self.projector(self.H)

    @property
    def psi_support(self) -> np.ndarray:
        """Projector onto the block where psi agrees with phi."""
        return self.P_V + self.P_l if self.c != 0.0 else self.P_l


def validate_decomposition(M: ManifoldModel, dec: FrameDecomposition) -> dict:
    """Orthogonality, phi-invariance and alpha-independence residuals."""
    L = local(M, dec.point)
    g = dec.g
    blocks = {"V": dec.V, "E4l": dec.E4l, "E4m": dec.E4m}
    res = {}
    all_cols = np.hstack(list(blocks.values()))
    res["orthonormal"] = float(np.max(np.abs(all_cols.T @ g @ all_cols - np.eye(all_cols.shape[1]))))
    for name in ("E4l", "E4m"):
        B = blocks[name]
        if B.shape[1] == 0:
            res[f"phi_invariant_{name}"] = 0.0
            continue
        P = dec.projector(B)
        res[f"phi_invariant_{name}"] = max(
            float(np.max(np.abs((np.eye(M.dim) - P) @ L.phi[a] @ B))) for a in range(3)
        )
    if dec.E4m.shape[1]:
        res["kernel_all_alpha"] = max(float(np.max(np.abs(L.deta[a] @ dec.E4m))) for a in range(3))
    else:
        res["kernel_all_alpha"] = 0.0
    return res


def split_tangent(M: ManifoldModel, p, c: float | None = None, validate: bool = True) -> FrameDecomposition:
    L = local(M, p)
    d = M.dim
    g = L.g
    if c is None:
        c = detect_c(M, [p])
    V = gram_schmidt(L.xi.T, g)
    if V.shape[1] != 3:
        raise DimensionMismatch("Reeb fields are linearly dependent")
    H = gram_schmidt(np.eye(d), g, start=V)
    if H.shape[1] != d - 3:
        raise DimensionMismatch(f"horizontal space has dimension {H.shape[1]}, expected {d - 3}")
    A = H.T @ L.deta[0] @ H
    rank = _rank(A, TAU_RANK, floor=1.0) if A.size else 0
    kdim = A.shape[0] - rank
    if kdim % 4 or rank % 4:
        raise DimensionMismatch(f"E4m has dimension {kdim}, E4l has dimension {rank}")
    if kdim:
        _, s, vt = np.linalg.svd(A)
        null = vt[rank:].T  # coefficients of the kernel in the H basis
        Pm = (H @ null) @ (H @ null).T @ g
        E4m = gram_schmidt(Pm @ np.eye(d), g)
    else:
        E4m = np.zeros((d, 0))
    E4l = gram_schmidt(np.eye(d), g, start=np.hstack([V, E4m]))
    if E4m.shape[1] != kdim or E4l.shape[1] != rank:
        raise DimensionMismatch("Gram-Schmidt lost a direction while building the blocks")
    dec = FrameDecomposition(np.asarray(p, float), g, V, E4l, E4m, rank // 4, kdim // 4, float(c))
    if validate:
        res = validate_decomposition(M, dec)
        limits = {"orthonormal": ORTHO_TOL}
        for k, v in res.items():
            if v > limits.get(k, INVARIANCE_TOL):
                raise StructureViolation(f"decomposition check {k} failed with residual {v:.3e}")
    return dec


def psi_theta(M: ManifoldModel, dec: FrameDecomposition, idx: int):
    """Matrices of (psi_idx, theta_idx) at the decomposition point."""
    phi = local(M, dec.point).phi[idx - 1]
    psi = phi @ dec.psi_support
    return psi, phi - psi


def psi_theta_apply(M: ManifoldModel, dec: FrameDecomposition, idx: int, X):
    psi, theta = psi_theta(M, dec, idx)
    X = np.asarray(X, float)
    return psi @ X, theta @ X


def _psi_all(M, dec):
    return np.stack([psi_theta(M, dec, a + 1)[0] for a in range(3)])


def _max(x) -> float:
    x = np.asarray(x, float)
    return float(np.max(np.abs(x))) if x.size else 0.0


def _block_jets(M: ManifoldModel, p, name: str):
    L = local(M, p)
    fields = M.block_fields.get(name)
    if not fields:
        return None
    return L.field(np.stack(fields))


def _horizontal_basis_fields(M, p):
    parts = [j for j in (_block_jets(M, p, "E4l"), _block_jets(M, p, "E4m")) if j is not None]
    if not parts:
        return None
    return FieldJet(
        np.concatenate([q.val for q in parts]),
        np.concatenate([q.grad for q in parts]),
        np.concatenate([q.hess for q in parts]),
    )


# -- core identities -------------------------------------------------------------


def identity_suite_core(M: ManifoldModel, p, dec: FrameDecomposition, tol: float = 1e-7) -> list:
    L = local(M, p)
    c = dec.c
    H = dec.H
    psi = _psi_all(M, dec)
    out = []

    r = max(_max(H.T @ L.deta[a] @ L.xi[b]) for a in range(3) for b in range(3))
    out.append(check("core.horizontal_deta_vertical", "d eta_a(X, xi_b) = 0 for horizontal X", r, tol, "absolute"))

    r = 0.0
    for a, b, g_ in CYCLIC:
        lie = lie_derivative_jet(L.xi_jet[b], L.Phi_jet[g_], "dd").val
        r = max(r, rel_residual(L.deta[a], 0.5 * lie))
    out.append(check("core.deta_from_lie_Phi", "d eta_a = (1/2) L_{xi_b} Phi_c", r, tol))

    mats = [H.T @ L.deta[a] @ L.phi[a] @ H for a in range(3)]
    r = max(_max(mats[a] - mats[b]) for a in range(3) for b in range(3))
    out.append(check("core.deta_phi_independent", "d eta_a(X, phi_a Y) = d eta_b(X, phi_b Y) on H", r, tol, "absolute"))

    r = 0.0
    for a in range(3):
        for b in range(3):
            if a != b:
                r = max(r, _max(H.T @ (L.phi[b].T @ L.deta[a] @ L.phi[b] + L.deta[a]) @ H))
    out.append(check("core.deta_phi_phi", "d eta_a(phi_b X, phi_b Y) = -d eta_a(X, Y) on H, a != b", r, tol, "absolute"))

    r = max(_max(H.T @ (L.phi[b].T @ L.deta[a] - L.deta[g_]) @ H) for a, b, g_ in CYCLIC)
    out.append(check("core.deta_phi_rotate", "d eta_a(phi_b X, Y) = d eta_c(X, Y) on H", r, tol, "absolute"))

    r = 0.0
    for a, b, g_ in CYCLIC:
        lie = lie_derivative_jet(L.xi_jet[a], L.deta_jet[b], "dd").val
        r = max(r, rel_residual(lie, c * L.deta[g_]))
    out.append(check("core.lie_deta", "L_{xi_a} d eta_b = c d eta_c", r, tol))

    r = r2 = 0.0
    for a, b, g_ in CYCLIC:
        lie_phi = lie_derivative_jet(L.xi_jet[a], L.phi_jet[b], "ud").val
        r = max(r, rel_residual(lie_phi, c * psi[g_]))
        lie_Phi = lie_derivative_jet(L.xi_jet[a], L.Phi_jet[b], "dd").val
        r2 = max(r2, rel_residual(lie_Phi, L.g @ lie_phi))
    out.append(check("core.lie_phi", "L_{xi_a} phi_b = c psi_c", r, tol))
    out.append(check("core.lie_Phi_vs_phi", "(L_{xi_a} Phi_b)(X, Y) = g(X, (L_{xi_a} phi_b) Y)", r2, tol))

    hor = _horizontal_basis_fields(M, p)
    e4l = _block_jets(M, p, "E4l")
    e4m = _block_jets(M, p, "E4m")
    if hor is None:
        for ident, f in (
            ("core.reeb_preserves_H", "[xi_a, X] in H for horizontal X"),
            ("core.bracket_H_E4m", "[X, Y] in H for X in H, Y in E4m"),
            ("core.reeb_preserves_blocks", "[xi_a, E4l] in E4l + V, [xi_a, E4m] in E4m"),
        ):
            out.append(not_applicable(ident, f, "model has no closed-form block fields"))
        return out

    r = 0.0
    for a in range(3):
        for i in range(hor.val.shape[0]):
            br = bracket_jet(L.xi_jet[a], hor[i]).val
            r = max(r, _max(L.eta @ br) / max(1.0, _max(hor.val[i])))
    out.append(check("core.reeb_preserves_H", "[xi_a, X] in H for horizontal X", r, tol))

    if e4m is None:
        out.append(not_applicable("core.bracket_H_E4m", "[X, Y] in H for X in H, Y in E4m", "m = 0"))
    else:
        r = 0.0
        for i in range(hor.val.shape[0]):
            for j in range(e4m.val.shape[0]):
                br = bracket_jet(hor[i], e4m[j]).val
                r = max(r, _max(L.eta @ br) / max(1.0, _max(hor.val[i]) * _max(e4m.val[j])))
        out.append(check("core.bracket_H_E4m", "[X, Y] in H for X in H, Y in E4m", r, tol))

    r = 0.0
    for a in range(3):
        for blk, other in ((e4l, dec.P_m), (e4m, dec.P_l)):
            if blk is None:
                continue
            for i in range(blk.val.shape[0]):
                br = bracket_jet(L.xi_jet[a], blk[i]).val
                r = max(r, _max(other @ br) / max(1.0, _max(blk.val[i])))
    out.append(check("core.reeb_preserves_blocks", "[xi_a, E4l] has no E4m part, [xi_a, E4m] has no E4l part", r, tol))
    return out


def foliation_invariants(M: ManifoldModel, p, dec: FrameDecomposition, tol: float = 1e-8) -> list:
    """Reeb fields Killing; V totally geodesic with nabla_{xi_a} xi_b = (c/2) xi_c."""
    L = local(M, p)
    c = dec.c
    r = max(rel_residual(lie_derivative_jet(L.xi_jet[a], L.g_jet, "dd").val) for a in range(3))
    out = [check("foliation.reeb_killing", "L_{xi_a} g = 0", r, tol)]
    r = 0.0
    for a, b, g_ in CYCLIC:
        r = max(r, _max(L.nabla_xi[a] @ L.xi[a]))
        r = max(r, _max(L.nabla_xi[b] @ L.xi[a] - 0.5 * c * L.xi[g_]))
        r = max(r, _max(L.nabla_xi[a] @ L.xi[b] + 0.5 * c * L.xi[g_]))
    out.append(check("foliation.vertical_geodesic", "nabla_{xi_a} xi_a = 0, nabla_{xi_a} xi_b = (c/2) xi_c", r, tol,
                     "absolute"))
    return out


# -- rank 4l+3 -------------------------------------------------------------------

RANK4L3_FORMULAS = {
    "rank4l3.deta_psi": "d eta_a(X, Y) = (c/2) g(X, psi_a Y)",
    "rank4l3.deta_Phi_block": "d eta_a = (c/2) Phi_a on E^{4l+3}",
    "rank4l3.nabla_xi": "nabla xi_a = -(c/2) psi_a",
    "rank4l3.nabla_phi": "(nabla_X phi_a) Y = (c/2)(eta_a(Y) psi_a^2 X - g(psi_a^2 X, Y) xi_a)",
    "rank4l3.nabla_xi_phi": "(nabla_{xi_b} phi_a) X = (c/2)(eta_b(X) xi_a - eta_a(X) xi_b)",
}

CURVATURE_FORMULAS = {
    "curvature.R_E4m_xi": "R(X, Y) xi_a = 0 for X, Y in E4m",
    "curvature.R_E4m_xi_xi": "R(X, xi_b) xi_a = 0 for X in E4m",
    "curvature.R_E4l_xi_xi": "R(X, xi_a) xi_a = (c^2/4) X for X in E4l",
    "curvature.R_E4l_xi_mixed": "R(X, xi_b) xi_a = 0 for X in E4l, a != b",
    "curvature.K_xi_E4m": "K(xi_a, X) = 0 for X in E4m",
    "curvature.K_xi_E4l": "K(xi_a, X) = c^2/4 for unit X in E4l",
    "curvature.K_xi_xi": "g(R(xi_a, xi_b) xi_b, xi_a) = c^2/4, a != b",
}


def identity_suite_rank4l3(M: ManifoldModel, p, dec: FrameDecomposition, tol: float = 1e-7,
                           curvature: bool = True) -> list:
    c = dec.c
    if c == 0.0:
        names = dict(RANK4L3_FORMULAS)
        if curvature:
            names.update(CURVATURE_FORMULAS)
        return [not_applicable(k, v, "c = 0") for k, v in names.items()]
    L = local(M, p)
    psi = _psi_all(M, dec)
    out = []
    r = max(rel_residual(L.deta[a], 0.5 * c * L.g @ psi[a]) for a in range(3))
    out.append(check("rank4l3.deta_psi", RANK4L3_FORMULAS["rank4l3.deta_psi"], r, tol))
    B = dec.rank_block
    r = max(_max(B.T @ (L.deta[a] - 0.5 * c * L.Phi[a]) @ B) for a in range(3))
    out.append(check("rank4l3.deta_Phi_block", RANK4L3_FORMULAS["rank4l3.deta_Phi_block"], r, tol, "absolute"))
    r = max(rel_residual(L.nabla_xi[a], -0.5 * c * psi[a]) for a in range(3))
    out.append(check("rank4l3.nabla_xi", RANK4L3_FORMULAS["rank4l3.nabla_xi"], r, tol))
    r = 0.0
    for a in range(3):
        S = psi[a] @ psi[a]
        rhs = 0.5 * c * (np.einsum("y,kx->xky", L.eta[a], S) - np.einsum("lx,ly,k->xky", S, L.g, L.xi[a]))
        r = max(r, rel_residual(L.nabla_phi[a], rhs))
    out.append(check("rank4l3.nabla_phi", RANK4L3_FORMULAS["rank4l3.nabla_phi"], r, tol))
    r = 0.0
    for a in range(3):
        for b in range(3):
            if a != b:
                lhs = np.einsum("ikj,i->kj", L.nabla_phi[a], L.xi[b])
                rhs = 0.5 * c * (np.outer(L.xi[a], L.eta[b]) - np.outer(L.xi[b], L.eta[a]))
                r = max(r, rel_residual(lhs, rhs))
    out.append(check("rank4l3.nabla_xi_phi", RANK4L3_FORMULAS["rank4l3.nabla_xi_phi"], r, tol))
    if curvature:
        out.extend(curvature_suite_rank4l3(M, p, dec, tol))
    return out


def curvature_suite_rank4l3(M: ManifoldModel, p, dec: FrameDecomposition, tol: float = 1e-7) -> list:
    c = dec.c
    if c == 0.0:
        return [not_applicable(k, v, "c = 0") for k, v in CURVATURE_FORMULAS.items()]
    L = local(M, p)
    xi = L.xi
    R = L.curvature_apply
    El, Em = dec.E4l.T, dec.E4m.T
    F = CURVATURE_FORMULAS
    out = []

    def add(key, vals, note_empty):
        if vals is None:
            out.append(not_applicable(key, F[key], note_empty))
        else:
            out.append(check(key, F[key], max(vals, default=0.0), tol, "absolute"))

    add("curvature.R_E4m_xi",
        [_max(R(X, Y, xi[a])) for X in Em for Y in Em for a in range(3)] if len(Em) else None, "m = 0")
    add("curvature.R_E4m_xi_xi",
        [_max(R(X, xi[b], xi[a])) for X in Em for a in range(3) for b in range(3)] if len(Em) else None, "m = 0")
    add("curvature.R_E4l_xi_xi",
        [_max(R(X, xi[a], xi[a]) - 0.25 * c * c * X) for X in El for a in range(3)] if len(El) else None, "l = 0")
    add("curvature.R_E4l_xi_mixed",
        [_max(R(X, xi[b], xi[a])) for X in El for a in range(3) for b in range(3) if a != b] if len(El) else None,
        "l = 0")
    add("curvature.K_xi_E4m", [abs(L.sectional(xi[a], X)) for X in Em for a in range(3)] if len(Em) else None, "m = 0")
    add("curvature.K_xi_E4l",
        [abs(L.sectional(xi[a], X) - 0.25 * c * c) for X in El for a in range(3)] if len(El) else None, "l = 0")
    add("curvature.K_xi_xi",
        [abs(R(xi[a], xi[b], xi[b]) @ L.g @ xi[a] - 0.25 * c * c) for a in range(3) for b in range(3) if a != b],
        "")
    return out


# -- deformed metric -------------------------------------------------------------


def gbar_matrix(M: ManifoldModel, dec: FrameDecomposition) -> np.ndarray:
    """Components of gbar: -d eta_1(X, phi_1 Y) on E4l, g elsewhere."""
    L = local(M, dec.point)
    Pl = dec.P_l
    Pr = np.eye(M.dim) - Pl
    B = -L.deta[0] @ L.phi[0]
    return Pl.T @ B @ Pl + Pr.T @ L.g @ Pr


def gbar(M: ManifoldModel, dec: FrameDecomposition, X, Y) -> float:
    return float(np.asarray(X, float) @ gbar_matrix(M, dec) @ np.asarray(Y, float))


def _gbar_at(M, q, c):
    return gbar_matrix(M, split_tangent(M, q, c))


def _gbar_christoffel(M, p, c, h, richardson: bool):
    d = M.dim

    def dgbar(step):
        out = np.zeros((d, d, d))
        for m in range(d):
            e = np.zeros(d)
            e[m] = step
            out[:, :, m] = (_gbar_at(M, p + e, c) - _gbar_at(M, p - e, c)) / (2 * step)
        return out

    dg = dgbar(h)
    if richardson:
        dg = (4.0 * dgbar(h / 2) - dg) / 3.0
    gb = _gbar_at(M, p, c)
    low = 0.5 * (np.einsum("jli->lij", dg) + np.einsum("ilj->lij", dg) - np.einsum("ijl->lij", dg))
    return np.einsum("kl,lij->kij", np.linalg.inv(gb), low)


def gbar_connection_check(M: ManifoldModel, p, dec: FrameDecomposition, h: float = 1e-4,
                          tol: float = 1e-7) -> list:
    """Levi-Civita connection of gbar by central differences: nabla-bar_X xi_a = -psi_a X on H."""
    p = np.asarray(p, float)
    L = local(M, p)
    psi = _psi_all(M, dec)
    H = dec.H
    lim = max(tol, FD_FLOOR)
    ident = "connections.gbar_nabla_xi"
    formula = "nabla-bar_X xi_a = -psi_a X for horizontal X (gbar connection by finite differences)"
    out = []
    Pl = dec.P_l
    r0 = _max(Pl.T @ (gbar_matrix(M, dec) - (-L.deta[0] @ L.phi[0])) @ Pl)
    out.append(check("connections.gbar_on_E4l", "gbar = -d eta_a(., phi_a .) on E4l", r0, tol, "absolute"))
    Pm_other = np.eye(M.dim) - Pl
    r1 = _max(Pm_other.T @ (gbar_matrix(M, dec) - L.g) @ Pm_other)
    out.append(check("connections.gbar_elsewhere", "gbar = g off E4l", r1, tol, "absolute"))

    def residual(step, richardson):
        G = _gbar_christoffel(M, p, dec.c, step, richardson)
        worst = 0.0
        for a in range(3):
            nab = L.xi_jet[a].grad + np.einsum("kij,j->ki", G, L.xi[a])  # [k, i]
            worst = max(worst, _max((nab + psi[a]) @ H))
        return worst

    r_h = residual(h, False)
    r_h2 = residual(h / 2, False)
    if abs(r_h - r_h2) > 0.5 * max(r_h, lim):
        raise FDUnstable(f"gbar residual moved from {r_h:.3e} to {r_h2:.3e} when halving the step")
    r = residual(h, True)
    out.append(check(ident, formula, r, lim, "absolute", note=f"h={h:g}, Richardson-extrapolated"))
    return out


# -- Bott connection -------------------------------------------------------------


def bott_derivative(M: ManifoldModel, p, idx: int, Z, tol: float = 1e-7) -> np.ndarray:
    """nabla^B_{xi_idx} Z = [xi_idx, Z]_H for a horizontal field Z (Expr components or FieldJet)."""
    L = local(M, p)
    Zj = Z if isinstance(Z, FieldJet) else L.field(Z)
    vert = _max(L.eta @ Zj.val)
    if vert > tol * max(1.0, _max(Zj.val)):
        raise NotHorizontal(f"eta(Z) = {vert:.3e} at {np.asarray(p).tolist()}")
    br = bracket_jet(L.xi_jet[idx - 1], Zj).val
    return br - L.xi.T @ (L.eta @ br)


def bott_preservation_check(M: ManifoldModel, p, dec: FrameDecomposition, tol: float = 1e-7) -> list:
    L = local(M, p)
    c = dec.c
    psi = _psi_all(M, dec)
    theta = L.phi - psi
    e4l = _block_jets(M, p, "E4l")
    e4m = _block_jets(M, p, "E4m")
    out = []
    if e4l is None and e4m is None:
        return [not_applicable("connections.bott_preserves_blocks", "Bott connection preserves E4l and E4m",
                               "model has no closed-form block fields")]
    r = 0.0
    for a in range(3):
        for blk, other in ((e4l, dec.P_m), (e4m, dec.P_l)):
            if blk is None:
                continue
            for i in range(blk.val.shape[0]):
                bd = bott_derivative(M, p, a + 1, blk[i])
                r = max(r, _max(other @ bd) / max(1.0, _max(blk.val[i])))
    out.append(check("connections.bott_preserves_blocks", "Bott connection along xi_a preserves E4l and E4m", r, tol))

    if e4l is None:
        out.append(not_applicable("connections.bott_psi", "(nabla^B_{xi_a} psi_b) X = c psi_c X on E4l", "l = 0"))
    else:
        r = 0.0
        for a, b, g_ in CYCLIC:
            phi_b = L.phi_jet[b]
            for i in range(e4l.val.shape[0]):
                X = e4l[i]
                psiX = fj_einsum("kj,j->k", phi_b, X)  # psi_b = phi_b on E4l
                lhs = bott_derivative(M, p, a + 1, psiX) - psi[b] @ bott_derivative(M, p, a + 1, X)
                r = max(r, _max(lhs - c * psi[g_] @ X.val) / max(1.0, _max(X.val)))
        out.append(check("connections.bott_psi", "(nabla^B_{xi_a} psi_b) X = c psi_c X on E4l", r, tol))

    if e4m is None:
        out.append(not_applicable("connections.lie_theta", "(L_{xi_a} theta_b) Y = 0 on E4m", "m = 0"))
    else:
        r = 0.0
        for a in range(3):
            for b in range(3):
                phi_b = L.phi_jet[b]
                for i in range(e4m.val.shape[0]):
                    Y = e4m[i]
                    thY = fj_einsum("kj,j->k", phi_b, Y)  # theta_b = phi_b on E4m
                    lhs = bracket_jet(L.xi_jet[a], thY).val - theta[b] @ bracket_jet(L.xi_jet[a], Y).val
                    r = max(r, _max(lhs) / max(1.0, _max(Y.val)))
        out.append(check("connections.lie_theta", "(L_{xi_a} theta_b) Y = 0 on E4m", r, tol))
    return out


# -- adapted connection ----------------------------------------------------------


def adapted_christoffel(M: ManifoldModel, p) -> np.ndarray:
    """gt[k, i, j] = (nabla~_{d_i} d_j)^k.

    nabla~_X Y_H = (nabla_{X_H} Y_H)_H + sum_a eta_a(X) [xi_a, Y_H]_H and nabla~ xi_a = 0.
    """
    L = local(M, p)
    d = M.dim
    xi, eta = L.xi, L.eta
    P_H = np.eye(d) - xi.T @ eta  # X -> X - sum eta_a(X) xi_a
    ident = np.eye(d)
    # Y_H fields for coordinate Y = d_j: YH[j, k] = delta_jk - sum_a eta_a[j] xi_a[k]
    eye_j = FieldJet(ident, np.zeros((d, d, d)), np.zeros((d, d, d, d)))
    YH = eye_j - fj_einsum("aj,ak->jk", L.eta_jet, L.xi_jet)
    out = np.zeros((d, d, d))
    for j in range(d):
        Yj = YH[j]
        nab = L.nabla_vector(Yj)  # [k, i]
        term = P_H @ nab @ P_H  # (nabla_{X_H} Y_H)_H with X = d_i, X_H = P_H d_i
        for a in range(3):
            br = bracket_jet(L.xi_jet[a], Yj).val
            term = term + np.outer(P_H @ br, eta[a])
        term = term + np.einsum("ai,ak->ki", L.eta_jet.grad[:, j, :], xi)  # d_i eta_a(d_j) xi_a
        out[:, :, j] = term
    return out


def adapted_connection(M: ManifoldModel, p, X, Y) -> np.ndarray:
    """nabla~_X Y for a vector X at p and a field Y (Expr components)."""
    L = local(M, p)
    Yj = L.field(Y)
    G = adapted_christoffel(M, p)
    X = np.asarray(X, float)
    return Yj.grad @ X + np.einsum("kij,i,j->k", G, X, Yj.val)


def adapted_connection_check(M: ManifoldModel, p, dec: FrameDecomposition, tol: float = 1e-7) -> list:
    L = local(M, p)
    G = adapted_christoffel(M, p)
    c = dec.c
    psi = _psi_all(M, dec)
    P_H = dec.P_H
    out = []
    r = 0.0
    for a in range(3):
        nab = L.xi_jet[a].grad + np.einsum("kij,j->ki", G, L.xi[a])
        r = max(r, rel_residual(nab))
    out.append(check("connections.adapted_xi", "nabla~ xi_a = 0", r, tol))
    r = 0.0
    for a in range(3):
        nab = L.eta_jet[a].grad.T - np.einsum("kij,k->ij", G, L.eta[a])
        r = max(r, rel_residual(nab))
    out.append(check("connections.adapted_eta", "nabla~ eta_a = 0", r, tol))
    dg = L.g_jet.grad
    nab_g = np.einsum("jki->ijk", dg) - np.einsum("lij,lk->ijk", G, L.g) - np.einsum("lik,jl->ijk", G, L.g)
    out.append(check("connections.adapted_metric", "nabla~ g = 0", rel_residual(nab_g), tol))
    torsion = G - np.swapaxes(G, 1, 2)  # [k, i, j]
    expected = 2.0 * np.einsum("aij,ak->kij", L.deta, L.xi)
    out.append(check("connections.adapted_torsion", "T~(X, Y) = 2 sum_a d eta_a(X, Y) xi_a",
                     rel_residual(torsion, expected), tol))
    r = 0.0
    for a, b, g_ in CYCLIC:
        dphi = L.phi_jet[a].grad  # [k, j, i]
        nab = (np.einsum("kji->ikj", dphi) + np.einsum("kil,lj->ikj", G, L.phi[a])
               - np.einsum("lij,kl->ikj", G, L.phi[a]))
        rhs = -c * (np.einsum("i,kj->ikj", L.eta[b], psi[g_] @ P_H) - np.einsum("i,kj->ikj", L.eta[g_], psi[b] @ P_H))
        r = max(r, rel_residual(nab, rhs))
    out.append(check("connections.adapted_phi", "(nabla~_X phi_a) Y = -c(eta_b(X) psi_c Y_H - eta_c(X) psi_b Y_H)",
                     r, tol))
    return out


# -- musical isomorphisms --------------------------------------------------------


def _pairing(form_block: np.ndarray) -> np.ndarray:
    cond = np.linalg.cond(form_block)
    if not np.isfinite(cond) or cond > COND_MAX:
        raise SingularPairing(f"restricted 2-form has condition number {cond:.3e}")
    return np.linalg.inv(form_block.T)


def musical_phi_check(M: ManifoldModel, p, dec: FrameDecomposition, tol: float = 1e-7) -> list:
    """phi_a = -(w_b)^sharp (w_c)^flat on a block, for w = d eta (E4l) or Phi (E4m)."""
    L = local(M, p)
    out = []
    for key, B, forms_, need in (
        ("connections.musical_E4l", dec.E4l, L.deta, "l = 0"),
        ("connections.musical_E4m", dec.E4m, L.Phi, "m = 0"),
    ):
        name = "d eta" if key.endswith("E4l") else "Phi"
        formula = f"phi_a X = -({name}_b)^sharp ({name}_c)^flat X on {key[-4:]}"
        if B.shape[1] == 0:
            out.append(not_applicable(key, formula, need))
            continue
        r = 0.0
        for a, b, g_ in CYCLIC:
            Wb = B.T @ forms_[b] @ B
            Wc = B.T @ forms_[g_] @ B
            F = B.T @ L.g @ L.phi[a] @ B  # phi_a in the orthonormal block basis
            r = max(r, _max(F + _pairing(Wb) @ Wc.T))
        out.append(check(key, formula, r, tol, "absolute"))
    return out


# -- contact-symplectic pairs ----------------------------------------------------


@dataclass(frozen=True)
class PairCheck:
    beta: int
    gamma: int
    h: int
    k: int
    volume: float
    deta_power: float
    theta_power: float

    def passed(self, vol_tol: float = VOLUME_TOL, wedge_tol: float = WEDGE_TOL) -> bool:
        return abs(self.volume) > vol_tol and self.deta_power <= wedge_tol and self.theta_power <= wedge_tol


def contact_symplectic_pairs(M: ManifoldModel, p, dec: FrameDecomposition) -> list:
    """The nine (eta_b, Theta_c) pairs with Theta_c = Phi_c restricted to E4m."""
    L = local(M, p)
    d = M.dim
    h, k = 2 * dec.l + 1, 2 * dec.m
    frame = orthonormal_frame(L.g)
    out = []
    for b in range(3):
        eta = forms.Form.from_dense(L.eta[b])
        deta = forms.Form.from_dense(L.deta[b])
        deta_h = forms.wedge_power(deta, h)
        deta_h1 = forms.wedge(deta_h, deta)
        for g_ in range(3):
            theta = forms.Form.from_dense(dec.P_m.T @ L.Phi[g_] @ dec.P_m)
            theta_k = forms.wedge_power(theta, k)
            theta_k1 = forms.wedge(theta_k, theta)
            top = forms.wedge(forms.wedge(eta, deta_h), theta_k)
            vol = forms.evaluate_on_frame(top, frame) if top.degree == d else 0.0
            out.append(PairCheck(b + 1, g_ + 1, h, k, vol, deta_h1.max_abs(), theta_k1.max_abs()))
    return out


def pairs_report(M: ManifoldModel, p, dec: FrameDecomposition) -> list:
    formula = "eta_b ^ (d eta_b)^h ^ Theta_c^k volume, (d eta_b)^(h+1) = 0, Theta_c^(k+1) = 0"
    if dec.c == 0.0:
        return [not_applicable("pairs.contact_symplectic", formula, "c = 0")]
    out = []
    for pc in contact_symplectic_pairs(M, p, dec):
        ident = f"pairs.contact_symplectic[{pc.beta}{pc.gamma}]"
        # encoded as a shortfall below the volume threshold so that pass <=> residual <= 0
        out.append(check(ident + ".volume", "|eta_b ^ (d eta_b)^h ^ Theta_c^k| on a g-orthonormal frame > 1e-6",
                         max(0.0, VOLUME_TOL - abs(pc.volume)), 0.0, "absolute",
                         note=f"volume={pc.volume:.6e}, type ({pc.h},{pc.k})"))
        out.append(check(ident + ".deta_power", "(d eta_b)^(h+1) = 0", pc.deta_power, WEDGE_TOL, "absolute"))
        out.append(check(ident + ".theta_power", "Theta_c^(k+1) = 0", pc.theta_power, WEDGE_TOL, "absolute"))
    return out


# -- Ricci -----------------------------------------------------------------------


def ricci_split_check(M: ManifoldModel, p, dec: FrameDecomposition, tag=None, tol: float = 1e-7) -> list:
    L = local(M, p)
    c, l = dec.c, dec.l
    kappa = 0.5 * c * c * (2 * l + 1)
    Ric = L.ricci
    out = []
    if c == 0.0:
        out.append(check("ricci.flat", "Ric = 0", rel_residual(Ric), tol))
        out.append(check("ricci.scalar", "scal = 0", abs(L.scalar_curvature), tol))
        return out
    B = dec.rank_block
    out.append(check("ricci.rank_block", "Ric = (c^2/2)(2l+1) g on E^{4l+3}",
                     _max(B.T @ Ric @ B - kappa * np.eye(B.shape[1])), tol, "absolute"))
    if dec.E4m.shape[1]:
        allB = np.hstack([dec.V, dec.E4l, dec.E4m])
        out.append(check("ricci.E4m", "Ric(X, .) = 0 for X in E4m", _max(dec.E4m.T @ Ric @ allB), tol, "absolute"))
    else:
        out.append(not_applicable("ricci.E4m", "Ric(X, .) = 0 for X in E4m", "m = 0"))
    scal = kappa * (4 * l + 3)
    out.append(check("ricci.scalar", "scal = (c^2/2)(2l+1)(4l+3)", abs(L.scalar_curvature - scal) / max(1.0, scal),
                     tol))
    if l == 0:
        out.append(check("ricci.eta_einstein", "Ric = (c^2/2) sum_a eta_a (x) eta_a",
                         rel_residual(Ric, 0.5 * c * c * np.einsum("ai,aj->ij", L.eta, L.eta)), tol))
    else:
        out.append(not_applicable("ricci.eta_einstein", "Ric = (c^2/2) sum_a eta_a (x) eta_a", "rank > 3"))
    if tag is StructureTag.THREE_ALPHA_SASAKIAN:
        alpha = c / 2
        n = (M.dim - 3) // 4
        out.append(check("ricci.einstein", "Ric = 2 alpha^2 (2n+1) g",
                         rel_residual(Ric, 2 * alpha * alpha * (2 * n + 1) * L.g), tol))
    else:
        out.append(not_applicable("ricci.einstein", "Ric = 2 alpha^2 (2n+1) g", "not of maximal rank"))
    return out


def ricci_type(M: ManifoldModel, points, tol: float = 1e-6) -> str:
    """'Ricci-flat', 'Einstein' or 'eta-Einstein' from the spectrum of g^{-1} Ric."""
    kinds = set()
    for p in points:
        L = local(M, p)
        ev = np.sort(np.linalg.eigvals(np.linalg.solve(L.g, L.ricci)).real)
        if np.max(np.abs(ev)) <= tol:
            kinds.add("Ricci-flat")
        elif ev[-1] - ev[0] <= tol:
            kinds.add("Einstein")
        else:
            # Ric = a g + b sum eta_a (x) eta_a: fit a, b by least squares
            A = np.stack([L.g.ravel(), np.einsum("ai,aj->ij", L.eta, L.eta).ravel()], axis=1)
            coef, *_ = np.linalg.lstsq(A, L.ricci.ravel(), rcond=None)
            fit = _max(A @ coef - L.ricci.ravel())
            kinds.add("eta-Einstein" if fit <= tol else "other")
    if len(kinds) != 1:
        return "mixed"
    return kinds.pop()


def decomposition_records(M: ManifoldModel, dec: FrameDecomposition) -> list:
    res = validate_decomposition(M, dec)
    return [
        check("foliation.blocks_orthonormal", "V, E4l, E4m g-orthonormal and mutually orthogonal",
              res["orthonormal"], ORTHO_TOL, "absolute"),
        check("foliation.blocks_phi_invariant", "phi_a(E4l) = E4l, phi_a(E4m) = E4m",
              max(res["phi_invariant_E4l"], res["phi_invariant_E4m"]), INVARIANCE_TOL, "absolute"),
        check("foliation.kernel_all_alpha", "i_X d eta_a = 0 for X in E4m and every a",
              res["kernel_all_alpha"], INVARIANCE_TOL, "absolute"),
    ]


def coordinate_triples(d: int):
    return itertools.product(range(d), repeat=3)

"""Structure-level checks and classification of almost contact metric 3-structures."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ClassificationContradiction,
    InconsistentC,
    RankUnstable,
    StructureViolation,
)
from .geometry import CYCLIC, ManifoldModel, bracket_jet, local

TAU_RANK = 1e-7
C_TOL = 1e-8
ZERO_C = 1e-8


def rel_residual(lhs, rhs=0.0) -> float:
    """max|lhs - rhs| scaled by the operand sizes (floor 1)."""
    lhs = np.asarray(lhs, float)
    rhs = np.asarray(rhs, float)
    diff = float(np.max(np.abs(lhs - rhs))) if lhs.size or rhs.size else 0.0
    scale = max(1.0, float(np.max(np.abs(lhs))) if lhs.size else 0.0,
                float(np.max(np.abs(rhs))) if rhs.size else 0.0)
    return diff / scale


@dataclass
class ResidualRecord:
    """Named residuals of one check at one point."""

    check: str
    residuals: dict = field(default_factory=dict)
    tol: float = 1e-8

    @property
    def max(self) -> float:
        return max(self.residuals.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max <= self.tol

    def merge(self, other: "ResidualRecord", prefix: str = "") -> None:
        for k, v in other.residuals.items():
            self.residuals[prefix + k] = v


class StructureTag(enum.Enum):
    THREE_COSYMPLECTIC = "3-cosymplectic"
    THREE_ALPHA_SASAKIAN = "3-alpha-Sasakian"
    THREE_QUASI_SASAKIAN = "3-quasi-Sasakian"


@dataclass(frozen=True)
class StructureClass:
    tag: StructureTag
    rank: int
    c: float
    alpha: float | None = None

    def __post_init__(self):
        if self.rank % 2 != 1:
            raise ValueError("rank must be odd")
        if self.tag is StructureTag.THREE_COSYMPLECTIC and (self.c != 0.0 or self.rank % 4 != 1):
            raise ValueError("3-cosymplectic requires c = 0 and rank 4l+1")

    def describe(self) -> str:
        if self.tag is StructureTag.THREE_ALPHA_SASAKIAN:
            return f"3-alpha-Sasakian (alpha={self.alpha:.12g})"
        return self.tag.value


# -- checks ----------------------------------------------------------------------


def check_almost_contact_metric(M: ManifoldModel, p, idx: int, tol: float = 1e-8) -> ResidualRecord:
    L = local(M, p)
    a = idx - 1
    phi, xi, eta, g = L.phi[a], L.xi[a], L.eta[a], L.g
    d = M.dim
    rec = ResidualRecord(f"almost_contact[{idx}]", tol=tol)
    rec.residuals["phi_squared"] = rel_residual(phi @ phi, -np.eye(d) + np.outer(xi, eta))
    rec.residuals["eta_xi"] = abs(float(eta @ xi) - 1.0)
    rec.residuals["phi_xi"] = rel_residual(phi @ xi)
    rec.residuals["eta_phi"] = rel_residual(eta @ phi)
    rec.residuals["compatible_metric"] = rel_residual(phi.T @ g @ phi, g - np.outer(eta, eta))
    rec.residuals["eta_is_g_xi"] = rel_residual(eta, g @ xi)
    return rec


def check_three_structure(M: ManifoldModel, p, tol: float = 1e-8) -> ResidualRecord:
    L = local(M, p)
    phi, xi, eta = L.phi, L.xi, L.eta
    rec = ResidualRecord("three_structure", tol=tol)
    for a, b, c in CYCLIC:
        tag = f"({a + 1}{b + 1}{c + 1})"
        rec.residuals["phi_ab" + tag] = rel_residual(phi[c], phi[a] @ phi[b] - np.outer(xi[a], eta[b]))
        rec.residuals["phi_ba" + tag] = rel_residual(phi[c], -phi[b] @ phi[a] + np.outer(xi[b], eta[a]))
        rec.residuals["xi_ab" + tag] = rel_residual(xi[c], phi[a] @ xi[b])
        rec.residuals["xi_ba" + tag] = rel_residual(xi[c], -phi[b] @ xi[a])
        rec.residuals["eta_ab" + tag] = rel_residual(eta[c], eta[a] @ phi[b])
        rec.residuals["eta_ba" + tag] = rel_residual(eta[c], -eta[b] @ phi[a])
    gram = np.einsum("ai,ij,bj->ab", xi, L.g, xi)
    rec.residuals["xi_orthonormal"] = rel_residual(gram, np.eye(3))
    return rec


def quasi_sasakian_formula_residual(M: ManifoldModel, p, idx: int) -> float:
    """(nabla_X phi)Y + g(nabla_X xi, phi Y) xi + eta(Y) phi nabla_X xi over coordinate X, Y."""
    L = local(M, p)
    a = idx - 1
    nphi = L.nabla_phi[a]  # [x, k, y]
    nxi = L.nabla_xi[a]  # [k, x]
    phi, xi, eta, g = L.phi[a], L.xi[a], L.eta[a], L.g
    m1 = np.einsum("kx,kl,ly->xy", nxi, g, phi)
    m2 = phi @ nxi  # [k, x]
    total = nphi + np.einsum("k,xy->xky", xi, m1) + np.einsum("y,kx->xky", eta, m2)
    return rel_residual(total) if total.size else 0.0


def check_quasi_sasakian(M: ManifoldModel, p, idx: int, tol: float = 1e-8) -> ResidualRecord:
    L = local(M, p)
    N1, _ = L.nijenhuis(idx - 1)
    rec = ResidualRecord(f"quasi_sasakian[{idx}]", tol=tol)
    rec.residuals["normal_N1"] = rel_residual(N1)
    rec.residuals["closed_Phi"] = rel_residual(L.dPhi[idx - 1])
    rec.residuals["nabla_phi_formula"] = quasi_sasakian_formula_residual(M, p, idx)
    return rec


def structure_record(M: ManifoldModel, p, tol: float = 1e-8) -> ResidualRecord:
    """All structure identities of a 3-quasi-Sasakian model at one point."""
    rec = ResidualRecord("structure", tol=tol)
    for idx in (1, 2, 3):
        rec.merge(check_almost_contact_metric(M, p, idx), f"ac{idx}.")
        rec.merge(check_quasi_sasakian(M, p, idx), f"qs{idx}.")
    rec.merge(check_three_structure(M, p), "3s.")
    return rec


# -- invariants ------------------------------------------------------------------


def _rank(matrix: np.ndarray, tau: float = TAU_RANK, floor: float = 0.0) -> int:
    s = np.linalg.svd(matrix, compute_uv=False)
    scale = max(float(s[0]) if s.size else 0.0, floor)
    if scale == 0.0:
        return 0
    rel = s / scale
    ambiguous = (rel >= tau / 10) & (rel <= 10 * tau)
    if np.any(ambiguous):
        raise RankUnstable(f"singular values {rel[ambiguous].tolist()} inside the guard band")
    return int(np.sum(rel > tau))


def cartan_class(M: ManifoldModel, p, idx: int, tau: float = TAU_RANK) -> int:
    """Codimension of {X : eta(X) = 0, i_X d eta = 0}."""
    L = local(M, p)
    a = idx - 1
    stacked = np.vstack([L.eta[a][None, :], 2.0 * L.deta[a]])
    return _rank(stacked, tau)


def reeb_brackets(M: ManifoldModel, p) -> list:
    """[xi_a, xi_b] for the cyclic pairs (value arrays)."""
    L = local(M, p)
    return [bracket_jet(L.xi_jet[a], L.xi_jet[b]).val for a, b, _ in CYCLIC]


def detect_c(M: ManifoldModel, points, tol: float = C_TOL) -> float:
    """Structure constant in [xi_a, xi_b] = c xi_c, checked across pairs and points."""
    pts = [points] if np.ndim(points) == 1 else list(points)
    values = []
    for p in pts:
        L = local(M, p)
        for (a, b, c), br in zip(CYCLIC, reeb_brackets(M, p)):
            cval = float(br @ L.g @ L.xi[c])
            off = rel_residual(br, cval * L.xi[c])
            if off > tol:
                raise InconsistentC(f"[xi{a + 1}, xi{b + 1}] is not a multiple of xi{c + 1} (residual {off:.3e})")
            values.append(cval)
    spread = max(values) - min(values)
    if spread > tol:
        raise InconsistentC(f"c varies by {spread:.3e} across pairs/points")
    c = float(np.mean(values))
    return 0.0 if abs(c) <= ZERO_C else c


def classify(M: ManifoldModel, points, tol: float = 1e-7) -> StructureClass:
    pts = [points] if np.ndim(points) == 1 else list(points)
    for p in pts:
        rec = structure_record(M, p, tol)
        if not rec.passed:
            worst = max(rec.residuals, key=rec.residuals.get)
            raise StructureViolation(f"{M.name}: {worst} residual {rec.residuals[worst]:.3e} at {np.asarray(p).tolist()}")
    ranks = set()
    for p in pts:
        per_alpha = {cartan_class(M, p, idx) for idx in (1, 2, 3)}
        if len(per_alpha) > 1:
            raise ClassificationContradiction(f"eta_1, eta_2, eta_3 have different ranks {sorted(per_alpha)}")
        ranks |= per_alpha
    if len(ranks) > 1:
        raise RankUnstable(f"rank is not constant across points: {sorted(ranks)}")
    rank = ranks.pop()
    c = detect_c(M, pts)
    if c == 0.0:
        if rank % 4 != 1:
            raise ClassificationContradiction(f"c = 0 but rank {rank} is not 4l+1")
        worst = max(float(np.max(np.abs(local(M, p).deta))) for p in pts)
        if worst > 1e-8:
            raise ClassificationContradiction(f"c = 0 but |d eta| = {worst:.3e}: not 3-cosymplectic")
        return StructureClass(StructureTag.THREE_COSYMPLECTIC, rank, 0.0)
    if rank % 4 != 3:
        raise ClassificationContradiction(f"c = {c} != 0 but rank {rank} is not 4l+3")
    if rank == M.dim:
        for p in pts:
            L = local(M, p)
            res = rel_residual(L.deta, 0.5 * c * L.Phi)
            if res > tol:
                raise ClassificationContradiction(f"maximal rank but d eta != (c/2) Phi (residual {res:.3e})")
        return StructureClass(StructureTag.THREE_ALPHA_SASAKIAN, rank, c, c / 2.0)
    return StructureClass(StructureTag.THREE_QUASI_SASAKIAN, rank, c)

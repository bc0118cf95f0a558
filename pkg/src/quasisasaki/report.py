"""Per-identity residual records and their deterministic aggregation."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

PASS, FAIL, NA, UNSTABLE = "pass", "fail", "n/a", "unstable"


@dataclass(frozen=True)
class IdentityReport:
    """Residual of one identity.

    ``formula`` is the checked statement in plain notation; ``scaling`` says
    whether the residual is absolute (unit frame vectors) or relative
    (scaled by operand sizes, floor 1).
    """

    identity: str
    formula: str
    residual: float
    tol: float
    points: int = 1
    status: str = PASS
    scaling: str = "relative"
    note: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["residual"] = _json_float(self.residual)
        return d


def _json_float(x):
    if x is None:
        return None
    if math.isnan(x) or math.isinf(x):
        return str(x)
    return float(f"{x:.6e}")


def check(identity: str, formula: str, residual: float, tol: float, scaling: str = "relative",
          note: str = "") -> IdentityReport:
    residual = float(residual)
    ok = math.isfinite(residual) and residual <= tol
    return IdentityReport(identity, formula, residual, tol, 1, PASS if ok else FAIL, scaling, note)


def not_applicable(identity: str, formula: str, note: str, tol: float = 0.0) -> IdentityReport:
    return IdentityReport(identity, formula, 0.0, tol, 1, NA, "none", note)


def failure(identity: str, formula: str, note: str, tol: float = 0.0, unstable: bool = False) -> IdentityReport:
    return IdentityReport(identity, formula, math.inf, tol, 1, UNSTABLE if unstable else FAIL, "none", note)


def fold(records) -> list:
    """Merge per-point records by identity id (first-seen order kept)."""
    merged: dict = {}
    for rec in records:
        prev = merged.get(rec.identity)
        if prev is None:
            merged[rec.identity] = rec
            continue
        merged[rec.identity] = IdentityReport(
            rec.identity,
            prev.formula,
            max(prev.residual, rec.residual),
            max(prev.tol, rec.tol),
            prev.points + rec.points,
            _combine(prev.status, rec.status),
            prev.scaling if prev.status != NA else rec.scaling,
            prev.note or rec.note,
        )
    return list(merged.values())


_RANK = {NA: 0, PASS: 1, UNSTABLE: 2, FAIL: 3}


def _combine(a: str, b: str) -> str:
    if NA in (a, b) and a != b:
        other = b if a == NA else a
        return other
    return a if _RANK[a] >= _RANK[b] else b


def passed(records) -> bool:
    return all(r.status in (PASS, NA) for r in records)

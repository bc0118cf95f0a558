"""Command-line verifier: ``verify``, ``models`` and ``describe``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass

import numpy as np

from . import foliation as fol
from . import zoo
from .contact import StructureTag, classify, structure_record
from .errors import FDUnstable, GeometryError, RankUnstable
from .exprjet import sample_points
from .geometry import curvature_symmetry_residuals, local, covariant_phi_residual
from .report import NA, check, failure, fold, not_applicable

SUITES = ("structure", "core_identities", "rank4l3", "connections", "curvature", "ricci", "pairs", "cone")


@dataclass(frozen=True)
class SuiteConfig:
    model: str = "s3xr4"
    n: int | None = None
    l: int | None = None
    m: int | None = None
    r: float | None = None
    alpha: float | None = None
    model_file: str | None = None
    points: int = 16
    seed: int = 42
    tol: float = 1e-7
    fd_step: float = 1e-4
    suites: tuple = SUITES

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.points < 1:
            raise ValueError("points must be at least 1")
        if not self.fd_step > 0:
            raise ValueError("fd-step must be positive")
        unknown = [s for s in self.suites if s not in SUITES]
        if unknown:
            raise ValueError(f"unknown suites: {', '.join(unknown)}")


def load(cfg: SuiteConfig):
    if cfg.model_file:
        return zoo.load_model(cfg.model_file)
    params = {k: getattr(cfg, k) for k in ("n", "l", "m", "r", "alpha")}
    return zoo.build(cfg.model, **params)


class _Context:
    """Per-run state shared by the suites: model, points, classification, decompositions."""

    def __init__(self, M, cfg: SuiteConfig):
        self.M = M
        self.cfg = cfg
        self.points = sample_points(M.dom, cfg.points, cfg.seed)
        self.cls = None
        self.cls_error = None
        try:
            self.cls = classify(M, self.points, cfg.tol)
        except GeometryError as err:
            self.cls_error = err
        if self.cls is not None:
            self.c = self.cls.c
        else:
            self.c = float(M.declared_c) if M.declared_c is not None else 0.0
        self._decs: dict = {}

    def dec(self, i: int):
        if i not in self._decs:
            self._decs[i] = fol.split_tangent(self.M, self.points[i], self.c)
        return self._decs[i]


def _hypotheses(ctx: _Context, suite: str, i: int):
    rec = structure_record(ctx.M, ctx.points[i], ctx.cfg.tol)
    return check(f"{suite}.hypotheses", "structure identities hold at the sampled point", rec.max, ctx.cfg.tol)


def _suite_structure(ctx: _Context, i: int) -> list:
    M, p, tol = ctx.M, ctx.points[i], ctx.cfg.tol
    rec = structure_record(M, p, tol)
    out = [check(f"structure.{k}", k, v, tol) for k, v in rec.residuals.items()]
    out.append(check("structure.covariant_phi_formula",
                     "2 g((nabla_X phi)Y, Z) from dPhi, N1, N2, eta, d eta", covariant_phi_residual(M, p), tol))
    L = local(M, p)
    r = 0.0
    for a in range(3):
        nxi = L.nabla_xi[a]
        norm2 = float(np.einsum("ki,lj,kl,ij->", nxi, nxi, L.g, L.ginv))
        r = max(r, abs(float(L.xi[a] @ L.ricci @ L.xi[a]) - norm2) / max(1.0, norm2))
    out.append(check("structure.reeb_ricci", "Ric(xi_a, xi_a) = |nabla xi_a|^2", r, tol))
    if ctx.cls is None:
        out.append(failure("structure.classification", "consistent rank, c and class",
                           f"{type(ctx.cls_error).__name__}: {ctx.cls_error}",
                           unstable=isinstance(ctx.cls_error, RankUnstable)))
    else:
        out.append(check("structure.classification", "consistent rank, c and class", 0.0, tol, "none",
                         note=f"{ctx.cls.describe()}, rank {ctx.cls.rank}, c {ctx.cls.c:.12g}"))
    out.extend(fol.decomposition_records(M, ctx.dec(i)))
    return out


def _suite_core(ctx, i):
    dec = ctx.dec(i)
    return fol.identity_suite_core(ctx.M, ctx.points[i], dec, ctx.cfg.tol) + fol.foliation_invariants(
        ctx.M, ctx.points[i], dec, min(ctx.cfg.tol, 1e-8)
    )


def _suite_rank4l3(ctx, i):
    return fol.identity_suite_rank4l3(ctx.M, ctx.points[i], ctx.dec(i), ctx.cfg.tol, curvature=False)


def _suite_connections(ctx, i):
    M, p, dec, tol = ctx.M, ctx.points[i], ctx.dec(i), ctx.cfg.tol
    return (
        fol.gbar_connection_check(M, p, dec, ctx.cfg.fd_step, tol)
        + fol.bott_preservation_check(M, p, dec, tol)
        + fol.adapted_connection_check(M, p, dec, tol)
        + fol.musical_phi_check(M, p, dec, tol)
    )


def _suite_curvature(ctx, i):
    L = local(ctx.M, ctx.points[i])
    out = [check(f"curvature.{k}", k, v, ctx.cfg.tol) for k, v in curvature_symmetry_residuals(L).items()]
    return out + fol.curvature_suite_rank4l3(ctx.M, ctx.points[i], ctx.dec(i), ctx.cfg.tol)


def _suite_ricci(ctx, i):
    tag = ctx.cls.tag if ctx.cls is not None else None
    return fol.ricci_split_check(ctx.M, ctx.points[i], ctx.dec(i), tag, ctx.cfg.tol)


def _suite_pairs(ctx, i):
    return fol.pairs_report(ctx.M, ctx.points[i], ctx.dec(i))


def _suite_cone(ctx, i):
    if ctx.cls is not None and ctx.cls.tag is not StructureTag.THREE_ALPHA_SASAKIAN:
        return [not_applicable("cone.all", "hypercomplex cone over a 3-alpha-Sasakian base", "base not of maximal rank")]
    alpha = ctx.cls.alpha if ctx.cls is not None else 0.5 * ctx.c
    C = zoo.cone_hermitian(ctx.M, alpha)
    p = np.append(ctx.points[i], 0.25)
    return zoo.cone_check(C, p, ctx.cfg.tol, min(ctx.cfg.tol, 1e-9))


_RUNNERS = {
    "structure": _suite_structure,
    "core_identities": _suite_core,
    "rank4l3": _suite_rank4l3,
    "connections": _suite_connections,
    "curvature": _suite_curvature,
    "ricci": _suite_ricci,
    "pairs": _suite_pairs,
    "cone": _suite_cone,
}


def run_suite(ctx: _Context, suite: str) -> list:
    records = []
    for i in range(len(ctx.points)):
        if suite != "structure":
            records.append(_hypotheses(ctx, suite, i))
        try:
            records.extend(_RUNNERS[suite](ctx, i))
        except GeometryError as err:
            records.append(failure(f"{suite}.error", "suite completed without a geometry error",
                                   f"{type(err).__name__}: {err}",
                                   unstable=isinstance(err, (RankUnstable, FDUnstable))))
    folded = fold(records)
    if all(r.status == NA for r in folded if not r.identity.endswith(".hypotheses")):
        # every identity gated off: the hypotheses record alone decides nothing
        folded = [r for r in folded if not r.identity.endswith(".hypotheses") or r.status != "pass"]
    return folded


def run(cfg: SuiteConfig, M=None) -> tuple:
    """Run the configured suites; returns (report document, exit status)."""
    M = load(cfg) if M is None else M
    ctx = _Context(M, cfg)
    suites = {}
    for name in SUITES:
        if name in cfg.suites:
            suites[name] = [r.to_dict() for r in run_suite(ctx, name)]
    all_records = [r for recs in suites.values() for r in recs]
    counts = {s: sum(1 for r in all_records if r["status"] == s) for s in ("pass", "fail", "n/a", "unstable")}
    ok = counts["fail"] == 0 and counts["unstable"] == 0
    classification = (
        {"tag": ctx.cls.tag.value, "rank": ctx.cls.rank, "c": float(f"{ctx.cls.c:.12g}"),
         "alpha": None if ctx.cls.alpha is None else float(f"{ctx.cls.alpha:.12g}")}
        if ctx.cls is not None else {"error": f"{type(ctx.cls_error).__name__}: {ctx.cls_error}"}
    )
    doc = {
        "config": {**asdict(cfg), "suites": list(cfg.suites)},
        "model": {"name": M.name, "dimension": M.dim, "params": M.params},
        "classification": classification,
        "suites": suites,
        "summary": {**counts, "passed": ok},
    }
    return doc, 0 if ok else 1


def dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def text_summary(doc: dict) -> str:
    lines = [f"model {doc['model']['name']} (dim {doc['model']['dimension']})"]
    cls = doc["classification"]
    lines.append("class: " + (cls["error"] if "error" in cls else
                              f"{cls['tag']}, rank {cls['rank']}, c {cls['c']}"))
    for suite, recs in doc["suites"].items():
        lines.append(f"[{suite}]")
        for r in recs:
            res = r["residual"]
            res_s = f"{res:.2e}" if isinstance(res, float) else str(res)
            lines.append(f"  {r['status']:>8}  {r['identity']:<45} {res_s:>10}  (tol {r['tol']:g})")
    s = doc["summary"]
    lines.append(f"summary: {s['pass']} pass, {s['fail']} fail, {s['unstable']} unstable, {s['n/a']} n/a")
    return "\n".join(lines)


# -- argument parsing ------------------------------------------------------------


def _suite_list(text: str) -> tuple:
    if text == "all":
        return SUITES
    names = tuple(s.strip() for s in text.split(",") if s.strip())
    bad = [s for s in names if s not in SUITES]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown suites {bad}; choose from {', '.join(SUITES)} or 'all'")
    return names


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _add_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", default="s3xr4", help="catalogue name (see `models`)")
    p.add_argument("--model-file", help="JSON model file written by zoo.save_model")
    p.add_argument("--n", type=int)
    p.add_argument("--l", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--r", type=_positive_float)
    p.add_argument("--alpha", type=_positive_float, help="apply a homothetic deformation")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quasisasaki", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", help="run identity suites on a model")
    _add_model_args(v)
    v.add_argument("--points", type=_positive_int, default=16)
    v.add_argument("--seed", type=int, default=42)
    v.add_argument("--tol", type=_positive_float, default=1e-7)
    v.add_argument("--fd-step", type=_positive_float, default=1e-4)
    v.add_argument("--suites", type=_suite_list, default=SUITES)
    v.add_argument("--report", help="write the JSON report here")
    v.add_argument("--quiet", action="store_true", help="suppress the text summary")
    sub.add_parser("models", help="list catalogue models")
    d = sub.add_parser("describe", help="classify a model and print its invariants")
    _add_model_args(d)
    return parser


def describe(cfg: SuiteConfig) -> dict:
    M = load(cfg)
    pts = sample_points(M.dom, 4, 0)
    cls = classify(M, pts)
    dec = fol.split_tangent(M, pts[0], cls.c)
    return {"name": M.name, "dimension": M.dim, "class": cls.describe(), "rank": cls.rank,
            "c": float(f"{cls.c:.12g}"), "l": dec.l, "m": dec.m}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "models":
        for name in zoo.list_models():
            e = zoo.CATALOGUE[name]
            defaults = ", ".join(f"{k}={v}" for k, v in e.defaults.items())
            print(f"{name:<8} {e.summary}  [{defaults}]")
        return 0
    try:
        common = dict(model=args.model, model_file=args.model_file, n=args.n, l=args.l, m=args.m,
                      r=args.r, alpha=args.alpha)
        if args.command == "describe":
            info = describe(SuiteConfig(**common))
            for k in ("name", "dimension", "class", "rank", "c", "l", "m"):
                print(f"{k}: {info[k]}")
            return 0
        cfg = SuiteConfig(points=args.points, seed=args.seed, tol=args.tol, fd_step=args.fd_step,
                          suites=tuple(args.suites), **common)
        doc, status = run(cfg)
    except (GeometryError, ValueError, OSError) as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 2
    text = dumps(doc)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(text)
    if not args.quiet:
        print(text_summary(doc))
    return status


if __name__ == "__main__":
    sys.exit(main())

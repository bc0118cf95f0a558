"""Perturb single structure-tensor components and report which suites notice."""

import argparse
import itertools
from dataclasses import dataclass

import numpy as np

from quasisasaki import cli, zoo


@dataclass(frozen=True)
class FaultConfig:
    model: str = "s3xr4"
    eps: float = 1e-3
    points: int = 2
    seed: int = 42
    limit: int = 0  # 0 = every component


def components(M):
    d = M.dim
    yield from (("metric", (i, j)) for i, j in itertools.combinations_with_replacement(range(d), 2))
    yield from (("phi", idx) for idx in np.ndindex(3, d, d))
    yield from (("xi", idx) for idx in np.ndindex(3, d))
    yield from (("eta", idx) for idx in np.ndindex(3, d))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    for f, default in vars(FaultConfig()).items():
        ap.add_argument(f"--{f}", type=type(default), default=default)
    cfg = FaultConfig(**vars(ap.parse_args()))
    base = zoo.build(cfg.model)
    cases = list(components(base))
    if cfg.limit:
        cases = [cases[i] for i in np.random.default_rng(cfg.seed).choice(len(cases), cfg.limit, replace=False)]
    missed = 0
    for part, idx in cases:
        M = zoo.perturb(base, part, idx, cfg.eps)
        doc, status = cli.run(cli.SuiteConfig(model=cfg.model, points=cfg.points, seed=cfg.seed), M=M)
        quiet = [s for s, recs in doc["suites"].items() if not any(r["status"] == "fail" for r in recs)]
        worst = max((r["residual"] for recs in doc["suites"].values() for r in recs
                     if isinstance(r["residual"], float)), default=0.0)
        missed += bool(quiet) or status != 1
        print(f"{part:<6} {str(tuple(int(i) for i in idx)):<12} exit {status}  max residual {worst:.2e}"
              + (f"  SILENT: {','.join(quiet)}" if quiet else ""))
    print(f"{len(cases)} perturbations, {missed} not flagged by every suite")


if __name__ == "__main__":
    main()

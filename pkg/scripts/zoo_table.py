"""Classify every catalogue model and print rank, c, block sizes and Ricci type."""

import argparse
from dataclasses import dataclass

from quasisasaki import foliation as fol
from quasisasaki import zoo
from quasisasaki.contact import classify
from quasisasaki.exprjet import sample_points


@dataclass(frozen=True)
class TableConfig:
    points: int = 8
    seed: int = 0


def rows(cfg: TableConfig):
    for name in zoo.list_models():
        M = zoo.build(name)
        pts = sample_points(M.dom, cfg.points, cfg.seed)
        cls = classify(M, pts)
        dec = fol.split_tangent(M, pts[0], cls.c)
        yield name, M.dim, cls.describe(), cls.rank, cls.c, dec.l, dec.m, fol.ricci_type(M, pts)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=TableConfig.points)
    ap.add_argument("--seed", type=int, default=TableConfig.seed)
    cfg = TableConfig(**vars(ap.parse_args()))
    print(f"{'model':<8} {'dim':>3}  {'class':<32} {'rank':>4} {'c':>6} {'l':>2} {'m':>2}  ricci")
    for name, d, desc, rank, c, l, m, ric in rows(cfg):
        print(f"{name:<8} {d:>3}  {desc:<32} {rank:>4} {c:>6.3g} {l:>2} {m:>2}  {ric}")


if __name__ == "__main__":
    main()

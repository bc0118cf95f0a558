"""Write a model file with one perturbed component, for exercising `verify --model-file`."""

import argparse
from dataclasses import dataclass

from quasisasaki import zoo


@dataclass(frozen=True)
class CorruptConfig:
    model: str = "s3xr4"
    part: str = "phi"
    index: str = "0,4,5"
    eps: float = 1e-3
    out: str = "corrupted.json"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    for f, default in vars(CorruptConfig()).items():
        ap.add_argument(f"--{f}", type=type(default), default=default)
    cfg = CorruptConfig(**vars(ap.parse_args()))
    index = tuple(int(i) for i in cfg.index.split(","))
    zoo.save_model(zoo.perturb(zoo.build(cfg.model), cfg.part, index, cfg.eps), cfg.out)
    print(f"wrote {cfg.out}; try: python3 -m quasisasaki.cli verify --model-file {cfg.out}")


if __name__ == "__main__":
    main()

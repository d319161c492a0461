"""Removed angular measure 2*pi - L(B_1(lam)) against lam for several threshold exponents.

With delta = c * lam^e the hole width around a crossing scales like
lam^(e - 1 + 1/2l); only exponents below 1 - 1/2l make the removed measure
shrink as lam grows.
"""
import argparse
import dataclasses
import math

from qpmomentum import config
from qpmomentum.isoenergetic import carve_levels


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config")
    ap.add_argument("--exponents", type=float, nargs="+", default=[0.25, 0.5, 0.75])
    ap.add_argument("--lambdas", type=float, nargs="+", default=[81.0, 256.0, 625.0, 1296.0])
    args = ap.parse_args()
    cfg = config.load(args.config) if args.config else config.sample_config()
    print("exponent," + ",".join(f"lam={lam:g}" for lam in args.lambdas))
    for e in args.exponents:
        th = dataclasses.replace(cfg.thresholds, delta_exponent=e)
        removed = [2 * math.pi - carve_levels(cfg.potential, lam, 1, cfg.schedule, th, cfg.phi_resolution)[0].length
                   for lam in args.lambdas]
        print(f"{e}," + ",".join(f"{m:.4f}" for m in removed))


if __name__ == "__main__":
    main()

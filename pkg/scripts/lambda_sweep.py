"""Solve across lambda in (0, lambda_hat) and tabulate energy and norm.

    python scripts/lambda_sweep.py [--rel 0.1,0.25,0.5,0.75,0.95] [--nodes 9]
"""

import argparse
import dataclasses
import pathlib

from dphase.config import default_config
from dphase.pipeline import run_sweep, write_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rel", default="0.1,0.25,0.5,0.75,0.95", help="multiples of lambda_hat")
    ap.add_argument("--nodes", type=int, default=9, help="nodes per axis (fixture uses 17)")
    ap.add_argument("--out", type=pathlib.Path, default=pathlib.Path("runs/sweep"))
    args = ap.parse_args()

    cfg = default_config()
    cfg = dataclasses.replace(cfg, grid=dataclasses.replace(cfg.grid, nodes_per_axis=args.nodes))
    rows = run_sweep(cfg, [float(x) for x in args.rel.split(",")], relative=True)
    write_sweep(rows, args.out)
    print(f"{'lambda':>10s} {'conv':>5s} {'energy':>14s} {'norm':>10s} {'residual':>10s}")
    for r in rows:
        if r["error"]:
            print(f"{r['lambda']:10.4g} {'-':>5s} {r['error']}")
        else:
            print(f"{r['lambda']:10.4g} {str(r['converged']):>5s} {r['energy']:14.8g} {r['norm']:10.5g} "
                  f"{r['residual']:10.3e}")


if __name__ == "__main__":
    main()

"""Solve the pinned regression fixture and print its summary.

    python scripts/run_fixture.py [--config configs/default.toml] [--out runs/fixture]
"""

import argparse
import json
import logging
import pathlib
import time

from dphase.config import default_config, load
from dphase.pipeline import run_solve, write_solve_artifacts


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=pathlib.Path)
    ap.add_argument("--out", type=pathlib.Path, default=pathlib.Path("runs/fixture"))
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)

    cfg = load(args.config) if args.config else default_config()
    t0 = time.time()
    out = run_solve(cfg)
    write_solve_artifacts(out, args.out)
    s = out.summary
    keys = ["converged", "lambda", "lambda_hat", "residual_norm", "mp_level_estimate", "eta", "gamma", "iterations",
            "positivity", "zero_interior_nodes"]
    print(json.dumps({k: s.get(k) for k in keys}, indent=2))
    print(f"energy: {s.get('energy')}")
    print(f"{time.time() - t0:.1f} s, artifacts in {args.out}")


if __name__ == "__main__":
    main()

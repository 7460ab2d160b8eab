"""Calibrate the Hardy embedding factor on the default configuration.

Writes ``src/dphase/data/hardy_calibration.json``.  The stored value is part
of the package's certified behaviour: rerun only deliberately, and bump the
version when the sweep settings change.

    python scripts/calibrate_hardy.py [--samples 10000] [--seed 0]
"""

import argparse
import json
import pathlib
import time

from dphase.config import default_config
from dphase.hardy import CALIBRATION_FILE, calibrate_c_hat, calibration_record


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=pathlib.Path,
                    default=pathlib.Path(__file__).resolve().parents[1] / "src" / "dphase" / "data" / CALIBRATION_FILE)
    args = ap.parse_args()

    cfg = default_config()
    e = cfg.build_exponents()
    t0 = time.time()
    res = calibrate_c_hat(e, cfg.problem.alpha, args.samples, args.seed,
                          progress=lambda n, w: print(f"{n:6d} samples  max ratio {w:.6g}", flush=True))
    settings = {
        "grid": cfg.to_dict()["grid"],
        "exponents": cfg.to_dict()["exponents"],
        "alpha": cfg.problem.alpha,
        "samples": args.samples,
        "seed": args.seed,
        "families": ["sine", "bump", "poly", "concentration"],
        "log_amplitude": [-2.0, 2.0],
        "config_hash": cfg.config_hash(),
    }
    rec = calibration_record(e, cfg.problem.alpha, settings, res)
    args.out.write_text(json.dumps(rec, indent=2, sort_keys=True) + "\n")
    print(f"c_hat = {rec['c_hat']:.6g} ({time.time() - t0:.0f} s) -> {args.out}")


if __name__ == "__main__":
    main()

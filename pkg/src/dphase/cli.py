"""Command line entry point: ``dphase verify | hardy | solve | sweep``.

Exit codes: 0 success, 1 numerical failure, 2 invalid input.
The thread count of the BLAS / LAPACK pools is read from ``DPHASE_THREADS``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import pathlib
import sys

import numpy as np
from threadpoolctl import threadpool_limits

from .config import ConfigError, RunConfig, default_config, load
from .exponents import ExpressionError

EXIT_OK, EXIT_NUMERIC, EXIT_INPUT = 0, 1, 2

log = logging.getLogger("dphase")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dphase", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p, samples=None):
        p.add_argument("--config", type=pathlib.Path, help="TOML run configuration (defaults built in)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", type=pathlib.Path, help="output directory (overrides output_dir)")
        if samples is not None:
            p.add_argument("--samples", type=int, default=samples, help=f"random functions (default {samples})")
        return p

    common(sub.add_parser("verify", help="modular / energy property suites"), samples=100)
    h = common(sub.add_parser("hardy", help="Hardy-type inequality certification"), samples=500)
    h.add_argument("--adversarial", action="store_true", help="add near-origin concentration families")
    common(sub.add_parser("solve", help="mountain-pass solve"))
    s = common(sub.add_parser("sweep", help="one solve per lambda"))
    s.add_argument("--lambdas", required=True, help="comma-separated lambda values")
    s.add_argument("--relative", action="store_true", help="values are multiples of lambda_hat")
    return ap


def _config(args) -> RunConfig:
    cfg = load(args.config) if args.config else default_config()
    return cfg.with_overrides(seed=args.seed, output_dir=str(args.out) if args.out else None)


def cmd_verify(cfg: RunConfig, samples: int) -> int:
    from .pipeline import prepare
    from .verify import run_suites

    e = prepare(cfg)
    if samples <= 0:
        print("no samples: nothing to verify")
        return EXIT_OK
    prm = cfg.problem_params(cfg.problem.lam if cfg.problem.lam is not None else 1.0)
    results = run_suites(e, prm, samples, cfg.seed)
    for r in results:
        print(r.line())
    bad = [r for r in results if not r.passed]
    if bad:
        print(f"FAILED: {bad[0].name}")
        return EXIT_NUMERIC
    print(f"all {len(results)} properties passed on {samples} samples")
    return EXIT_OK


def cmd_hardy(cfg: RunConfig, samples: int, adversarial: bool) -> int:
    from .grid import write_csv
    from .hardy import full_report, hardy_constant
    from .pipeline import prepare
    from .testfunctions import concentration_family, random_function

    e = prepare(cfg)
    alpha = cfg.problem.alpha
    C = hardy_constant(e, alpha)  # raises on excluded alpha before any work
    rng = np.random.default_rng(cfg.seed)
    funcs = [(f"random[{i}]", random_function(e.grid, rng, log_amplitude=(-2.0, 2.0))) for i in range(samples)]
    if adversarial:
        for amp in (0.01, 0.1, 1.0, 10.0, 100.0):
            funcs += [(f"concentration[k={k},a={amp:g}]", u) for k, u in concentration_family(e.grid, amplitude=amp)]
    n_up = n_lo = 0
    worst = (np.inf, None, None)
    split_err = 0.0
    kappa_branches = set()
    for name, u in funcs:
        rep = full_report(u, e, alpha, sing_floor=cfg.problem.sing_floor)
        n_up += not rep.passed
        n_lo += not rep.lower_passed
        split_err = max(split_err, rep.split_error)
        kappa_branches.add(rep.kappa)
        if rep.rhs > 0 and rep.slack < worst[0]:
            worst = (rep.slack, name, u)
    summary = {
        "constant": C,
        "functions": len(funcs),
        "upper_violations": n_up,
        "lower_violations": n_lo,
        "max_split_error": split_err,
        "min_upper_slack": worst[0] if worst[1] else None,
        "argmin": worst[1],
        "kappa_branches": sorted(kappa_branches),
        "seed": cfg.seed,
        "config_hash": cfg.config_hash(),
    }
    out = pathlib.Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if worst[2] is not None:
        write_csv(out / "hardy_worst.csv", e.grid, worst[2].values)
    (out / "hardy_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary, indent=2, sort_keys=True))
    ok = n_up == 0 and n_lo == 0 and split_err <= 1e-12
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_solve(cfg: RunConfig) -> int:
    from .pipeline import run_solve, write_solve_artifacts

    out = run_solve(cfg)
    path = write_solve_artifacts(out, cfg.output_dir)
    s = out.summary
    if out.result is None:
        print(f"not solved: {s.get('note')}")
    else:
        print(f"converged={s['converged']} energy={s['energy']['total']:.12g} residual={s['residual_norm']:.3e} "
              f"min={s['positivity']['min_node_value']:.3e} iterations={s['iterations']}")
    print(f"artifacts in {path}")
    return out.exit_code


def cmd_sweep(cfg: RunConfig, lambdas: str, relative: bool) -> int:
    from .pipeline import run_sweep, write_sweep

    try:
        lams = [float(x) for x in lambdas.split(",") if x.strip()]
    except ValueError:
        raise ConfigError("--lambdas", f"expected comma-separated numbers, got {lambdas!r}") from None
    if not lams or any(x < 0 for x in lams):
        raise ConfigError("--lambdas", "expected a nonempty list of nonnegative numbers")
    rows = run_sweep(cfg, lams, relative)
    write_sweep(rows, cfg.output_dir)
    for r in rows:
        print(f"lambda={r['lambda']:.6g} converged={r['converged']} energy={r['energy']} "
              f"residual={r['residual']} {r['error'] or ''}".rstrip())
    return EXIT_OK if all(r["converged"] for r in rows) else EXIT_NUMERIC


def main(argv=None) -> int:
    from .hardy import ExcludedAlphaError
    from .pipeline import HypothesisError

    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    threads = os.environ.get("DPHASE_THREADS")
    try:
        nthreads = int(threads) if threads else None
        if nthreads is not None and nthreads < 1:
            raise ValueError
    except ValueError:
        print(f"error: DPHASE_THREADS must be a positive integer, got {threads!r}", file=sys.stderr)
        return EXIT_INPUT
    try:
        cfg = _config(args)
        if getattr(args, "samples", 0) < 0:
            raise ConfigError("--samples", "must be >= 0")
        with threadpool_limits(limits=nthreads):
            if args.cmd == "verify":
                return cmd_verify(cfg, args.samples)
            if args.cmd == "hardy":
                return cmd_hardy(cfg, args.samples, args.adversarial)
            if args.cmd == "solve":
                return cmd_solve(cfg)
            return cmd_sweep(cfg, args.lambdas, args.relative)
    except HypothesisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for name in exc.report.failures():
            print(f"  {name}: {exc.report.results[name]['violation']}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, ExcludedAlphaError, ExpressionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Config-driven solve and sweep runs with their on-disk artifacts."""

from __future__ import annotations

import csv
import json
import math
import pathlib
from dataclasses import asdict, dataclass

from .config import RunConfig
from .exponents import ExponentData, validate_hypotheses
from .grid import write_csv
from .solver import (
    EndpointError,
    GeometryError,
    MountainPassResult,
    SignError,
    certify_geometry,
    geometry_constants,
    mountain_pass_solve,
    ps_monitor,
    sweep_lambda,
)

__all__ = ["HypothesisError", "SolveOutcome", "prepare", "run_solve", "run_sweep", "write_solve_artifacts"]

TRACE_FIELDS = ["iteration", "index", "energy_before", "energy_after", "residual", "norm", "l2_norm",
                "pairing", "step", "phase"]


class HypothesisError(ValueError):
    def __init__(self, report):
        super().__init__("hypotheses violated: " + ", ".join(report.failures()))
        self.report = report


def prepare(cfg: RunConfig) -> ExponentData:
    """Grid and exponents for ``cfg``; raises :class:`HypothesisError` on (H1)/(H2)/(beta0) failures."""
    e = cfg.build_exponents()
    rep = validate_hypotheses(e)
    if not rep.passed:
        raise HypothesisError(rep)
    return e


@dataclass
class SolveOutcome:
    summary: dict
    result: MountainPassResult | None
    exit_code: int


def run_solve(cfg: RunConfig, e: ExponentData | None = None) -> SolveOutcome:
    e = e or prepare(cfg)
    st = cfg.solver
    base = cfg.problem_params(0.0)
    k = geometry_constants(e, base, st.embedding_samples, cfg.seed)
    lam = cfg.resolve_lambda(k.lambda_hat)
    prm = cfg.problem_params(lam)
    summary = {
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "lambda": lam,
        "lambda_hat": k.lambda_hat,
        "embedding": asdict(k),
    }
    try:
        cert = certify_geometry(e, prm, st.geometry_samples, cfg.seed, constants=k)
    except GeometryError as exc:
        summary.update(converged=False, note=f"geometry failure: {exc}", sample_energy=exc.energy if exc.energy is not None and math.isfinite(exc.energy) else None)
        return SolveOutcome(summary, None, 1)
    summary["geometry"] = {"gamma": cert.gamma, "eta": cert.eta, "min_sample_energy": cert.min_sample_energy,
                           "samples": cert.samples}
    try:
        res = mountain_pass_solve(e, prm, st, certificate=cert, seed=cfg.seed)
    except (EndpointError, SignError) as exc:
        summary.update(converged=False, note=f"{type(exc).__name__}: {exc}")
        return SolveOutcome(summary, None, 1)
    summary.update(res.summary())
    nl_theta = _theta(e, prm)
    ps = ps_monitor(res.trace, e.q_plus, e.p_minus, nl_theta)
    summary["ps_monitor"] = ps.as_dict()
    ok = res.converged and res.positivity[0] >= -st.tol_sign
    return SolveOutcome(summary, res, 0 if ok else 1)


def _theta(e, prm) -> float:
    from .energy import Nonlinearity

    return Nonlinearity(e, prm).theta


def write_solve_artifacts(out: SolveOutcome, outdir) -> pathlib.Path:
    outdir = pathlib.Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    res = out.result
    if res is not None:
        write_csv(outdir / "solution.csv", res.solution.grid, res.solution.values)
        with open(outdir / "trace.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_FIELDS)
            for r in res.trace:
                d = asdict(r)
                w.writerow([repr(d[f]) if isinstance(d[f], float) else d[f] for f in TRACE_FIELDS])
    with open(outdir / "summary.json", "w") as fh:
        json.dump(out.summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return outdir


def run_sweep(cfg: RunConfig, lambdas, relative: bool = False, e: ExponentData | None = None) -> list[dict]:
    e = e or prepare(cfg)
    lams = list(lambdas)
    if relative:
        k = geometry_constants(e, cfg.problem_params(0.0), cfg.solver.embedding_samples, cfg.seed)
        lams = [x * k.lambda_hat for x in lams]
    rows = sweep_lambda(e, cfg.problem_params(0.0), lams, cfg.solver, cfg.seed)
    for r in rows:
        r["config_hash"] = cfg.config_hash()
        r["seed"] = cfg.seed
    return rows


def write_sweep(rows, outdir) -> pathlib.Path:
    outdir = pathlib.Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cols = ["lambda", "lambda_hat", "converged", "energy", "norm", "residual", "error"]
    with open(outdir / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([repr(r[c]) if isinstance(r[c], float) else ("" if r[c] is None else r[c]) for c in cols])
    with open(outdir / "sweep.json", "w") as fh:
        json.dump(rows, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return outdir

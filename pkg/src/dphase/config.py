"""Run configuration: TOML files mapped onto nested dataclasses.

Grammar (every section and key optional; omitted keys take the defaults)::

    seed = 0                      # 64-bit integer
    output_dir = "runs/default"

    [grid]
    dim = 3
    extents = [[-1.0, 1.0], [-1.0, 1.0], [-1.0, 1.0]]   # or a single [a, b]
    nodes_per_axis = 17

    [exponents]                   # closed-form expressions, see evaluate_expression
    p = "1.5"
    q = "1.8"
    mu = "1"
    beta = "2.2"                  # "auto" for (q+ + min p*) / 2

    [problem]
    lam_rel = 0.5                 # lambda = lam_rel * lambda_hat ...
    # lam = 10.0                  # ... or an absolute value (exactly one of the two)
    alpha = 0.3
    nonlinearity = "pure_power"   # or "perturbed_power"
    sigma = 0.5
    # theta, c1, c2, sing_floor: optional overrides
    K_ar = 1.0

    [solver]
    tol_residual = 1e-6
    ...                           # every field of SolverSettings
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace

import tomli
import tomli_w

from .energy import NONLINEARITIES, ProblemParams
from .exponents import ExponentData, ExpressionError, evaluate_expression, sample_exponents
from .grid import Grid, build_grid
from .solver import SolverSettings

__all__ = ["ConfigError", "RunConfig", "default_config", "dumps", "load", "loads"]


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""

    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


@dataclass(frozen=True)
class GridConfig:
    dim: int = 3
    extents: tuple = ((-1.0, 1.0),) * 3
    nodes_per_axis: int = 17


@dataclass(frozen=True)
class ExponentConfig:
    p: str = "1.5"
    q: str = "1.8"
    mu: str = "1"
    beta: str = "2.2"


@dataclass(frozen=True)
class ProblemConfig:
    alpha: float = 0.3
    lam_rel: float | None = 0.5
    lam: float | None = None
    nonlinearity: str = "pure_power"
    sigma: float = 0.5
    theta: float | None = None
    c1: float | None = None
    c2: float | None = None
    K_ar: float = 1.0
    sing_floor: float | None = None


@dataclass(frozen=True)
class RunConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    exponents: ExponentConfig = field(default_factory=ExponentConfig)
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    solver: SolverSettings = field(default_factory=SolverSettings)
    seed: int = 0
    output_dir: str = "runs/default"

    # -- derived objects ------------------------------------------------------
    def build_grid(self) -> Grid:
        g = self.grid
        return build_grid(g.dim, g.extents, g.nodes_per_axis)

    def build_exponents(self, grid: Grid | None = None) -> ExponentData:
        grid = grid or self.build_grid()
        x = self.exponents
        return sample_exponents(grid, x.p, x.q, x.mu, None if x.beta == "auto" else x.beta)

    def problem_params(self, lam: float) -> ProblemParams:
        p = self.problem
        return ProblemParams(
            lam=lam,
            alpha=p.alpha,
            nonlinearity=p.nonlinearity,
            theta=p.theta,
            sigma=p.sigma,
            c1=p.c1,
            c2=p.c2,
            K_ar=p.K_ar,
            sing_floor=p.sing_floor,
        )

    def resolve_lambda(self, lambda_hat: float) -> float:
        p = self.problem
        return float(p.lam) if p.lam is not None else float(p.lam_rel) * lambda_hat

    def to_dict(self) -> dict:
        return _strip_none(asdict(self))

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON of every result-affecting field (all but ``output_dir``)."""
        d = self.to_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def with_overrides(self, seed: int | None = None, output_dir: str | None = None) -> "RunConfig":
        kw = {}
        if seed is not None:
            kw["seed"] = _int("seed", seed)
        if output_dir is not None:
            kw["output_dir"] = str(output_dir)
        return replace(self, **kw)


def default_config() -> RunConfig:
    return RunConfig()


def _strip_none(d):
    if isinstance(d, dict):
        return {k: _strip_none(v) for k, v in d.items() if v is not None}
    if isinstance(d, (list, tuple)):
        return [_strip_none(v) for v in d]
    return d


# -- parsing --------------------------------------------------------------------


def _int(path, v) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(path, f"expected an integer, got {v!r}")
    return v


def _float(path, v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError(path, f"expected a finite number, got {v!r}")
    return v


def _str(path, v) -> str:
    if not isinstance(v, str):
        raise ConfigError(path, f"expected a string, got {v!r}")
    return v


def _section(path, raw, cls, convert):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected a table")
    known = {f.name for f in fields(cls)}
    for k in raw:
        if k not in known:
            raise ConfigError(f"{path}.{k}", "unknown key")
    kw = {k: convert(f"{path}.{k}", k, v) for k, v in raw.items()}
    try:
        return cls(**kw)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def _grid_value(path, key, v):
    if key in ("dim", "nodes_per_axis"):
        return _int(path, v)
    if not isinstance(v, list) or not v:
        raise ConfigError(path, "expected [a, b] or a list of [a, b]")
    if all(not isinstance(x, list) for x in v):
        v = [v]
    out = []
    for i, iv in enumerate(v):
        if not isinstance(iv, list) or len(iv) != 2:
            raise ConfigError(f"{path}[{i}]", f"expected [a, b], got {iv!r}")
        out.append((_float(f"{path}[{i}][0]", iv[0]), _float(f"{path}[{i}][1]", iv[1])))
    return tuple(out)


def _problem_value(path, key, v):
    if key == "nonlinearity":
        v = _str(path, v)
        if v not in NONLINEARITIES:
            raise ConfigError(path, f"expected one of {NONLINEARITIES}, got {v!r}")
        return v
    return _float(path, v)


def _solver_value(path, key, v):
    if key in ("max_iters", "path_points", "confirm_steps", "geometry_samples", "embedding_samples", "max_backtracks"):
        return _int(path, v)
    return _float(path, v)


def from_dict(raw: dict) -> RunConfig:
    top = {"grid", "exponents", "problem", "solver", "seed", "output_dir"}
    for k in raw:
        if k not in top:
            raise ConfigError(k, "unknown key")
    grid = _section("grid", raw.get("grid"), GridConfig, _grid_value)
    if "extents" not in (raw.get("grid") or {}):
        grid = replace(grid, extents=((-1.0, 1.0),) * grid.dim)
    elif len(grid.extents) == 1:
        grid = replace(grid, extents=grid.extents * grid.dim)
    elif len(grid.extents) != grid.dim:
        raise ConfigError("grid.extents", f"expected {grid.dim} intervals, got {len(grid.extents)}")
    try:
        build_grid(grid.dim, grid.extents, grid.nodes_per_axis)
    except ValueError as exc:
        raise ConfigError("grid", str(exc)) from None
    expo = _section("exponents", raw.get("exponents"), ExponentConfig, lambda p, k, v: _str(p, v))
    prob = _section("problem", raw.get("problem"), ProblemConfig, _problem_value)
    if "lam" in (raw.get("problem") or {}) and "lam_rel" not in (raw.get("problem") or {}):
        prob = replace(prob, lam_rel=None)
    _check_problem(prob)
    solver = _section("solver", raw.get("solver"), SolverSettings, _solver_value)
    seed = _int("seed", raw.get("seed", 0))
    if not -(2**63) <= seed < 2**64:
        raise ConfigError("seed", "must fit in 64 bits")
    out = _str("output_dir", raw.get("output_dir", "runs/default"))
    cfg = RunConfig(grid, expo, prob, solver, seed, out)
    _check_expressions(cfg)
    return cfg


def _check_problem(p: ProblemConfig) -> None:
    if (p.lam is None) == (p.lam_rel is None):
        raise ConfigError("problem", "set exactly one of lam and lam_rel")
    if p.lam is not None and p.lam < 0:
        raise ConfigError("problem.lam", "must be >= 0")
    if p.lam_rel is not None and p.lam_rel < 0:
        raise ConfigError("problem.lam_rel", "must be >= 0")
    try:
        ProblemParams(lam=0.0, alpha=p.alpha, nonlinearity=p.nonlinearity, theta=p.theta, sigma=p.sigma,
                      c1=p.c1, c2=p.c2, K_ar=p.K_ar, sing_floor=p.sing_floor)
    except ValueError as exc:
        raise ConfigError("problem", str(exc)) from None


def _check_expressions(cfg: RunConfig) -> None:
    grid = cfg.build_grid()
    for name in ("p", "q", "mu", "beta"):
        expr = getattr(cfg.exponents, name)
        if name == "beta" and expr == "auto":
            continue
        try:
            evaluate_expression(expr, grid.coords)
        except ExpressionError as exc:
            raise ConfigError(f"exponents.{name}", str(exc)) from None


def loads(text: str) -> RunConfig:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError("<toml>", str(exc)) from None
    return from_dict(raw)


def load(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(str(path), exc.strerror or str(exc)) from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(str(path), str(exc)) from None
    return from_dict(raw)


def dumps(cfg: RunConfig) -> str:
    d = cfg.to_dict()
    d["grid"]["extents"] = [list(iv) for iv in cfg.grid.extents]
    return tomli_w.dumps(d)

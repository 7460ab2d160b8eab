"""Variable exponents p, q, beta and the weight mu, with hypothesis checks."""

from __future__ import annotations

import ast
import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .grid import Grid

__all__ = [
    "ExponentData",
    "ExpressionError",
    "HypothesisReport",
    "critical_exponent",
    "critical_field",
    "evaluate_expression",
    "sample_exponents",
    "validate_hypotheses",
]

MARGIN = 1e-9

_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "abs": np.abs,
    "sqrt": np.sqrt,
}
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


class ExpressionError(ValueError):
    pass


def _names(coords: np.ndarray) -> dict:
    names = {f"x{d + 1}": coords[d] for d in range(coords.shape[0])}
    names.update({"x": coords[0], "y": coords[1]})
    if coords.shape[0] > 2:
        names["z"] = coords[2]
    names["r"] = np.sqrt(np.sum(coords**2, axis=0))
    names["pi"] = math.pi
    return names


def evaluate_expression(expr: str, coords: np.ndarray) -> np.ndarray:
    """Evaluate a closed-form field at the given coordinates.

    Grammar: numbers, ``+ - * / **``, unary minus, the coordinates
    ``x1..xN`` (also ``x, y, z``), ``r = |x|``, ``pi`` and the functions
    ``sin cos exp abs sqrt``.  ``|x|`` is accepted as shorthand for ``r``.
    """
    src = str(expr).replace("|x|", "r").strip()
    if not src:
        raise ExpressionError("empty expression")
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {expr!r}: {exc.msg}") from None
    names = _names(coords)

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id not in names:
                raise ExpressionError(f"unknown name {node.id!r} in {expr!r}")
            return names[node.id]
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
            if node.func.id not in _FUNCS or len(node.args) != 1 or node.keywords:
                raise ExpressionError(f"unsupported call {ast.unparse(node)!r}")
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ExpressionError(f"unsupported syntax {ast.unparse(node)!r} in {expr!r}")

    with np.errstate(all="ignore"):
        out = np.broadcast_to(np.asarray(ev(tree), dtype=float), coords.shape[1:]).copy()
    if not np.all(np.isfinite(out)):
        raise ExpressionError(f"{expr!r} is not finite at every node")
    return out


def critical_exponent(p_val: float, dim: int) -> float:
    """Sobolev conjugate ``N p / (N - p)``, or ``inf`` when ``p >= N``."""
    if not p_val > 1:
        raise ValueError(f"exponent must exceed 1, got {p_val}")
    if p_val >= dim:
        return math.inf
    return dim * p_val / (dim - p_val)


def critical_field(p_vals: np.ndarray, dim: int) -> np.ndarray:
    p = np.asarray(p_vals, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(p < dim, dim * p / (dim - p), np.inf)


@dataclass(frozen=True, eq=False)
class ExponentData:
    """Nodal samples of ``p, q, beta, mu`` on a grid.

    Construction does not validate; call :func:`validate_hypotheses`.
    """

    grid: Grid
    p_vals: np.ndarray
    q_vals: np.ndarray
    beta_vals: np.ndarray
    mu_vals: np.ndarray
    exprs: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for name in ("p_vals", "q_vals", "beta_vals", "mu_vals"):
            arr = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), self.grid.shape).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.grid.dim

    p_minus = cached_property(lambda self: float(self.p_vals.min()))
    p_plus = cached_property(lambda self: float(self.p_vals.max()))
    q_minus = cached_property(lambda self: float(self.q_vals.min()))
    q_plus = cached_property(lambda self: float(self.q_vals.max()))
    beta_minus = cached_property(lambda self: float(self.beta_vals.min()))
    beta_plus = cached_property(lambda self: float(self.beta_vals.max()))
    mu_inf_norm = cached_property(lambda self: float(np.abs(self.mu_vals).max()))

    @cached_property
    def p_star(self) -> np.ndarray:
        return critical_field(self.p_vals, self.dim)

    def with_fields(self, **kw) -> "ExponentData":
        vals = {k: getattr(self, k) for k in ("p_vals", "q_vals", "beta_vals", "mu_vals")}
        vals.update(kw)
        return ExponentData(self.grid, **vals)


def sample_exponents(grid: Grid, p: str, q: str, mu: str, beta: str | None = None) -> ExponentData:
    """Sample exponent expressions at the nodes.

    When ``beta`` is omitted it defaults to the constant ``(q+ + min p*) / 2``.
    """
    pv = evaluate_expression(p, grid.coords)
    qv = evaluate_expression(q, grid.coords)
    mv = evaluate_expression(mu, grid.coords)
    if beta is None:
        pstar = critical_field(pv, grid.dim).min()
        bval = 0.5 * (qv.max() + pstar) if math.isfinite(pstar) else qv.max() + 1.0
        beta = repr(float(bval))
    bv = evaluate_expression(beta, grid.coords)
    return ExponentData(grid, pv, qv, bv, mv, exprs={"p": p, "q": q, "beta": beta, "mu": mu})


@dataclass
class HypothesisReport:
    results: dict

    @property
    def passed(self) -> bool:
        return all(r["passed"] for r in self.results.values())

    def failures(self) -> list[str]:
        return [k for k, r in self.results.items() if not r["passed"]]

    def to_json(self) -> str:
        return json.dumps(self.results, indent=2, sort_keys=True)


def _first_violation(grid: Grid, bad: np.ndarray, detail: str) -> dict | None:
    if not np.any(bad):
        return None
    flat = int(np.flatnonzero(bad.ravel())[0])
    idx = np.unravel_index(flat, grid.shape)
    return {
        "node": [int(i) for i in idx],
        "flat_index": flat,
        "coords": [float(grid.coords[(d,) + idx]) for d in range(grid.dim)],
        "detail": detail,
    }


def validate_hypotheses(e: ExponentData, grid: Grid | None = None) -> HypothesisReport:
    """Nodal scan of (H1), (H2) and (beta0) with strict margins ``1e-9``."""
    grid = e.grid if grid is None else grid
    n = grid.dim
    p, q, b, mu = e.p_vals, e.q_vals, e.beta_vals, e.mu_vals
    pstar = e.p_star
    checks = {}

    h1 = [
        (p <= 1 + MARGIN, "p(x) <= 1"),
        (q <= 1 + MARGIN, "q(x) <= 1"),
        (p >= n - MARGIN, f"p(x) >= N = {n}"),
        (q >= n - MARGIN, f"q(x) >= N = {n}"),
        (p >= q - MARGIN, "p(x) >= q(x)"),
        (q >= pstar - MARGIN, "q(x) >= p*(x)"),
    ]
    checks["H1"] = _scan(grid, h1)

    checks["H2"] = _scan(grid, [(mu < 0, "mu(x) < 0"), (~np.isfinite(mu), "mu(x) not finite")])

    pstar_min = float(pstar.min())
    b0 = [
        (b <= 1 + MARGIN, "beta(x) <= 1"),
        (np.broadcast_to(b.min() <= q.max() + MARGIN, b.shape) & (b == b.min()), "beta- <= q+"),
        (b >= pstar_min - MARGIN, "beta(x) >= min p*"),
    ]
    checks["beta0"] = _scan(grid, b0)
    checks["beta0"]["bounds"] = {
        "q_plus": e.q_plus,
        "beta_minus": e.beta_minus,
        "beta_plus": e.beta_plus,
        "p_star_min": pstar_min,
    }
    return HypothesisReport(checks)


def _scan(grid: Grid, conditions) -> dict:
    for bad, detail in conditions:
        v = _first_violation(grid, np.asarray(bad), detail)
        if v is not None:
            return {"passed": False, "violation": v}
    return {"passed": True, "violation": None}

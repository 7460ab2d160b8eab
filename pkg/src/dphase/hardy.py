"""Hardy-type inequalities for the singular modular.

Upper bound::

    int |u|^p / (p r^{a p}) + mu |u|^q / (q r^{a q})  <=  C |grad u|_H^kappa

with ``C = (1 + |mu|_inf) / p- * max{c (q+/(N - a q+))^{q+}, c (p-/(N - a p-))^{p-}}``
and ``kappa = p-`` below unit norm, ``q+`` above.  The embedding factor ``c``
is not available in closed form and is calibrated once (see
:func:`calibrate_c_hat`) and stored in ``data/hardy_calibration.json``.

Lower bound::

    int |u|^p / r^{a p} + mu |u|^q / r^{a q}  >  M^{-a tau} |u|_H^kappa

with ``M`` the largest nodal radius, ``tau = p-`` when ``M < 1`` and ``q+``
otherwise, and ``kappa = q+`` below unit norm, ``p-`` above.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass
from importlib import resources

import numpy as np

from .exponents import ExponentData
from .grid import GridFunction, _fsum
from .modular import luxemburg_norm
from .testfunctions import concentration_family, random_function

__all__ = [
    "CALIBRATION_FILE",
    "ExcludedAlphaError",
    "HardyReport",
    "calibrate_c_hat",
    "check_hardy_lower",
    "check_hardy_upper",
    "hardy_constant",
    "load_calibration",
]

CALIBRATION_FILE = "hardy_calibration.json"
CALIBRATION_VERSION = 1
CALIBRATION_MARGIN = 1.1
EXCLUSION_TOL = 1e-9
UPPER_RTOL = 1e-12
LOWER_ATOL = 1e-12


class ExcludedAlphaError(ValueError):
    """``alpha`` hits an excluded value (``a p- = 1``, ``a q+ = 1`` or ``N <= a q+``)."""


def _check_alpha(e: ExponentData, alpha: float, dim: int) -> None:
    if abs(alpha * e.p_minus - 1.0) <= EXCLUSION_TOL:
        raise ExcludedAlphaError(f"alpha * p- = 1 (alpha={alpha}, p-={e.p_minus})")
    if abs(alpha * e.q_plus - 1.0) <= EXCLUSION_TOL:
        raise ExcludedAlphaError(f"alpha * q+ = 1 (alpha={alpha}, q+={e.q_plus})")
    if dim <= alpha * e.q_plus:
        raise ExcludedAlphaError(f"N = {dim} <= alpha * q+ = {alpha * e.q_plus}")


def _factor(s: float, alpha: float, dim: int) -> float:
    return (s / (dim - alpha * s)) ** s


def hardy_constant(e: ExponentData, alpha: float, dim: int | None = None, c_hat: float | None = None) -> float:
    """Closed-form upper-bound constant; ``c_hat`` defaults to the stored calibration."""
    dim = e.dim if dim is None else int(dim)
    _check_alpha(e, alpha, dim)
    c = load_calibration()["c_hat"] if c_hat is None else float(c_hat)
    return (1.0 + e.mu_inf_norm) / e.p_minus * max(
        c * _factor(e.q_plus, alpha, dim), c * _factor(e.p_minus, alpha, dim)
    )


@dataclass
class HardyReport:
    lhs: float
    rhs: float
    constant: float
    kappa: float
    grad_norm: float
    lhs_inner: float  # over |x| < 1
    lhs_outer: float  # over |x| >= 1
    domain_split: tuple[float, float]
    passed: bool
    lower_lhs: float | None = None
    lower_rhs: float | None = None
    lower_passed: bool | None = None
    M: float | None = None
    tau: float | None = None

    @property
    def slack(self) -> float:
        """Relative room ``(rhs - lhs) / max(rhs, tiny)`` in the upper bound."""
        return (self.rhs - self.lhs) / max(self.rhs, 1e-300)

    @property
    def split_error(self) -> float:
        """``|lhs_inner + lhs_outer - lhs|`` relative to ``max(1, lhs)``."""
        return abs(self.lhs_inner + self.lhs_outer - self.lhs) / max(1.0, self.lhs)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["slack"] = self.slack
        return d


def _singular_densities(u, e: ExponentData, alpha: float, sing_floor: float | None):
    grid = u.grid
    floor = 0.5 * min(grid.spacing) if sing_floor is None else float(sing_floor)
    lr = np.log(np.maximum(grid.radius, floor))
    a = np.abs(u.values)
    with np.errstate(divide="ignore"):
        la = np.log(np.where(a > 0, a, 1.0))
    p, q, mu = e.p_vals, e.q_vals, e.mu_vals
    tp = np.where(a > 0, np.exp(p * (la - alpha * lr)), 0.0)
    tq = np.where(a > 0, mu * np.exp(q * (la - alpha * lr)), 0.0)
    return tp, tq


def _upper_lhs(u, e, alpha, sing_floor):
    tp, tq = _singular_densities(u, e, alpha, sing_floor)
    return u.grid.quad_weights * (tp / e.p_vals + tq / e.q_vals)


def check_hardy_upper(
    u: GridFunction, e: ExponentData, alpha: float, c_hat: float | None = None, sing_floor: float | None = None
) -> HardyReport:
    """Evaluate the upper bound and its split over ``|x| < 1`` / ``|x| >= 1``."""
    grid = u.grid
    C = hardy_constant(e, alpha, grid.dim, c_hat)
    dens = _upper_lhs(u, e, alpha, sing_floor)
    inner = grid.radius < 1.0
    lhs = _fsum(dens)
    lhs_in, lhs_out = _fsum(dens[inner]), _fsum(dens[~inner])
    split = (_fsum(grid.quad_weights[inner]), _fsum(grid.quad_weights[~inner]))
    gn = luxemburg_norm(u, "gradient_H", e)
    kappa = e.p_minus if gn < 1.0 else e.q_plus
    rhs = C * gn**kappa
    passed = lhs <= rhs * (1.0 + UPPER_RTOL)
    return HardyReport(lhs, rhs, C, kappa, gn, lhs_in, lhs_out, split, passed)


def check_hardy_lower(
    u: GridFunction, e: ExponentData, alpha: float, sing_floor: float | None = None
) -> tuple[float, float, bool]:
    """``(lower_lhs, lower_rhs, passed)``; the zero function passes vacuously."""
    grid = u.grid
    M = float(grid.radius.max())
    tau = e.p_minus if M < 1.0 else e.q_plus
    tp, tq = _singular_densities(u, e, alpha, sing_floor)
    lhs = _fsum(grid.quad_weights * (tp + tq))
    n = luxemburg_norm(u, "musielak_H", e)
    if n == 0.0:
        return lhs, 0.0, True
    kappa = e.q_plus if n < 1.0 else e.p_minus
    rhs = M ** (-alpha * tau) * n**kappa
    return lhs, rhs, lhs > rhs - LOWER_ATOL


def full_report(u, e, alpha, c_hat=None, sing_floor=None) -> HardyReport:
    rep = check_hardy_upper(u, e, alpha, c_hat, sing_floor)
    lo, hi, ok = check_hardy_lower(u, e, alpha, sing_floor)
    M = float(u.grid.radius.max())
    rep.lower_lhs, rep.lower_rhs, rep.lower_passed = lo, hi, ok
    rep.M, rep.tau = M, (e.p_minus if M < 1.0 else e.q_plus)
    return rep


# -- calibration ---------------------------------------------------------------


def load_calibration() -> dict:
    with resources.files("dphase.data").joinpath(CALIBRATION_FILE).open("r") as fh:
        return json.load(fh)


def calibration_hash(settings: dict) -> str:
    blob = json.dumps(settings, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def calibrate_c_hat(
    e: ExponentData, alpha: float, samples: int = 10_000, seed: int = 0, progress=None
) -> dict:
    """Largest observed ``lhs / (C_1 |grad u|^kappa)`` times the 1.1 margin.

    ``C_1`` is the constant with ``c = 1``.  The sweep mixes the smooth random
    families with near-origin concentrations over four decades of amplitude so
    that both ``kappa`` branches are exercised.
    """
    grid = e.grid
    C1 = hardy_constant(e, alpha, grid.dim, c_hat=1.0)
    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_idx = -1
    fams = ("sine", "bump", "poly", "concentration")
    for i in range(int(samples)):
        u = random_function(grid, rng, families=fams, log_amplitude=(-2.0, 2.0))
        rep = check_hardy_upper(u, e, alpha, c_hat=1.0)
        if rep.rhs > 0:
            ratio = rep.lhs / rep.rhs
            if ratio > worst:
                worst, worst_idx = ratio, i
        if progress and (i + 1) % 1000 == 0:
            progress(i + 1, worst)
    for amp in (0.01, 0.1, 1.0, 10.0, 100.0):
        for _, u in concentration_family(grid, amplitude=amp):
            rep = check_hardy_upper(u, e, alpha, c_hat=1.0)
            if rep.rhs > 0:
                worst = max(worst, rep.lhs / rep.rhs)
    return {"max_ratio": worst, "argmax_sample": worst_idx, "c_hat": CALIBRATION_MARGIN * worst, "C1": C1}


def calibration_record(e: ExponentData, alpha: float, settings: dict, result: dict) -> dict:
    return {
        "version": CALIBRATION_VERSION,
        "c_hat": result["c_hat"],
        "margin": CALIBRATION_MARGIN,
        "max_ratio": result["max_ratio"],
        "argmax_sample": result["argmax_sample"],
        "settings": settings,
        "settings_hash": calibration_hash(settings),
        "constant_with_unit_c": result["C1"],
        "finite": math.isfinite(result["c_hat"]),
    }

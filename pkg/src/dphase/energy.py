"""Energy functional, its truncated variant and the discrete weak-form gradient.

The discrete energy is

    I(u) = sum_corners w_c (|G|^p / p + mu |G|^q / q)           gradient part
         + sum_nodes   w   (|u|^p / (p r^{a p}) + mu |u|^q / (q r^{a q}))
         - lam sum_nodes w F(x, u)

with ``G`` the corner gradients of :class:`~dphase.grid.CornerGradient` and
``r = max(|x|, sing_floor)``.  :meth:`Problem.gradient` is its exact
derivative, returned as the Riesz vector for the quadrature inner product.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .exponents import ExponentData
from .grid import Grid, GridFunction, _fsum
from .modular import luxemburg_norm
from .testfunctions import random_function

__all__ = [
    "EnergyBreakdown",
    "Nonlinearity",
    "Problem",
    "ProblemParams",
    "chipot_constant",
    "empirical_embedding_constant",
    "energy",
    "energy_truncated",
    "f_nonlinearity",
    "gradient",
]

NONLINEARITIES = ("pure_power", "perturbed_power")


@dataclass(frozen=True)
class ProblemParams:
    """Scalar parameters of the problem.

    ``theta``, ``c1`` and ``c2`` default to the values the chosen nonlinearity
    satisfies; ``sing_floor`` defaults to half the smallest grid spacing.
    ``lam = 0`` is accepted for degenerate checks.
    """

    lam: float
    alpha: float
    nonlinearity: str = "pure_power"
    theta: float | None = None
    sigma: float = 0.5
    c1: float | None = None
    c2: float | None = None
    K_ar: float = 1.0
    sing_floor: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.nonlinearity not in NONLINEARITIES:
            raise ValueError(f"nonlinearity must be one of {NONLINEARITIES}")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.K_ar <= 0:
            raise ValueError("K_ar must be > 0")
        if self.sing_floor is not None and self.sing_floor <= 0:
            raise ValueError("sing_floor must be > 0")

    def with_lam(self, lam: float) -> "ProblemParams":
        return replace(self, lam=float(lam))


@dataclass(frozen=True)
class EnergyBreakdown:
    gradient_part: float
    singular_part: float
    nonlinear_part: float
    lam: float
    total: float

    @classmethod
    def assemble(cls, grad_part, sing_part, nonlin_part, lam):
        return cls(grad_part, sing_part, nonlin_part, lam, grad_part + sing_part - lam * nonlin_part)

    def as_dict(self) -> dict:
        return asdict(self)


def _signed_power(t: np.ndarray, expo) -> np.ndarray:
    """``|t|^{expo - 2} t``, with value 0 at ``t = 0`` for every exponent."""
    a = np.abs(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(a > 0, np.sign(t) * np.exp((expo - 1.0) * np.log(np.where(a > 0, a, 1.0))), 0.0)
    return out


def _power(a: np.ndarray, expo) -> np.ndarray:
    """``a^expo`` for ``a >= 0`` with ``0^expo = 0``."""
    with np.errstate(divide="ignore"):
        return np.where(a > 0, np.exp(expo * np.log(np.where(a > 0, a, 1.0))), 0.0)


class Nonlinearity:
    """Superlinear reaction ``f(x, t)`` and its primitive ``F``.

    ``pure_power``       f = |t|^{beta-2} t
    ``perturbed_power``  f = |t|^{beta-2} t + sigma |t|^{s-2} t,  s = (q+ + beta-) / 2
    """

    def __init__(self, e: ExponentData, prm: ProblemParams):
        self.kind = prm.nonlinearity
        self.beta = e.beta_vals
        self.beta_minus = e.beta_minus
        self.q_plus = e.q_plus
        self.sigma = prm.sigma if self.kind == "perturbed_power" else 0.0
        self.s = 0.5 * (e.q_plus + e.beta_minus)
        natural_theta = e.beta_minus if self.kind == "pure_power" else min(self.s, e.beta_minus)
        self.theta = natural_theta if prm.theta is None else float(prm.theta)
        self.c1 = (self.sigma if prm.c1 is None else prm.c1)
        self.c2 = (1.0 + self.sigma if prm.c2 is None else prm.c2)

    def f(self, t, beta=None, truncated: bool = False) -> np.ndarray:
        beta = self.beta if beta is None else beta
        t = np.asarray(t, dtype=float)
        out = _signed_power(t, beta)
        if self.sigma:
            out = out + self.sigma * _signed_power(t, self.s)
        if truncated:
            out = np.where(t >= 0, out, 0.0)
        return out

    def F(self, t, beta=None, truncated: bool = False) -> np.ndarray:
        beta = self.beta if beta is None else beta
        t = np.asarray(t, dtype=float)
        a = np.abs(t)
        out = _power(a, beta) / beta
        if self.sigma:
            out = out + self.sigma * _power(a, self.s) / self.s
        if truncated:
            out = np.where(t >= 0, out, 0.0)
        return out

    def young_constant(self, eps: float) -> float:
        """``C_eps`` with ``F(x, t) <= eps |t|^{q+} + C_eps |t|^{beta(x)}``."""
        c = 1.0 / self.beta_minus
        if self.sigma == 0.0:
            return c
        if eps <= 0:
            raise ValueError("the perturbed nonlinearity needs eps > 0")
        # sigma |t|^s / s <= eps |t|^{q+} + K(x) |t|^{beta(x)} by weighted AM-GM
        b = np.unique(self.beta)
        a = (b - self.s) / (b - self.q_plus)
        epsp = eps * self.s / self.sigma
        k = (self.sigma / self.s) * (1.0 - a) * (epsp / a) ** (-a / (1.0 - a))
        return c + float(np.max(k))


def f_nonlinearity(t, beta, prm: ProblemParams, e: ExponentData | None = None, truncated=False):
    """Pointwise ``f(x, t)`` for a given ``beta(x)`` value (or array)."""
    if prm.nonlinearity == "pure_power":
        out = _signed_power(np.asarray(t, dtype=float), np.asarray(beta, dtype=float))
        return np.where(np.asarray(t) >= 0, out, 0.0) if truncated else out
    if e is None:
        raise ValueError("perturbed_power needs exponent data for q+ and beta-")
    return Nonlinearity(e, prm).f(t, beta, truncated)


class Problem:
    """Discrete energy on a fixed grid with cached coefficient fields."""

    def __init__(self, e: ExponentData, prm: ProblemParams):
        self.e = e
        self.prm = prm
        self.grid: Grid = e.grid
        g = self.grid
        self.cg = g.corner
        self.w = np.array(g.quad_weights)
        self.interior = g.interior
        self.nl = Nonlinearity(e, prm)
        floor = prm.sing_floor if prm.sing_floor is not None else 0.5 * min(g.spacing)
        self.sing_floor = float(floor)
        self.r = np.maximum(g.radius, self.sing_floor)
        a = prm.alpha
        self.p, self.q, self.mu = e.p_vals, e.q_vals, e.mu_vals
        self.rp = np.exp(-a * self.p * np.log(self.r))  # r^{-alpha p}
        self.rq = np.exp(-a * self.q * np.log(self.r))
        self.wc = np.array(self.cg.weights)
        self.pc = self.cg.at_corners(self.p)
        self.qc = self.cg.at_corners(self.q)
        self.muc = self.cg.at_corners(self.mu)

    @property
    def lam(self) -> float:
        return self.prm.lam

    def with_lam(self, lam: float) -> "Problem":
        return Problem(self.e, self.prm.with_lam(lam))

    # -- pieces ----------------------------------------------------------
    def _vals(self, u) -> np.ndarray:
        if isinstance(u, GridFunction):
            return u.values
        return np.asarray(u, dtype=float).reshape(self.grid.shape)

    def _grad_mag(self, vals):
        G = self.cg.apply(vals)
        return G, np.sqrt(np.sum(G**2, axis=1))

    def gradient_density(self, vals) -> np.ndarray:
        _, m = self._grad_mag(self._vals(vals))
        return _power(m, self.pc) / self.pc + self.muc * _power(m, self.qc) / self.qc

    def singular_density(self, vals, weighted_by_exponent: bool = True) -> np.ndarray:
        a = np.abs(self._vals(vals))
        if weighted_by_exponent:
            return _power(a, self.p) * self.rp / self.p + self.mu * _power(a, self.q) * self.rq / self.q
        return _power(a, self.p) * self.rp + self.mu * _power(a, self.q) * self.rq

    def breakdown(self, u, truncated: bool = False) -> EnergyBreakdown:
        vals = self._vals(u)
        gp = _fsum(self.wc * self.gradient_density(vals))
        sp = _fsum(self.w * self.singular_density(vals))
        npart = _fsum(self.w * self.nl.F(vals, truncated=truncated))
        return EnergyBreakdown.assemble(gp, sp, npart, self.lam)

    def total(self, u, truncated: bool = False) -> float:
        return self.breakdown(u, truncated).total

    def euclidean_gradient(self, u, truncated: bool = False) -> np.ndarray:
        """Partial derivatives of the discrete energy w.r.t. nodal values."""
        vals = self._vals(u)
        G, m = self._grad_mag(vals)
        coef = self._flux_coefficient(m)
        flux = (self.wc * coef)[:, None] * G
        dI = self.cg.adjoint(flux)
        nodal = (
            _signed_power(vals, self.p) * self.rp
            + self.mu * _signed_power(vals, self.q) * self.rq
            - self.lam * self.nl.f(vals, truncated=truncated)
        )
        dI = dI + self.w * nodal
        dI[~self.interior] = 0.0
        return dI

    def _flux_coefficient(self, m):
        # |G|^{p-2} + mu |G|^{q-2}, defined as 0 where G = 0
        with np.errstate(divide="ignore"):
            lm = np.log(np.where(m > 0, m, 1.0))
        return np.where(m > 0, np.exp((self.pc - 2) * lm) + self.muc * np.exp((self.qc - 2) * lm), 0.0)

    def singular_derivative(self, u) -> np.ndarray:
        """Nodal density of ``G'(u)``: ``|u|^{p-2}u / r^{a p} + mu |u|^{q-2}u / r^{a q}``."""
        vals = self._vals(u)
        return _signed_power(vals, self.p) * self.rp + self.mu * _signed_power(vals, self.q) * self.rq

    def gradient(self, u, truncated: bool = False) -> np.ndarray:
        """Riesz vector ``g`` with ``sum(w g phi) = <I'(u), phi>``; zero on the boundary."""
        dI = self.euclidean_gradient(u, truncated)
        g = np.zeros_like(dI)
        g[self.interior] = dI[self.interior] / self.w[self.interior]
        return g

    def pairing(self, g, phi) -> float:
        return _fsum(self.w * np.asarray(g) * self._vals(phi))

    def residual_norm(self, g) -> float:
        """Quadrature-weighted Euclidean norm of a Riesz vector."""
        return math.sqrt(_fsum(self.w * np.asarray(g) ** 2))

    def l2_norm(self, u) -> float:
        return math.sqrt(_fsum(self.w * self._vals(u) ** 2))

    def norm(self, u) -> float:
        """``|u|_{1,H,0} = |grad u|_H`` on corner gradients."""
        return luxemburg_norm((self.grid, self._vals(u)), "gradient_H", self.e)

    def secant_matrix(self, u, rel_floor: float = 1e-6):
        """SPD preconditioner: the operator frozen at ``u`` (Kacanov linearization)."""
        import scipy.sparse as sp

        vals = self._vals(u)
        _, m = self._grad_mag(vals)
        mf = np.maximum(m, rel_floor * max(float(m.max()), 1e-12))
        lm = np.log(mf)
        coef = np.exp((self.pc - 2) * lm) + self.muc * np.exp((self.qc - 2) * lm)
        K = self.cg.stiffness(coef)
        a = np.abs(vals)
        af = np.maximum(a, rel_floor * max(float(a.max()), 1e-12))
        la = np.log(af)
        diag = self.w * (np.exp((self.p - 2) * la) * self.rp + self.mu * np.exp((self.q - 2) * la) * self.rq)
        K = K + sp.diags(diag.ravel())
        idx = np.flatnonzero(self.interior.ravel())
        return K[idx][:, idx].tocsc()

    def laplacian_matrix(self):
        K = self.cg.stiffness()
        idx = np.flatnonzero(self.interior.ravel())
        return K[idx][:, idx].tocsc()


_PROBLEMS: dict = {}


def _problem(e: ExponentData, prm: ProblemParams) -> Problem:
    key = (id(e), prm)
    pb = _PROBLEMS.get(key)
    if pb is None or pb.e is not e:
        if len(_PROBLEMS) > 32:
            _PROBLEMS.clear()
        pb = _PROBLEMS[key] = Problem(e, prm)
    return pb


def energy(u, e: ExponentData, prm: ProblemParams) -> EnergyBreakdown:
    return _problem(e, prm).breakdown(u)


def gradient(u, e: ExponentData, prm: ProblemParams) -> GridFunction:
    pb = _problem(e, prm)
    return GridFunction(pb.grid, pb.gradient(u))


def energy_truncated(u, e: ExponentData, prm: ProblemParams) -> tuple[EnergyBreakdown, GridFunction]:
    """``I_+`` (reaction replaced by ``f_+``) and its Riesz gradient."""
    pb = _problem(e, prm)
    return pb.breakdown(u, truncated=True), GridFunction(pb.grid, pb.gradient(u, truncated=True))


def empirical_embedding_constant(
    grid: Grid, e: ExponentData, h_target, samples: int, seed: int = 0, families=("sine", "bump", "poly")
) -> float:
    """Largest observed ``|u|_h / |grad u|_H`` over seeded random functions.

    A lower bound for the embedding constant; 0 when ``samples == 0``.
    """
    rng = np.random.default_rng(seed)
    h = np.broadcast_to(np.asarray(h_target, dtype=float), grid.shape)
    best = 0.0
    for _ in range(int(samples)):
        u = random_function(grid, rng, families=families)
        gn = luxemburg_norm(u, "gradient_H", e)
        if gn > 0:
            best = max(best, luxemburg_norm(u, "plain_h", h=h) / gn)
    return best


def chipot_constant(s: float, resolution: int = 200001) -> float:
    """Brute-force sup of ``||a|^{s-2}a - |b|^{s-2}b| / (|a-b| (|a|+|b|)^{s-2})``.

    By homogeneity it suffices to take ``|a| + |b| = 1``; the sweep covers
    ``a = t``, ``b = +-(1 - |t|)`` and the diagonal limit ``(s-1) 2^{2-s}``.
    """
    # +-1/2 are appended exactly: for s <= 2 the sup sits at a = -b = 1/2
    t = np.concatenate([np.linspace(-1.0, 1.0, resolution), [-0.5, 0.5]])
    best = (s - 1.0) * 2.0 ** (2.0 - s)
    for sign in (1.0, -1.0):
        a, b = t, sign * (1.0 - np.abs(t))
        d = np.abs(a - b)
        ok = d > 1e-9
        num = np.abs(_signed_power(a[ok], s) - _signed_power(b[ok], s))
        best = max(best, float(np.max(num / d[ok])))
    return best

"""Modulars, Luxemburg norms and the Hoelder pairing.

Three modulars are supported, selected by ``kind``:

``plain_h``      rho(u)       = int |u|^h
``musielak_H``   rho_H(u)     = int |u|^p + mu |u|^q
``gradient_H``   rho_H(grad u) over the corner-gradient samples
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exponents import ExponentData
from .grid import Grid, GridFunction, _fsum

__all__ = [
    "KINDS",
    "BracketError",
    "ModularSamples",
    "RelationResult",
    "check_modular_norm_relations",
    "holder_pairing",
    "luxemburg_norm",
    "modular",
    "modular_grad_H",
    "modular_H",
    "modular_h",
    "samples_for",
]

KINDS = ("plain_h", "musielak_H", "gradient_H")
BISECTION_STEPS = 60
MAX_DOUBLINGS = 256


class BracketError(ArithmeticError):
    """Doubling/halving could not straddle rho = 1."""


class ModularSamples:
    """Weighted magnitudes with one or two power phases.

    ``rho(a / lam) = sum_k w_k sum_j c_jk (a_k / lam)^{e_jk}``.  Zero
    magnitudes and zero coefficients are dropped up front; logarithms are
    cached so each evaluation is a single ``exp`` per term.
    """

    def __init__(self, weights, magnitudes, phases):
        w0 = np.asarray(weights, dtype=float)
        w = np.ravel(w0)
        a = np.ravel(np.abs(np.broadcast_to(np.asarray(magnitudes, dtype=float), w0.shape)))
        keep = (a > 0) & (w > 0)
        loga = np.log(a[keep])
        self._terms = []
        for expo, coef in phases:
            e = np.ravel(np.broadcast_to(np.asarray(expo, dtype=float), w0.shape))[keep]
            c = np.ravel(np.broadcast_to(np.asarray(coef, dtype=float), w0.shape))[keep]
            wc = w[keep] * c
            nz = wc != 0
            self._terms.append((e[nz], np.log(wc[nz]) + e[nz] * loga[nz]))
        self.is_zero = not any(t[0].size for t in self._terms)

    def _parts(self, scale: float):
        ls = math.log(scale)
        return [np.exp(lw - e * ls) for e, lw in self._terms]

    def value(self, scale: float = 1.0) -> float:
        """Exactly rounded modular of ``a / scale``."""
        if self.is_zero:
            return 0.0
        return _fsum(np.concatenate(self._parts(scale)))

    def fast_value(self, scale: float = 1.0) -> float:
        # pairwise summation, used inside the bisection loop
        if self.is_zero:
            return 0.0
        return float(sum(np.sum(t) for t in self._parts(scale)))

    def exponent_range(self) -> tuple[float, float]:
        es = [e for e, _ in self._terms if e.size]
        if not es:
            return (1.0, 1.0)
        return (min(float(e.min()) for e in es), max(float(e.max()) for e in es))

    def norm(self) -> float:
        """Luxemburg norm: bracket from 1 by doubling/halving, then bisect."""
        if self.is_zero:
            return 0.0
        rho = self.fast_value
        lo = hi = 1.0
        if rho(1.0) > 1.0:
            for _ in range(MAX_DOUBLINGS):
                hi *= 2.0
                if rho(hi) <= 1.0:
                    break
            else:
                raise BracketError("rho(u / lam) > 1 after 256 doublings")
            lo = hi / 2.0
        else:
            for _ in range(MAX_DOUBLINGS):
                lo /= 2.0
                if rho(lo) > 1.0:
                    break
            else:
                raise BracketError("rho(u / lam) <= 1 after 256 halvings")
            hi = lo * 2.0
        for _ in range(BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if rho(mid) > 1.0:
                lo = mid
            else:
                hi = mid
        return hi


def _values(u):
    if isinstance(u, GridFunction):
        return u.grid, u.values
    grid, vals = u
    return grid, np.asarray(vals, dtype=float).reshape(grid.shape)


def samples_for(u, kind: str, e: ExponentData | None = None, h=None) -> ModularSamples:
    grid, vals = _values(u)
    if kind == "plain_h":
        if h is None:
            raise ValueError("plain_h needs an exponent field h")
        return ModularSamples(grid.quad_weights, vals, [(h, 1.0)])
    if e is None:
        raise ValueError(f"{kind} needs exponent data")
    if kind == "musielak_H":
        return ModularSamples(grid.quad_weights, vals, [(e.p_vals, 1.0), (e.q_vals, e.mu_vals)])
    if kind == "gradient_H":
        cg = grid.corner
        with np.errstate(over="ignore"):
            mag = np.sqrt(np.sum(cg.apply(vals) ** 2, axis=1))
        return ModularSamples(
            cg.weights,
            mag,
            [(cg.at_corners(e.p_vals), 1.0), (cg.at_corners(e.q_vals), cg.at_corners(e.mu_vals))],
        )
    raise ValueError(f"unknown modular kind {kind!r}; expected one of {KINDS}")


def modular_h(u, h) -> float:
    """``int |u|^{h(x)}``."""
    return samples_for(u, "plain_h", h=h).value()


def modular_H(u, e: ExponentData) -> float:
    """``int |u|^{p(x)} + mu(x) |u|^{q(x)}``."""
    return samples_for(u, "musielak_H", e).value()


def modular_grad_H(u, e: ExponentData) -> float:
    """``rho_H(|grad u|)`` on corner gradients."""
    return samples_for(u, "gradient_H", e).value()


def modular(u, kind: str, e: ExponentData | None = None, h=None) -> float:
    return samples_for(u, kind, e, h).value()


def luxemburg_norm(u, kind: str, e: ExponentData | None = None, h=None) -> float:
    """``inf{lam > 0 : rho(u / lam) <= 1}``; zero for the zero function.

    Raises :class:`BracketError` for overflow-scale inputs.
    """
    return samples_for(u, kind, e, h).norm()


def holder_pairing(u, v, h) -> tuple[float, float]:
    """``(int |u v|, 2 |u|_h |v|_{h'})`` with ``h' = h / (h - 1)``."""
    grid, uv = _values(u)
    _, vv = _values(v)
    h = np.broadcast_to(np.asarray(h, dtype=float), grid.shape)
    hc = h / (h - 1.0)
    lhs = _fsum(grid.quad_weights * np.abs(uv * vv))
    nu = ModularSamples(grid.quad_weights, uv, [(h, 1.0)]).norm()
    nv = ModularSamples(grid.quad_weights, vv, [(hc, 1.0)]).norm()
    return lhs, 2.0 * nu * nv


@dataclass
class RelationResult:
    name: str
    passed: bool
    slack: float

    def line(self) -> str:
        return f"{self.name:<34s} {'PASS' if self.passed else 'FAIL'}  slack={self.slack:+.3e}"


def _rel(x: float, *scale: float) -> float:
    return x / max(1.0, *(abs(s) for s in scale))


def _norm_vs_modular(prefix, norm, rho, lo_exp, hi_exp, tol):
    """Sign agreement and the two-sided power bounds for one (norm, rho) pair."""
    out = []
    if norm == 0.0:
        s_sign = 0.0 if rho == 0.0 else -abs(rho)
    elif norm == 1.0:
        s_sign = -abs(rho - 1.0)
    else:
        s_sign = (rho - 1.0) * math.copysign(1.0, norm - 1.0)
    out.append(RelationResult(f"{prefix} norm<1|=1|>1 <=> rho", s_sign >= -tol, s_sign))
    if norm > 1.0:
        low, high = norm**lo_exp, norm**hi_exp
        tag = ">1"
    else:
        low, high = norm**hi_exp, norm**lo_exp
        tag = "<=1"
    s_low = _rel(rho - low, rho, low)
    s_high = _rel(high - rho, rho, high)
    out.append(RelationResult(f"{prefix} lower bound (norm{tag})", s_low >= -tol, s_low))
    out.append(RelationResult(f"{prefix} upper bound (norm{tag})", s_high >= -tol, s_high))
    return out


def _limits(prefix, samples: ModularSamples, tol: float):
    """rho(u/n) -> 0 and rho(n u) -> inf monotonically along n = 2^k."""
    if samples.is_zero:
        return [RelationResult(f"{prefix} limits along u/n, n*u", True, 0.0)]
    lo_exp, _ = samples.exponent_range()
    factor = 2.0**-lo_exp
    rho0 = samples.value()
    slack = math.inf
    prev_d = prev_u = rho0
    for k in range(1, 11):
        d, g = samples.value(2.0**k), samples.value(2.0**-k)
        # each halving shrinks every term by at least 2^{-h-}; doubling grows it by 2^{h-}
        slack = min(slack, _rel(factor * prev_d - d, prev_d), _rel(g - prev_u / factor, g))
        prev_d, prev_u = d, g
    return [RelationResult(f"{prefix} limits along u/n, n*u", slack >= -tol, slack)]


def check_modular_norm_relations(u, e: ExponentData, tol: float = 1e-8) -> list[RelationResult]:
    """Evaluate the modular--norm relations for a single function.

    Covers the plain modular with ``h = p`` (sign agreement, power bounds with
    ``p-, p+``, limits), the two-phase modular (``rho_H(u / |u|_H) = 1``, sign
    agreement, power bounds with ``p-, q+``) and the same set for the gradient
    modular.  Slack is positive when a relation holds with room to spare.
    """
    out: list[RelationResult] = []
    ph = samples_for(u, "plain_h", h=e.p_vals)
    n_h = ph.norm()
    out += _norm_vs_modular("plain modular", n_h, ph.value(), e.p_minus, e.p_plus, tol)
    out += _limits("plain modular", ph, tol)
    for label, kind in (("two-phase modular", "musielak_H"), ("gradient modular", "gradient_H")):
        s = samples_for(u, kind, e)
        n = s.norm()
        if n > 0:
            unit = -abs(s.value(n) - 1.0)
        else:
            unit = 0.0
        out.append(RelationResult(f"{label} rho(u/|u|)=1", unit >= -tol, unit))
        out += _norm_vs_modular(label, n, s.value(), e.p_minus, e.q_plus, tol)
    return out

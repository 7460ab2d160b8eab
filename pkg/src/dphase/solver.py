"""Mountain-pass geometry certificate and a single-path mountain-pass solver.

The path is a ray from 0 through a point with negative energy, sampled at
``path_points`` nodes.  Each iteration takes the highest sample, refines it to
the exact maximum along the ray, and takes one Armijo-backtracking step on the
ray-maximum energy ``J(v) = max_t I(t v)``, in the spirit of the Choi-McKenna
algorithm.  The path is then re-laid through the new point.  Descent uses the
truncated energy ``I_+``; the final iterate is then confirmed with ``I``.

Descent directions are preconditioned by the operator frozen at the current
point (a Kacanov / secant linearization of the gradient and singular parts),
which is symmetric positive definite and therefore always yields a descent
direction for the full energy.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.sparse.linalg import splu

from .energy import EnergyBreakdown, Problem, ProblemParams, empirical_embedding_constant
from .exponents import ExponentData
from .grid import GridFunction
from .modular import luxemburg_norm
from .testfunctions import default_bump, random_function

__all__ = [
    "EndpointError",
    "GeometryCertificate",
    "GeometryConstants",
    "GeometryError",
    "MountainPassResult",
    "SignError",
    "SolverSettings",
    "certify_geometry",
    "find_endpoint",
    "geometry_constants",
    "mountain_pass_solve",
    "ps_monitor",
    "sweep_lambda",
]

log = logging.getLogger(__name__)

GAMMA_CAP = 0.9
EPS_SPLIT = 0.1
MAX_DOUBLINGS = 64


class GeometryError(RuntimeError):
    """Mountain-pass geometry could not be certified; carries the worst sample."""

    def __init__(self, msg, u=None, energy=None, constants=None):
        super().__init__(msg)
        self.u = u
        self.energy = energy
        self.constants = constants


class EndpointError(RuntimeError):
    pass


class SignError(RuntimeError):
    """The converged point has a negative part above the sign tolerance."""


@dataclass(frozen=True)
class SolverSettings:
    tol_residual: float = 1e-6
    tol_sign: float = 1e-8
    max_iters: int = 20000
    path_points: int = 21
    armijo_factor: float = 0.5
    armijo_c: float = 1e-4
    confirm_steps: int = 50
    geometry_samples: int = 200
    embedding_samples: int = 200
    max_backtracks: int = 60

    def __post_init__(self):
        if self.tol_residual <= 0 or self.tol_sign < 0:
            raise ValueError("tolerances must be positive")
        if self.path_points < 3:
            raise ValueError("path_points must be >= 3")
        if not 0 < self.armijo_factor < 1:
            raise ValueError("armijo_factor must lie in (0, 1)")
        if not 0 < self.armijo_c < 1:
            raise ValueError("armijo_c must lie in (0, 1)")
        if self.max_iters < 0 or self.confirm_steps < 0:
            raise ValueError("iteration counts must be >= 0")


# -- geometry -------------------------------------------------------------------


@dataclass(frozen=True)
class GeometryConstants:
    """Empirical embedding constants and the threshold ``lambda_hat``.

    ``c3 = C_{q+}^{q+}`` and ``c4 = max(C_beta^{beta-}, C_beta^{beta+})`` where
    ``C_h`` is the largest observed ``|u|_h / |grad u|_H``.
    """

    C_qplus: float
    C_beta: float
    c3: float
    c4: float
    eps: float
    C_eps: float
    lambda_hat: float
    samples: int
    seed: int

    def minorant(self, s, lam: float, q_plus: float, beta_minus: float):
        s = np.asarray(s, dtype=float)
        return (1.0 / q_plus - lam * self.eps * self.c3) * s**q_plus - lam * self.C_eps * self.c4 * s**beta_minus


def geometry_constants(e: ExponentData, prm: ProblemParams, samples: int = 200, seed: int = 0) -> GeometryConstants:
    pb = Problem(e, prm)
    nl = pb.nl
    eps = 0.0 if nl.sigma == 0.0 else EPS_SPLIT
    C_eps = nl.young_constant(eps)
    Cq = empirical_embedding_constant(e.grid, e, e.q_plus, samples, seed)
    Cb = empirical_embedding_constant(e.grid, e, e.beta_vals, samples, seed)
    c3 = Cq**e.q_plus
    c4 = max(Cb**e.beta_minus, Cb**e.beta_plus)
    denom = e.q_plus * (eps * c3 + C_eps * c4)
    lam_hat = math.inf if denom == 0 else 1.0 / denom
    return GeometryConstants(Cq, Cb, c3, c4, eps, C_eps, lam_hat, int(samples), int(seed))


@dataclass
class GeometryCertificate:
    gamma: float
    eta: float
    lambda_hat: float
    min_sample_energy: float
    samples: int
    constants: GeometryConstants

    def as_dict(self) -> dict:
        d = asdict(self)
        d["constants"] = asdict(self.constants)
        return d


def _sphere_samples(pb: Problem, radius: float, samples: int, seed: int):
    """Random functions rescaled to ``|grad u|_H = radius``."""
    rng = np.random.default_rng(seed)
    for _ in range(int(samples)):
        u = random_function(pb.grid, rng)
        n = pb.norm(u)
        yield u * (radius / n)


def certify_geometry(
    e: ExponentData,
    prm: ProblemParams,
    samples: int = 200,
    seed: int = 0,
    constants: GeometryConstants | None = None,
    embedding_samples: int = 200,
) -> GeometryCertificate:
    """Certify ``I >= eta > 0`` on the sphere ``|grad u|_H = gamma``.

    ``gamma`` maximizes the minorant on ``(0, 0.9]``.  Raises
    :class:`GeometryError` when ``lam >= lambda_hat`` (the minorant has no
    positive value) or when a sample falls below ``eta``.
    """
    k = constants or geometry_constants(e, prm, embedding_samples, seed)
    pb = Problem(e, prm)
    lam, qp, bm = prm.lam, e.q_plus, e.beta_minus
    if lam >= k.lambda_hat:
        worst_u, worst_E = None, math.inf
        for u in _sphere_samples(pb, GAMMA_CAP, samples, seed + 1):
            E = pb.total(u)
            if E < worst_E:
                worst_u, worst_E = u, E
        raise GeometryError(
            f"lambda={lam:.6g} >= lambda_hat={k.lambda_hat:.6g}: minorant has no positive level",
            worst_u,
            worst_E,
            k,
        )
    a = 1.0 / qp - lam * k.eps * k.c3
    b = lam * k.C_eps * k.c4
    if b == 0.0:
        gamma = GAMMA_CAP
    else:
        gamma = min(GAMMA_CAP, (a * qp / (b * bm)) ** (1.0 / (bm - qp)))
    eta = float(k.minorant(gamma, lam, qp, bm))
    if not eta > 0:
        raise GeometryError(f"minorant value {eta} at gamma={gamma} is not positive", constants=k)
    worst = math.inf
    for u in _sphere_samples(pb, gamma, samples, seed + 1):
        E = pb.total(u)
        worst = min(worst, E)
        if E < eta:
            raise GeometryError(f"sample energy {E:.6g} < eta={eta:.6g} on |u|={gamma:.6g}", u, E, k)
    return GeometryCertificate(gamma, eta, k.lambda_hat, worst, int(samples), k)


def find_endpoint(phi: GridFunction, e: ExponentData, prm: ProblemParams, gamma: float = 0.0):
    """Double ``t`` from 1 until ``I(t phi) < 0`` and ``|t phi| > max(1, gamma)``.

    Returns ``(t_star, u_hat, trace)`` with ``trace`` the ``(t, I(t phi))`` pairs.
    """
    if not np.any(phi.values != 0):
        raise EndpointError("phi must be nonzero")
    if np.any(phi.values < 0):
        raise EndpointError("phi must be nonnegative")
    pb = Problem(e, prm)
    n1 = pb.norm(phi)
    thresh = max(1.0, gamma)
    t = 1.0
    trace = []
    for _ in range(MAX_DOUBLINGS + 1):
        u = phi * t
        E = pb.total(u)
        trace.append((t, E))
        if E < 0 and t * n1 > thresh:
            return t, u, trace
        t *= 2.0
    raise EndpointError(f"I(t phi) >= 0 after {MAX_DOUBLINGS} doublings; check theta / (AR)")


# -- mountain pass --------------------------------------------------------------


@dataclass
class TraceRow:
    iteration: int
    index: int
    energy_before: float
    energy_after: float
    residual: float
    norm: float
    l2_norm: float
    pairing: float
    step: float
    phase: str


@dataclass
class MountainPassResult:
    solution: GridFunction
    energy: EnergyBreakdown
    residual_norm: float
    mp_level_estimate: float
    eta: float
    gamma: float
    lambda_hat: float
    lam: float
    endpoint_scale: float
    iterations: int
    trace: list = field(repr=False)
    positivity: tuple
    converged: bool
    u_minus_test: float = 0.0
    zero_interior_nodes: int = 0
    solution_norm: float = 0.0
    message: str = ""

    def summary(self) -> dict:
        return {
            "converged": self.converged,
            "energy": self.energy.as_dict(),
            "residual_norm": self.residual_norm,
            "mp_level_estimate": self.mp_level_estimate,
            "eta": self.eta,
            "gamma": self.gamma,
            "lambda_hat": self.lambda_hat,
            "lambda": self.lam,
            "endpoint_scale": self.endpoint_scale,
            "iterations": self.iterations,
            "positivity": {"min_node_value": self.positivity[0], "u_minus_sup": self.positivity[1]},
            "u_minus_test": self.u_minus_test,
            "zero_interior_nodes": self.zero_interior_nodes,
            "solution_norm": self.solution_norm,
            "message": self.message,
        }


class _Stepper:
    """Energy, gradient, ray maximization and preconditioned Armijo steps."""

    def __init__(self, pb: Problem, st: SolverSettings):
        self.pb = pb
        self.st = st
        self.idx = np.flatnonzero(pb.interior.ravel())

    def energy(self, v, truncated=True) -> float:
        return self.pb.total(v, truncated)

    def ray_slope(self, v, t, truncated=True) -> float:
        """``d/dt I(t v)``."""
        return float(np.sum(self.pb.euclidean_gradient(t * v, truncated) * v))

    def ray_max(self, v, lo, hi, truncated=True):
        """Maximize ``I(t v)`` over ``t`` in a bracket grown from ``[lo, hi]``.

        Returns ``(t, I(t v))``, or ``(nan, inf)`` when no sign change of the
        slope is found (the ray has no interior maximum).
        """
        for _ in range(MAX_DOUBLINGS):
            if self.ray_slope(v, lo, truncated) > 0:
                break
            lo *= 0.5
        else:
            return math.nan, math.inf
        for _ in range(MAX_DOUBLINGS):
            if self.ray_slope(v, hi, truncated) < 0:
                break
            lo, hi = hi, 2.0 * hi
        else:
            return math.nan, math.inf
        t = brentq(lambda x: self.ray_slope(v, x, truncated), lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
        return t, self.energy(t * v, truncated)

    def direction(self, v, dI):
        rhs = dI.ravel()[self.idx]
        try:
            lu = splu(self.pb.secant_matrix(v))
            x = lu.solve(rhs)
            if not np.all(np.isfinite(x)):
                raise ValueError
        except (RuntimeError, ValueError):
            x = splu(self.pb.laplacian_matrix()).solve(rhs)
        d = np.zeros(self.pb.grid.size)
        d[self.idx] = -x
        return d.reshape(self.pb.grid.shape)

    def _descent(self, v, truncated):
        dI = self.pb.euclidean_gradient(v, truncated)
        d = self.direction(v, dI)
        slope = float(np.sum(dI * d))
        if not slope < 0:
            d = -dI / np.where(self.pb.w > 0, self.pb.w, 1.0)
            slope = float(np.sum(dI * d))
        return d, slope

    def step(self, v, E, truncated=True):
        """Plain Armijo descent step on ``I``; returns ``(v_new, E_new, s)``."""
        d, slope = self._descent(v, truncated)
        s = 1.0
        for _ in range(self.st.max_backtracks):
            vn = v + s * d
            En = self.energy(vn, truncated)
            if En <= E + self.st.armijo_c * s * slope:
                return vn, En, s
            s *= self.st.armijo_factor
        return v, E, 0.0

    def minimax_step(self, w, level, truncated=True):
        """Armijo step on ``J(v) = max_t I(t v)`` from a ray maximizer ``w``.

        At a ray maximizer ``J'(w) = I'(w)``, so the sufficient-decrease test
        uses the slope of ``I``.  Returns ``(w_new, level_new, s)`` where
        ``w_new`` is again a ray maximizer.
        """
        d, slope = self._descent(w, truncated)
        s = 1.0
        for _ in range(self.st.max_backtracks):
            vn = w + s * d
            t, Jn = self.ray_max(vn, 0.5, 2.0, truncated)
            if Jn <= level + self.st.armijo_c * s * slope:
                return t * vn, Jn, s
            s *= self.st.armijo_factor
        return w, level, 0.0


def _ray_path(stp: _Stepper, v, T: float, m: int):
    """Path points ``(k / (m - 1)) T v``; ``T`` is doubled until ``I(T v) < 0``."""
    for _ in range(MAX_DOUBLINGS):
        if stp.energy(T * v) < 0:
            break
        T *= 2.0
    ts = [T * k / (m - 1) for k in range(m)]
    return ts, [0.0] + [stp.energy(t * v) for t in ts[1:]]


def mountain_pass_solve(
    e: ExponentData,
    prm: ProblemParams,
    settings: SolverSettings | None = None,
    phi: GridFunction | None = None,
    certificate: GeometryCertificate | None = None,
    seed: int = 0,
) -> MountainPassResult:
    """Run the single-path mountain-pass iteration; see the module docstring.

    The path is the segment from 0 to ``T v`` sampled at ``path_points``
    nodes, with ``v`` the current direction and ``I(T v) < 0``.  Each
    iteration takes the highest sample (lowest index on ties), refines it to
    the exact maximum on the adjacent segments, and moves it by one Armijo
    step on the ray-maximum energy; the path is then re-laid through the new
    point, which moves the neighbouring samples with it.

    Non-convergence is reported through ``converged=False``; a negative part
    above ``tol_sign`` at termination raises :class:`SignError`.
    """
    st = settings or SolverSettings()
    cert = certificate or certify_geometry(e, prm, st.geometry_samples, seed, embedding_samples=st.embedding_samples)
    pb = Problem(e, prm)
    grid = pb.grid
    phi = phi if phi is not None else default_bump(grid)
    t_star, u_hat, _ = find_endpoint(phi, e, prm, cert.gamma)
    stp = _Stepper(pb, st)

    m = st.path_points
    v, T = np.array(u_hat.values), 1.0
    trace: list[TraceRow] = []
    level = math.inf
    converged = False
    it = 0
    w = v
    res = math.inf
    while True:
        ts, E = _ray_path(stp, v, T, m)
        T = ts[-1]
        j = min(range(1, m - 1), key=lambda k: (-E[k], k))
        t, Ew = stp.ray_max(v, ts[j - 1] if j > 1 else ts[1] * 0.5, ts[j + 1])
        if not math.isfinite(Ew):
            t, Ew = ts[j], E[j]
        w = t * v
        level = Ew
        g = pb.gradient(w, truncated=True)
        res = pb.residual_norm(g)
        if res <= st.tol_residual:
            trace.append(_row(pb, it, j, Ew, Ew, res, w, g, 0.0, "mp"))
            converged = True
            break
        if it >= st.max_iters:
            break
        wn, En, s = stp.minimax_step(w, Ew)
        trace.append(_row(pb, it, j, Ew, En, res, w, g, s, "mp"))
        it += 1
        if s == 0.0:
            log.warning("Armijo backtracking failed at iteration %d", it)
            break
        # re-lay the path through the new point: direction wn, same index j
        v = wn
        T = (m - 1) / j
        log.info("iter %d  level %.12g  residual %.3e  step %g", it, En, res, s)

    u = w
    umin_sup = float(np.max(np.maximum(-u, 0.0)))
    g_trunc = pb.gradient(u, truncated=True)
    u_minus_test = abs(pb.pairing(g_trunc, np.maximum(-u, 0.0)))
    if converged and umin_sup > st.tol_sign:
        raise SignError(f"negative part {umin_sup:.3e} exceeds tol_sign={st.tol_sign:g}")
    if umin_sup <= st.tol_sign:
        u = np.maximum(u, 0.0)

    if converged:
        # confirmation with the untruncated energy; descent from a critical
        # point must not move it
        Eu = stp.energy(u, truncated=False)
        for k in range(st.confirm_steps):
            g = pb.gradient(u)
            res = pb.residual_norm(g)
            if res <= st.tol_residual:
                break
            un, En, s = stp.step(u, Eu, truncated=False)
            trace.append(_row(pb, it + k, -1, Eu, En, res, u, g, s, "confirm"))
            if s == 0.0:
                break
            u, Eu = un, En
    g = pb.gradient(u)
    res = pb.residual_norm(g)
    converged = converged and res <= st.tol_residual

    sol = grid.function(u)
    br = pb.breakdown(sol)
    interior_vals = sol.values[pb.interior]
    min_val = float(interior_vals.min())
    zeros = int(np.sum(interior_vals <= st.tol_sign))
    msg = "converged" if converged else f"residual {res:.3e} after {it} iterations"
    return MountainPassResult(
        solution=sol,
        energy=br,
        residual_norm=res,
        mp_level_estimate=level,
        eta=cert.eta,
        gamma=cert.gamma,
        lambda_hat=cert.lambda_hat,
        lam=prm.lam,
        endpoint_scale=t_star,
        iterations=it,
        trace=trace,
        positivity=(min_val, umin_sup),
        converged=converged,
        u_minus_test=u_minus_test,
        zero_interior_nodes=zeros,
        solution_norm=pb.norm(sol),
        message=msg,
    )


def _row(pb: Problem, it, j, Eb, Ea, res, v, g, s, phase) -> TraceRow:
    return TraceRow(it, j, Eb, Ea, res, pb.norm(v), pb.l2_norm(v), pb.pairing(g, v), s, phase)


# -- Palais-Smale monitor -------------------------------------------------------


@dataclass
class PSReport:
    bounded: bool
    max_abs_energy: float
    max_norm: float
    min_slack: float
    violations: list
    passed: bool

    def as_dict(self) -> dict:
        return asdict(self)


def ps_monitor(trace, q_plus: float, p_minus: float, theta: float, c0: float | None = None, tol: float = 1e-12):
    """Check ``(1/q+ - 1/theta) |u|^kappa <= c0 + |u|_2 |I'(u)| / theta`` on every row.

    ``kappa = p-`` when ``|u| >= 1`` and ``q+`` otherwise; ``c0`` defaults to
    the largest ``|I|`` along the trace.  Rows are :class:`TraceRow` or dicts
    with ``energy_before, norm, l2_norm, residual``.
    """
    rows = [r if isinstance(r, dict) else asdict(r) for r in trace]
    if not rows:
        raise ValueError("empty trace")
    energies = [r["energy_before"] for r in rows]
    max_E = max(abs(x) for x in energies)
    c0 = max_E if c0 is None else c0
    coef = 1.0 / q_plus - 1.0 / theta
    slack = math.inf
    bad = []
    for i, r in enumerate(rows):
        n = r["norm"]
        kappa = p_minus if n >= 1.0 else q_plus
        lhs = coef * n**kappa
        rhs = c0 + r["l2_norm"] * r["residual"] / theta
        sl = rhs - lhs
        slack = min(slack, sl)
        if sl < -tol * max(1.0, abs(rhs)):
            bad.append(i)
    norms = [r["norm"] for r in rows]
    bounded = all(math.isfinite(x) for x in energies + norms)
    return PSReport(bounded, max_E, max(norms), slack, bad, bounded and not bad)


# -- sweep ----------------------------------------------------------------------


def sweep_lambda(e: ExponentData, prm: ProblemParams, lambdas, settings: SolverSettings | None = None, seed: int = 0):
    """One independent solve per ``lambda``; failures are recorded, not raised."""
    lambdas = list(lambdas)
    if not lambdas:
        raise ValueError("empty lambda list")
    st = settings or SolverSettings()
    k = geometry_constants(e, prm, st.embedding_samples, seed)
    rows = []
    for lam in lambdas:
        p = prm.with_lam(lam)
        row = {"lambda": float(lam), "lambda_hat": k.lambda_hat, "converged": False, "energy": None,
               "norm": None, "residual": None, "error": None}
        try:
            cert = certify_geometry(e, p, st.geometry_samples, seed, constants=k)
            res = mountain_pass_solve(e, p, st, certificate=cert, seed=seed)
            row.update(converged=res.converged, energy=res.energy.total, norm=res.solution_norm,
                       residual=res.residual_norm)
        except (GeometryError, EndpointError, SignError) as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows

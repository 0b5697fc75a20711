"""Probabilistic shaping by successive convex programming.

Each outer step linearizes the BER bound around the current priors and
minimizes that affine surrogate over the simplex subject to the power cap
and the entropy floor. Stationarity of the Lagrangian forces the Gibbs form
``p_m ∝ exp(-(c_m + lam1 |x_m|^2) / mu)`` (``mu = lam3 / ln 2``), which
leaves two scalar equations, power and entropy, solved by safeguarded
Newton iterations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..analysis import Link, ber_upper_bound, grad_ber_wrt_priors
from ..constellation import IDENTITY, ShapingParams, entropy, shape_symbols
from .result import DesignError, DesignResult, NonConvergenceError, PSProblem

LN2 = math.log(2.0)
_ROOT_TOL = 1e-14
_MAX_NEWTON = 200


@dataclass(frozen=True)
class AffineSurrogate:
    """First-order model  constant + gradient . (p - anchor)."""

    constant: float
    gradient: np.ndarray
    anchor: np.ndarray

    def __call__(self, p) -> float:
        return float(self.constant + self.gradient @ (np.asarray(p) - self.anchor))


def linearize_bound(c, link: Link, p_anchor, shaping: ShapingParams | None = None) -> AffineSurrogate:
    p_anchor = np.asarray(p_anchor, dtype=float)
    cc = c.with_priors(p_anchor)
    return AffineSurrogate(ber_upper_bound(cc, link, shaping),
                           grad_ber_wrt_priors(cc, link, shaping), p_anchor.copy())


@dataclass
class P1aSolution:
    p: np.ndarray
    lam1: float
    lam2: float
    lam3: float
    kkt_residual: float
    support: np.ndarray
    degenerate: bool = False


@dataclass
class _Gibbs:
    logp: np.ndarray
    p: np.ndarray
    mu: float
    a: np.ndarray

    @property
    def entropy_nats(self) -> float:
        return float(-np.dot(self.p, self.logp))


def _gibbs(a: np.ndarray, mu: float) -> _Gibbs:
    z = -(a - a.min()) / mu
    logp = z - math.log(np.exp(z).sum())  # max(z) = 0 so the sum is >= 1
    return _Gibbs(logp, np.exp(logp), mu, a)


def _cov(p, u, v) -> float:
    return float(np.dot(p, (u - np.dot(p, u)) * (v - np.dot(p, v))))


def _safeguarded_root(f, lo, hi, x0, increasing: bool, tol=_ROOT_TOL):
    """Newton with bisection fallback. ``f(x) -> (value, slope)``; root bracketed in [lo, hi]."""
    x = min(max(x0, lo), hi)
    for _ in range(_MAX_NEWTON):
        val, slope = f(x)
        if abs(val) < tol:
            return x
        if (val < 0) == increasing:
            lo = x
        else:
            hi = x
        if hi - lo <= 1e-15 * max(1.0, abs(x)):
            return x
        step = x - val / slope if slope != 0 and np.isfinite(slope) else None
        x = step if step is not None and lo < step < hi else 0.5 * (lo + hi)
    return x


def _entropy_match(a: np.ndarray, R: float) -> _Gibbs:
    """Gibbs law on scores ``a`` whose entropy (nats) equals ``R``; mu -> 0 if already above.

    Flat scores give the uniform law with ``mu = 0``: the entropy floor is slack there.
    """
    b = a - a.min()
    spread = float(b.max())
    if spread == 0.0:
        g = _gibbs(a, 1.0)
        g.mu = 0.0
        return g
    t_lo = math.log(spread * 1e-13)
    g_lo = _gibbs(a, math.exp(t_lo))
    if g_lo.entropy_nats >= R:
        return g_lo
    t_hi = math.log(spread)
    while _gibbs(a, math.exp(t_hi)).entropy_nats < R:
        t_hi += 2.0
        if t_hi > 700:
            raise DesignError("entropy target unreachable")

    def f(t):
        g = _gibbs(a, math.exp(t))
        return g.entropy_nats - R, _cov(g.p, b, b) / g.mu ** 2

    t = _safeguarded_root(f, t_lo, t_hi, 0.5 * (t_lo + t_hi), increasing=True)
    return _gibbs(a, math.exp(t))


def _kkt_solve(c: np.ndarray, e: np.ndarray, R_bits: float, cap: float):
    K = c.size
    R = R_bits * LN2
    if R > math.log(K) + 1e-12:
        raise DesignError("rate floor exceeds the entropy of the support")
    if R >= math.log(K) - 1e-12:
        return None
    e_spread = float(e.max() - e.min())

    def inner(lam1):
        return _entropy_match(c + lam1 * e, R)

    g0 = inner(0.0)
    if float(g0.p @ e) <= cap or e_spread < 1e-14:
        if float(g0.p @ e) > cap + 1e-12:
            raise DesignError("power cap infeasible at this rate floor")
        return 0.0, g0
    lam_hi = 1.0
    while float(inner(lam_hi).p @ e) > cap:
        lam_hi *= 4.0
        if lam_hi > 1e12:
            raise DesignError("power cap infeasible at this rate floor")

    def f(lam):
        g = inner(lam)
        va = _cov(g.p, g.a, g.a)
        ve = _cov(g.p, e, e)
        cae = _cov(g.p, g.a, e)
        if g.mu == 0.0:
            return float(g.p @ e) - cap, float("nan")
        slope = -(ve - (cae * cae / va if va > 0 else 0.0)) / g.mu
        return float(g.p @ e) - cap, slope

    lam = _safeguarded_root(f, 0.0, lam_hi, 0.5 * lam_hi, increasing=False)
    return lam, inner(lam)


def kkt_residual(c, e, R_bits, cap, p, logp, lam1, lam2, lam3) -> float:
    """Infinity norm of stationarity, primal feasibility and complementary slackness."""
    stat = c + lam1 * e + lam2 + lam3 * (1.0 / LN2 + logp / LN2)
    power = float(p @ e) - cap
    H = float(-np.dot(p, logp)) / LN2
    res = [np.max(np.abs(stat)) if stat.size else 0.0, abs(p.sum() - 1.0),
           abs(power) if lam1 > 0 else max(power, 0.0),
           abs(H - R_bits) if lam3 > 1e-300 else max(R_bits - H, 0.0)]
    return float(max(res))


def solve_p1a(surrogate: AffineSurrogate, problem: PSProblem, p_init=None,
              shaping: ShapingParams | None = None) -> P1aSolution:
    """Minimize the affine surrogate under simplex, power and entropy constraints.

    Coordinates that land below ``problem.p_min`` are dropped and the system
    is re-solved on the remaining support.
    """
    syms = problem.constellation.symbols
    if shaping is not None:
        syms = shape_symbols(syms, shaping)
    e_all = np.abs(syms) ** 2
    c_all = np.asarray(surrogate.gradient, float)
    M = c_all.size
    R = problem.rate_floor
    cap = problem.power_cap
    if p_init is not None:
        p0 = np.asarray(p_init, float)
        if p0 @ e_all > cap + 1e-9 or entropy(p0) < R - 1e-9:
            raise DesignError("initial priors are infeasible")
    support = np.arange(M)
    while True:
        c, e = c_all[support], e_all[support]
        sol = _kkt_solve(c, e, R, cap)
        p = np.zeros(M)
        if sol is None:
            # entropy floor equals log2 of the support size: uniform is the only feasible point
            p[support] = 1.0 / support.size
            H = entropy(p)
            resid = max(abs(p.sum() - 1.0), max(p @ e_all - cap, 0.0), max(R - H, 0.0))
            if p @ e_all > cap + 1e-9:
                raise DesignError("uniform law on the support violates the power cap")
            return P1aSolution(p, 0.0, float("nan"), float("nan"), resid, support, degenerate=True)
        lam1, g = sol
        p[support] = g.p
        small = support[g.p < problem.p_min]
        keep = support[g.p >= problem.p_min]
        if small.size and math.log2(keep.size) >= R - 1e-12:
            support = keep
            continue
        lam3 = g.mu * LN2
        logp = g.logp
        lam2 = -float(np.mean(c + lam1 * e + lam3 * (1.0 / LN2 + logp / LN2)))
        resid = kkt_residual(c, e, R, cap, g.p, logp, lam1, lam2, lam3)
        return P1aSolution(p, lam1, lam2, lam3, resid, support)


def _bound(c, link, p, shaping):
    return ber_upper_bound(c.with_priors(p), link, shaping)


def design_ps(problem: PSProblem, link: Link, p_init=None,
              shaping: ShapingParams | None = None, strict: bool = False) -> DesignResult:
    """Successive convex programming on the prior vector.

    A surrogate minimizer that raises the true bound is pulled back toward
    the anchor (step halved up to 20 times); the loop stops once accepted
    iterates move less than ``problem.tolerance`` in l2 norm.
    """
    c = problem.constellation
    M = c.M
    s = shaping if shaping is not None else IDENTITY
    syms = shape_symbols(c.symbols, s)
    e = np.abs(syms) ** 2
    p = np.full(M, 1.0 / M) if p_init is None else np.asarray(p_init, float).copy()
    if p @ e > problem.power_cap + 1e-9 or entropy(p) < problem.rate_floor - 1e-9:
        raise DesignError("initial priors are infeasible")
    f = _bound(c, link, p, s)
    trace = [f]
    records = [dict(iter=0, bound=f, entropy=entropy(p), power=float(p @ e), kkt_residual=0.0)]
    last = None
    converged = False
    it = 0
    for it in range(1, problem.max_iters + 1):
        sur = linearize_bound(c, link, p, s)
        sol = solve_p1a(sur, problem, p, s)
        last = sol
        q = sol.p
        fq = _bound(c, link, q, s)
        t = 1.0
        for _ in range(20):
            if fq <= f:
                break
            t *= 0.5
            q = p + t * (sol.p - p)
            fq = _bound(c, link, q, s)
        else:
            if fq > f:
                converged = True
                it -= 1
                break
        eps = float(np.linalg.norm(q - p))
        p, f = q, fq
        trace.append(f)
        records.append(dict(iter=it, bound=f, entropy=entropy(p), power=float(p @ e),
                            kkt_residual=sol.kkt_residual))
        if eps < problem.tolerance:
            converged = True
            break
    if not converged and strict:
        raise NonConvergenceError(f"SCP did not converge in {problem.max_iters} iterations")
    mult = None if last is None else (last.lam1, last.lam2, last.lam3)
    return DesignResult(priors=p, shaping=s, bound_value=f,
                        kkt_residual=0.0 if last is None else last.kkt_residual,
                        iterations=it, trace=trace, converged=converged,
                        multipliers=mult, records=records, scheme="ps")

"""Geometric shaping: search over the translation/rotation pair (zeta, theta).

For fixed priors the average power of the shaped set is affine in zeta,
``P = P0 + zeta * Re(exp(2i theta) sum p x^2)``, so the power cap becomes a
theta-dependent upper limit on zeta and every iterate is projected onto
``0 <= zeta <= zeta_max(theta)``. Objective values are normalized by the
value at the starting point so stopping thresholds do not depend on the
SNR regime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..analysis import Link, ber_upper_bound, grad_ber_wrt_shaping
from ..constellation import IDENTITY, Constellation, ShapingParams, entropy
from .result import DesignError, DesignResult

ZETA_MAX = 1.0 - 1e-6
TWO_PI = 2.0 * math.pi
DEFAULT_ZETAS = tuple(round(0.1 * k, 1) for k in range(1, 10))
DEFAULT_THETAS = tuple(k * math.pi / 8 for k in range(8))


@dataclass(frozen=True)
class _PowerLimit:
    P0: float
    S: complex
    cap: float

    @classmethod
    def of(cls, c: Constellation, cap: float) -> _PowerLimit:
        p = c.priors
        return cls(float(p @ np.abs(c.symbols) ** 2), complex(p @ c.symbols ** 2), cap)

    def zeta_max(self, theta: float) -> float:
        D = (np.exp(2j * theta) * self.S).real
        if D <= 0:
            return ZETA_MAX
        return float(min(ZETA_MAX, max(0.0, (self.cap - self.P0) / D)))

    def power(self, zeta: float, theta: float) -> float:
        return self.P0 + zeta * (np.exp(2j * theta) * self.S).real


class _Objective:
    def __init__(self, c: Constellation, link: Link, limit: _PowerLimit):
        self.c, self.link, self.limit = c, link, limit
        self.scale = 1.0
        self.evals = 0

    def project(self, x) -> np.ndarray:
        th = min(max(float(x[1]), 0.0), TWO_PI)
        z = min(max(float(x[0]), 0.0), self.limit.zeta_max(th))
        return np.array([z, th])

    def value(self, x) -> float:
        self.evals += 1
        return ber_upper_bound(self.c, self.link, ShapingParams(x[0], x[1])) / self.scale

    def grad(self, x) -> np.ndarray:
        return np.array(grad_ber_wrt_shaping(self.c, self.link, ShapingParams(x[0], x[1]))) / self.scale

    def free_mask(self, x, g) -> np.ndarray:
        """Coordinates not pinned at a bound by an outward-pointing gradient."""
        zmax = self.limit.zeta_max(x[1])
        pinned = [(x[0] <= 1e-12 and g[0] > 0) or (x[0] >= zmax - 1e-12 and g[0] < 0),
                  (x[1] <= 0.0 and g[1] > 0) or (x[1] >= TWO_PI and g[1] < 0)]
        return ~np.array(pinned)

    def pg_norm(self, x, g) -> float:
        return float(np.linalg.norm(x - self.project(x - g)))


def _gradient_descent(obj: _Objective, x, max_iter, gtol, xtol):
    f = obj.value(x)
    t = 0.1
    it = 0
    for it in range(1, max_iter + 1):
        g = obj.grad(x)
        if obj.pg_norm(x, g) < gtol:
            return x, f, it, True
        gn = float(np.linalg.norm(g))
        t = max(t, 1e-12) / gn if gn > 0 else t
        step_len = t * gn
        while True:
            xn = obj.project(x - (step_len / gn) * g)
            moved = float(np.linalg.norm(xn - x))
            if moved < xtol:
                return x, f, it, True
            fn = obj.value(xn)
            if fn <= f - 1e-4 * float(g @ (x - xn)):
                break
            step_len *= 0.5
        x, f = xn, fn
        t = 2.0 * step_len
    return x, f, it, False


def _reflect(z, th):
    if z < 0:
        z = -z
    if z > ZETA_MAX:
        z = 2 * ZETA_MAX - z
    if th < 0:
        th = -th
    if th > TWO_PI:
        th = 2 * TWO_PI - th
    return z, th


def _dogleg(g, B, radius):
    sn = -np.linalg.solve(B, g)
    if np.linalg.norm(sn) <= radius:
        return sn
    gBg = float(g @ B @ g)
    sc = -(float(g @ g) / gBg) * g
    if np.linalg.norm(sc) >= radius:
        return -radius * g / np.linalg.norm(g)
    d = sn - sc
    a, b, c = d @ d, 2 * sc @ d, sc @ sc - radius ** 2
    tau = (-b + math.sqrt(b * b - 4 * a * c)) / (2 * a)
    return sc + tau * d


def _trust_region(obj: _Objective, x, max_iter, gtol, xtol, radius=0.1):
    # quadratic model with a BFGS curvature estimate; a step leaving the box
    # is either clipped or reflected, whichever the model prefers
    f = obj.value(x)
    g = obj.grad(x)
    B = np.eye(2) * max(float(np.linalg.norm(g)), 1e-12) / radius
    it = 0
    for it in range(1, max_iter + 1):
        if obj.pg_norm(x, g) < gtol or radius < xtol:
            return x, f, it, True
        free = obj.free_mask(x, g)
        if not free.any():
            return x, f, it, True
        step = np.zeros(2)
        step[free] = _dogleg(g[free], B[np.ix_(free, free)], radius)
        # candidates: step clipped at the bound, and step reflected off it
        best = None
        for xn in (obj.project(x + step), obj.project(_reflect(*(x + step)))):
            sc = xn - x
            pr = -float(g @ sc + 0.5 * sc @ B @ sc)
            if best is None or pr > best[2]:
                best = (xn, sc, pr)
        xn, s, pred = best
        if pred <= 0 or float(np.linalg.norm(s)) < xtol:
            radius *= 0.25
            continue
        fn = obj.value(xn)
        ratio = (f - fn) / pred
        if ratio > 0.1 and fn <= f:
            gn = obj.grad(xn)
            y = gn - g
            sy = float(s @ y)
            if sy > 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(y)):
                Bs = B @ s
                B = B - np.outer(Bs, Bs) / float(s @ Bs) + np.outer(y, y) / sy
            x, f, g = xn, fn, gn
            if ratio > 0.75 and np.linalg.norm(s) >= 0.9 * radius:
                radius = min(2.0 * radius, 1.0)
        if ratio < 0.25:
            radius *= 0.25
    return x, f, it, False


_METHODS = {"trust_region": _trust_region, "gradient_descent": _gradient_descent}


def default_starts() -> list[ShapingParams]:
    # gamma is unchanged by theta -> theta + pi, so half a turn suffices
    return [ShapingParams(z, t) for z in DEFAULT_ZETAS for t in DEFAULT_THETAS]


def design_gs(c: Constellation, link: Link, p_fixed=None, init: ShapingParams | None = None,
              method: str = "trust_region", starts=None, power_cap: float = 1.0,
              max_iter: int = 500, gtol: float = 1e-6, xtol: float = 1e-9) -> DesignResult:
    """Minimize the BER bound over (zeta, theta) for fixed priors.

    Runs the local method from ``init`` and from each extra start (``starts``
    defaults to a 9 x 8 grid; pass ``[]`` for a single start) and returns the
    best point found. Ties keep the earliest start.
    """
    if method not in _METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {sorted(_METHODS)}")
    if p_fixed is not None:
        c = c.with_priors(p_fixed)
    init = IDENTITY if init is None else init
    limit = _PowerLimit.of(c, power_cap)
    if limit.power(init.zeta, init.theta) > power_cap + 1e-9:
        raise DesignError("initial shaping violates the power cap")
    obj = _Objective(c, link, limit)
    f_init = ber_upper_bound(c, link, init)
    obj.scale = f_init if f_init > 0 else 1.0
    candidates = [init] + list(default_starts() if starts is None else starts)
    solve = _METHODS[method]
    best = (1.0, np.array([init.zeta, init.theta]), 0, True)
    total = 0
    for k, s0 in enumerate(candidates):
        x0 = np.array([s0.zeta, s0.theta]) if k == 0 else obj.project([s0.zeta, s0.theta])
        x, f, it, ok = solve(obj, x0, max_iter, gtol, xtol)
        total += it
        if f < best[0] or k == 0:
            best = (f, x, it, ok)
    f, x, it, ok = best
    shaping = ShapingParams(float(x[0]), float(x[1]))
    value = ber_upper_bound(c, link, shaping)
    if value > f_init:
        shaping, value = init, f_init
    power = limit.power(shaping.zeta, shaping.theta)
    rec = [dict(iter=0, bound=f_init, entropy=entropy(c.priors),
                power=limit.power(init.zeta, init.theta), kkt_residual=0.0),
           dict(iter=1, bound=value, entropy=entropy(c.priors), power=power, kkt_residual=0.0)]
    return DesignResult(priors=c.priors.copy(), shaping=shaping, bound_value=value,
                        iterations=total, trace=[f_init, value], converged=ok,
                        records=rec, scheme="gs")

"""Pairwise error probabilities, BER union bounds, error floor and gradients.

Shaping is handled in the pre-channel frame: the transmitted point is
``v = A(zeta) R(theta) x`` and the channel multiplies it by ``g``, so the
received difference is ``xi = g * (A R d)``. The quadratic form
``xi^T G xi`` is evaluated as ``u^T (C_g^T G C_g) u`` with ``u = A R d`` and
``C_g`` the real 2x2 matrix of multiplication by ``g``; for ``g = 1`` this is
exactly ``d^T R^T A^T G A R d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .constellation import Constellation, ShapingParams, entropy
from .noise import (ChannelState, DistortionProfile, NoiseIQ, aggregate_noise,
                    compose_distortion, iq_statistics)

PRIOR_FLOOR = 1e-12
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def qfunc(x):
    """Gaussian tail probability Q(x) = P[N(0,1) > x]."""
    out = ndtr(-np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def _phi(x):
    return _INV_SQRT_2PI * np.exp(-0.5 * np.square(x))


@dataclass(frozen=True)
class Link:
    """Noise statistics seen by the detector together with the channel they were drawn for."""

    noise_iq: NoiseIQ
    channel: ChannelState

    @classmethod
    def from_profile(cls, profile: DistortionProfile, channel: ChannelState) -> Link:
        return cls(iq_statistics(aggregate_noise(profile, channel)), channel)

    @property
    def alpha(self) -> float:
        return self.channel.alpha

    @property
    def rho(self) -> float:
        return self.noise_iq.rho

    def frame_matrix(self) -> np.ndarray:
        """G expressed on pre-channel differences: C_g^T G C_g."""
        g = self.channel.g
        Cg = np.array([[g.real, -g.imag], [g.imag, g.real]])
        return Cg.T @ self.noise_iq.check_regular().G @ Cg


def _rotated(d: np.ndarray, theta: float):
    c, s = math.cos(theta), math.sin(theta)
    return d.real * c - d.imag * s, d.real * s + d.imag * c


def _gamma_parts(d: np.ndarray, Gf: np.ndarray, s: ShapingParams | None):
    """gamma and its (zeta, theta) partials for complex differences ``d``."""
    zeta, theta = (0.0, 0.0) if s is None else (s.zeta, s.theta)
    a, b, c = Gf[0, 0], Gf[0, 1], Gf[1, 1]
    rI, rQ = _rotated(d, theta)
    root = math.sqrt(1.0 - zeta * zeta)
    gamma = (1 + zeta) * a * rI * rI + (1 - zeta) * c * rQ * rQ + 2 * b * root * rI * rQ
    return gamma, (a, b, c, rI, rQ, zeta, root)


def gamma_mn(d_mn, link: Link, s: ShapingParams | None = None):
    """Distance form gamma for a (shaped) symbol difference, scalar or array."""
    d = np.asarray(d_mn, dtype=complex)
    gamma, _ = _gamma_parts(d, link.frame_matrix(), s)
    return float(gamma) if gamma.ndim == 0 else gamma


def pep(p_m: float, p_n: float, gamma: float, rho_z: float, alpha: float) -> float:
    """MAP pairwise error probability of deciding n when m was sent."""
    if p_m <= 0 or p_n <= 0:
        raise ValueError("pairwise error probability needs positive priors")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    one_m = 1.0 - rho_z * rho_z
    arg = (2 * one_m * math.log(p_m / p_n) + alpha * gamma) / (2 * math.sqrt(one_m * alpha * gamma))
    return qfunc(arg)


@dataclass
class _Pairs:
    m: np.ndarray
    n: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray
    log_ratio: np.ndarray
    omega: np.ndarray
    parts: tuple
    norm: float


def _pairs(c: Constellation, link: Link, s: ShapingParams | None, priors=None) -> _Pairs:
    p = c.priors if priors is None else np.asarray(priors, float)
    sup = np.flatnonzero(p >= PRIOR_FLOOR)
    if sup.size < 2:
        raise ValueError("bound needs at least two symbols with positive prior")
    mm, nn = np.meshgrid(sup, sup, indexing="ij")
    off = mm != nn
    m, n = mm[off], nn[off]
    d = c.symbols[m] - c.symbols[n]
    gamma, parts = _gamma_parts(d, link.frame_matrix(), s)
    if np.any(gamma <= 0):
        raise ValueError("coincident symbols: gamma vanishes for some pair")
    beta = math.sqrt(1.0 - link.rho ** 2) / np.sqrt(link.alpha * gamma)
    lr = np.log(p[m]) - np.log(p[n])
    omega = beta * lr + 0.5 / beta
    return _Pairs(m, n, gamma, beta, lr, omega, parts, 1.0 / math.log2(c.M))


def ber_upper_bound(c: Constellation, link: Link, s: ShapingParams | None = None) -> float:
    """Prior-weighted union bound on BER (gray mapping assumed).

    ``c`` holds the reference symbols x_m; shaping ``s`` is applied on top.
    Pairs that involve a prior below 1e-12 are left out of the sum.
    """
    pr = _pairs(c, link, s)
    return float(pr.norm * np.sum(c.priors[pr.m] * ndtr(-pr.omega)))


def throughput_lower_bound(c: Constellation, link: Link, s: ShapingParams | None = None) -> float:
    ub = min(ber_upper_bound(c, link, s), 1.0)
    return (1.0 - ub) * entropy(c.priors)


def grad_ber_wrt_priors(c: Constellation, link: Link, s: ShapingParams | None = None,
                        priors=None) -> np.ndarray:
    """Partial derivatives of :func:`ber_upper_bound` with respect to each prior.

    Coordinates whose prior is below the floor get the one-sided limit
    (number of other supported symbols) / log2(M).
    """
    p = c.priors if priors is None else np.asarray(priors, float)
    pr = _pairs(c, link, s, p)
    ph = _phi(pr.omega)
    grad = np.zeros(c.M)
    np.add.at(grad, pr.m, ndtr(-pr.omega) - pr.beta * ph)
    np.add.at(grad, pr.n, pr.beta * p[pr.m] * ph / p[pr.n])
    off = p < PRIOR_FLOOR
    if np.any(off):
        grad[off] = np.count_nonzero(~off)
    return pr.norm * grad


def _delta(c: Constellation, link: Link, pr: _Pairs) -> np.ndarray:
    """d(bound term)/d(gamma) per pair, before the 1/log2(M) factor."""
    k = math.sqrt((1.0 - link.rho ** 2) / link.alpha)
    return (c.priors[pr.m] * pr.gamma ** -1.5 * 0.5 * _INV_SQRT_2PI * k
            * np.exp(-0.5 * pr.omega ** 2) * (pr.log_ratio - 0.5 / pr.beta ** 2))


def gamma_partials(pr_parts) -> tuple[np.ndarray, np.ndarray]:
    a, b, c, rI, rQ, zeta, root = pr_parts
    if root <= 0:
        raise ValueError("zeta = 1 is outside the differentiable range")
    dz = a * rI * rI - c * rQ * rQ - 2 * b * zeta / root * rI * rQ
    dt = (-2 * (1 + zeta) * a * rI * rQ + 2 * (1 - zeta) * c * rI * rQ
          + 2 * b * root * (rI * rI - rQ * rQ))
    return dz, dt


def grad_ber_wrt_shaping(c: Constellation, link: Link, s: ShapingParams) -> tuple[float, float]:
    """(d/dzeta, d/dtheta) of the union bound at shaping ``s``."""
    if s.zeta >= 1 - 1e-9:
        raise ValueError("zeta too close to 1 for the shaping gradient")
    pr = _pairs(c, link, s)
    delta = _delta(c, link, pr)
    dz, dt = gamma_partials(pr.parts)
    return float(pr.norm * np.sum(delta * dz)), float(pr.norm * np.sum(delta * dt))


def error_floor(c: Constellation, profile: DistortionProfile, g: complex = 1.0,
                s: ShapingParams | None = None) -> float:
    """alpha -> infinity limit of :func:`ber_upper_bound`; zero for ideal hardware."""
    eta = compose_distortion(profile)
    if eta.variance == 0:
        return 0.0
    g = complex(g)
    g2k = g * g * eta.pseudo_variance
    base = abs(g) ** 2 * eta.variance
    k1, k2 = base + g2k.real, base - g2k.real
    D = k1 * k2
    if k1 <= 0 or k2 <= 0 or D <= g2k.imag ** 2:
        raise ValueError("maximally improper distortion: the error floor is singular")
    upsilon = 1.0 - g2k.imag ** 2 / D
    p = c.priors
    sup = np.flatnonzero(p >= PRIOR_FLOOR)
    mm, nn = np.meshgrid(sup, sup, indexing="ij")
    off = mm != nn
    m, n = mm[off], nn[off]
    zeta, theta = (0.0, 0.0) if s is None else (s.zeta, s.theta)
    uI, uQ = _rotated(c.symbols[m] - c.symbols[n], theta)
    u = math.sqrt(1 + zeta) * uI + 1j * math.sqrt(1 - zeta) * uQ
    xi = g * u
    S = (2 * xi.real ** 2 / k1 + 2 * xi.imag ** 2 / k2
         - 4 * xi.real * xi.imag * g2k.imag / D)
    lr = np.log(p[m] / p[n])
    arg = (2 * upsilon * lr + S) / np.sqrt(4 * upsilon * S)
    return float(np.sum(p[m] * ndtr(-arg)) / math.log2(c.M))

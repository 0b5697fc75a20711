"""Improper complex Gaussian statistics and the transceiver distortion model.

All variances are expressed relative to a unit-power constellation; the
transmit power ``alpha`` carries the absolute scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# Singularity guard used wherever the I/Q statistics feed a detector or bound.
RHO_LIMIT = 1.0 - 1e-9
VAR_FLOOR = 1e-12
_PSEUDO_SLACK = 1e-12


class SingularStatisticsError(ValueError):
    """The I/Q covariance is (numerically) singular."""


class InfeasibleProfileError(ValueError):
    """A distortion profile whose pseudo-variance exceeds its variance."""


@dataclass(frozen=True)
class ImproperGaussian:
    """Zero-mean complex Gaussian law CN(0, variance, pseudo_variance)."""

    variance: float
    pseudo_variance: complex = 0j

    def __post_init__(self):
        v = float(self.variance)
        pv = complex(self.pseudo_variance)
        if not v >= 0.0:
            raise ValueError(f"variance must be >= 0, got {v}")
        if abs(pv) > v * (1 + _PSEUDO_SLACK) + _PSEUDO_SLACK:
            raise ValueError(f"|pseudo_variance| = {abs(pv)} exceeds variance {v}")
        object.__setattr__(self, "variance", v)
        object.__setattr__(self, "pseudo_variance", pv)

    @property
    def is_proper(self) -> bool:
        return self.pseudo_variance == 0


class NoiseIQ(NamedTuple):
    """Real-composite view of an improper law: I/Q variances and correlation."""

    sigma_I2: float
    sigma_Q2: float
    rho: float

    def check_regular(self) -> NoiseIQ:
        if self.sigma_I2 <= VAR_FLOOR or self.sigma_Q2 <= VAR_FLOOR:
            raise SingularStatisticsError(f"degenerate I/Q variance: {self}")
        if abs(self.rho) >= RHO_LIMIT:
            raise SingularStatisticsError(f"|rho| too close to 1: {self}")
        return self

    @property
    def covariance(self) -> np.ndarray:
        c = self.rho * math.sqrt(self.sigma_I2 * self.sigma_Q2)
        return np.array([[self.sigma_I2, c], [c, self.sigma_Q2]])

    @property
    def G(self) -> np.ndarray:
        """Matrix of the quadratic distance form; equals (1 - rho^2) * inverse covariance."""
        sI, sQ = math.sqrt(self.sigma_I2), math.sqrt(self.sigma_Q2)
        off = -self.rho / (sI * sQ)
        return np.array([[1.0 / self.sigma_I2, off], [off, 1.0 / self.sigma_Q2]])


@dataclass(frozen=True)
class DistortionProfile:
    """Transceiver impairment levels plus the thermal noise floor.

    The real part of each pseudo-variance is ``kappa_tilde_I_ratio`` times the
    matching variance; the imaginary part follows from ``rho_eta``, the I/Q
    correlation of the distortion alone.
    """

    kappa_t: float = 0.01
    kappa_r: float = 0.12
    kappa_tilde_I_ratio: float = 0.25
    rho_eta: float = 0.9
    sigma_w2: float = 1.0

    def __post_init__(self):
        if self.kappa_t < 0 or self.kappa_r < 0:
            raise InfeasibleProfileError("distortion variances must be non-negative")
        if not 0.0 <= self.kappa_tilde_I_ratio <= 1.0:
            raise InfeasibleProfileError("kappa_tilde_I_ratio must lie in [0, 1]")
        if not -1.0 < self.rho_eta < 1.0:
            raise InfeasibleProfileError("rho_eta must lie in (-1, 1)")
        if not self.sigma_w2 > 0:
            raise InfeasibleProfileError("sigma_w2 must be positive")

    @property
    def kappa(self) -> float:
        return self.kappa_t + self.kappa_r

    def with_kappa(self, kappa: float) -> DistortionProfile:
        """Rescale both impairments so that their sum is ``kappa``."""
        total = self.kappa
        if total == 0:
            raise InfeasibleProfileError("cannot rescale an ideal-hardware profile")
        s = kappa / total
        return DistortionProfile(self.kappa_t * s, self.kappa_r * s,
                                 self.kappa_tilde_I_ratio, self.rho_eta, self.sigma_w2)


@dataclass(frozen=True)
class ChannelState:
    g: complex = 1.0 + 0j
    alpha: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "g", complex(self.g))
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")


def circularity_coefficient(law: ImproperGaussian) -> float:
    if law.variance <= 0:
        raise ValueError("circularity coefficient undefined for zero variance")
    return abs(law.pseudo_variance) / law.variance


def _pseudo_from_variance(kappa: float, ratio: float, rho_eta: float) -> complex:
    re = ratio * kappa
    im = rho_eta * math.sqrt(max(kappa * kappa - re * re, 0.0))
    return complex(re, im)


def _checked(kappa: float, pv: complex) -> ImproperGaussian:
    if abs(pv) > kappa * (1 + _PSEUDO_SLACK) + _PSEUDO_SLACK:
        raise InfeasibleProfileError(f"|pseudo-variance| {abs(pv)} > variance {kappa}")
    return ImproperGaussian(kappa, pv)


def compose_distortion(profile: DistortionProfile) -> ImproperGaussian:
    """Law of the combined distortion eta with variance kappa_t + kappa_r."""
    k = profile.kappa
    return _checked(k, _pseudo_from_variance(k, profile.kappa_tilde_I_ratio, profile.rho_eta))


def transmitter_distortion(profile: DistortionProfile) -> ImproperGaussian:
    k = profile.kappa_t
    return _checked(k, _pseudo_from_variance(k, profile.kappa_tilde_I_ratio, profile.rho_eta))


def receiver_distortion(profile: DistortionProfile) -> ImproperGaussian:
    """Receiver distortion normalized to unit received signal power (scale by alpha*g)."""
    k = profile.kappa_r
    return _checked(k, _pseudo_from_variance(k, profile.kappa_tilde_I_ratio, profile.rho_eta))


def aggregate_noise(profile: DistortionProfile, ch: ChannelState) -> ImproperGaussian:
    """Aggregate noise z = sqrt(alpha) g eta + w seen by the detector."""
    eta = compose_distortion(profile)
    g = ch.g
    return ImproperGaussian(ch.alpha * abs(g) ** 2 * eta.variance + profile.sigma_w2,
                            ch.alpha * g * g * eta.pseudo_variance)


def iq_statistics(law: ImproperGaussian) -> NoiseIQ:
    v = law.variance
    re, im = law.pseudo_variance.real, law.pseudo_variance.imag
    if v <= 0:
        raise SingularStatisticsError("zero-variance law has no I/Q statistics")
    sI2 = max((v + re) / 2.0, 0.0)
    sQ2 = max((v - re) / 2.0, 0.0)
    denom = v * v - re * re
    if denom <= 0.0:
        if im != 0.0:
            raise SingularStatisticsError("singular I/Q statistics")
        rho = 0.0
    else:
        rho = im / math.sqrt(denom)
    rho = min(max(rho, -1.0), 1.0)
    return NoiseIQ(sI2, sQ2, rho)


def law_from_iq(iq: NoiseIQ) -> ImproperGaussian:
    """Inverse of :func:`iq_statistics`."""
    sI, sQ = math.sqrt(iq.sigma_I2), math.sqrt(iq.sigma_Q2)
    return ImproperGaussian(iq.sigma_I2 + iq.sigma_Q2,
                            complex(iq.sigma_I2 - iq.sigma_Q2, 2 * iq.rho * sI * sQ))


def pdf(law: ImproperGaussian, mean: complex, y) -> np.ndarray | float:
    """Density of y ~ mean + CN(0, law) on the (I, Q) plane."""
    iq = iq_statistics(law).check_regular()
    y = np.asarray(y, dtype=complex)
    eI = y.real - np.real(mean)
    eQ = y.imag - np.imag(mean)
    sI, sQ = math.sqrt(iq.sigma_I2), math.sqrt(iq.sigma_Q2)
    one_m = 1.0 - iq.rho ** 2
    quad = (eI ** 2 / iq.sigma_I2 + eQ ** 2 / iq.sigma_Q2
            - 2 * iq.rho * eI * eQ / (sI * sQ))
    out = np.exp(-quad / (2 * one_m)) / (2 * math.pi * sI * sQ * math.sqrt(one_m))
    return float(out) if out.ndim == 0 else out


def sample(law: ImproperGaussian, rng=None, size=None) -> np.ndarray | complex:
    """Draw from CN(0, law).

    ``rng`` is a ``numpy.random.Generator`` or anything accepted by
    ``numpy.random.default_rng`` (a seed).
    """
    rng = np.random.default_rng(rng)
    if law.variance == 0:
        return np.zeros(size, dtype=complex) if size is not None else 0j
    iq = iq_statistics(law)
    n1 = rng.standard_normal(size)
    n2 = rng.standard_normal(size)
    sI, sQ = math.sqrt(iq.sigma_I2), math.sqrt(iq.sigma_Q2)
    zI = sI * n1
    zQ = sQ * (iq.rho * n1 + math.sqrt(max(1.0 - iq.rho ** 2, 0.0)) * n2)
    return zI + 1j * zQ

"""MAP symbol detection under improper Gaussian noise with non-uniform priors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constellation import Constellation
from .noise import ChannelState, NoiseIQ

_CHUNK = 1 << 15


@dataclass(frozen=True)
class DetectorContext:
    """Reference constellation (x_m, or v_m after shaping), noise I/Q stats and channel."""

    constellation: Constellation
    noise_iq: NoiseIQ
    channel: ChannelState

    def __post_init__(self):
        self.noise_iq.check_regular()

    @property
    def means(self) -> np.ndarray:
        ch = self.channel
        return math.sqrt(ch.alpha) * ch.g * self.constellation.symbols

    @property
    def log_priors(self) -> np.ndarray:
        p = self.constellation.priors
        with np.errstate(divide="ignore"):
            return np.where(p > 0, np.log(np.where(p > 0, p, 1.0)), -np.inf)


def log_metrics(ctx: DetectorContext, y) -> np.ndarray:
    """ln p_m + ln f(y | x_m, g) up to a constant, shape ``y.shape + (M,)``."""
    y = np.asarray(y, dtype=complex)
    iq = ctx.noise_iq
    mu = ctx.means
    eI = y.real[..., None] - mu.real
    eQ = y.imag[..., None] - mu.imag
    sIsQ = math.sqrt(iq.sigma_I2 * iq.sigma_Q2)
    quad = (eI * eI / iq.sigma_I2 + eQ * eQ / iq.sigma_Q2
            - 2.0 * iq.rho * eI * eQ / sIsQ)
    return ctx.log_priors - quad / (2.0 * (1.0 - iq.rho ** 2))


def map_detect(ctx: DetectorContext, y):
    """Index of the maximum a-posteriori symbol for each received sample.

    Ties resolve to the lowest index; zero-prior symbols are never chosen.
    Accepts a scalar or an array of received samples.
    """
    if not np.any(ctx.constellation.priors > 0):
        raise ValueError("all priors are zero")
    y = np.asarray(y, dtype=complex)
    if y.ndim == 0:
        return int(np.argmax(log_metrics(ctx, y)))
    flat = y.ravel()
    out = np.empty(flat.size, dtype=np.int64)
    for start in range(0, flat.size, _CHUNK):
        sl = slice(start, start + _CHUNK)
        out[sl] = np.argmax(log_metrics(ctx, flat[sl]), axis=-1)
    return out.reshape(y.shape)


def bit_errors(m_true, m_hat, labels) -> int | np.ndarray:
    """Hamming distance between the labels of the sent and detected symbols."""
    labels = np.asarray(labels, dtype=np.int64)
    x = np.bitwise_xor(labels[np.asarray(m_true)], labels[np.asarray(m_hat)])
    d = np.bitwise_count(x)
    return int(d) if np.ndim(d) == 0 else d.astype(np.int64)

"""Monte-Carlo link simulation with MAP detection, plus parameter sweeps.

Random streams are counter-based (Philox) and keyed by ``(seed, block)``;
the symbol budget is cut into fixed-size blocks, so totals do not depend on
how blocks are spread across worker processes.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .analysis import Link, ber_upper_bound, error_floor, throughput_lower_bound
from .constellation import IDENTITY, Constellation, ShapingParams, entropy, shape_symbols
from .detection import DetectorContext, bit_errors, map_detect
from .noise import (ChannelState, DistortionProfile, ImproperGaussian, SingularStatisticsError,
                    aggregate_noise, iq_statistics, receiver_distortion, sample,
                    transmitter_distortion)

CHANNEL_KINDS = ("awgn", "rayleigh")
SWEEP_HEADER = ("axis_value", "scheme", "ber_sim", "ber_ci", "ber_bound", "throughput_sim",
                "throughput_bound", "floor", "status")
MAX_SINGULAR_FRACTION = 1e-3


def ebno_to_alpha(ebno_db: float, rate: float, sigma_w2: float = 1.0) -> float:
    return 10.0 ** (ebno_db / 10.0) * rate * sigma_w2


@dataclass(frozen=True)
class LinkConfig:
    """One simulated operating point.

    ``trials`` is the number of transmitted symbols. Under Rayleigh fading
    each block of ``block_size`` symbols shares one channel draw; with
    ``reoptimize_per_realization`` the ``designer`` callable maps the
    conditional :class:`Link` to ``(priors, shaping)`` for that draw.
    """

    constellation: Constellation
    shaping: ShapingParams = IDENTITY
    profile: DistortionProfile = field(default_factory=DistortionProfile)
    channel_kind: str = "awgn"
    rayleigh_lambda: float = 1.0
    ebno_db: float = 20.0
    rate_for_scaling: float | None = None
    trials: int = 100_000
    seed: int = 0
    reoptimize_per_realization: bool = True
    designer: Callable | None = None
    block_size: int = 1 << 15
    target_errors: int = 100
    max_trials: int | None = None
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not math.isfinite(self.ebno_db):
            raise ValueError("ebno_db must be finite")
        if self.channel_kind not in CHANNEL_KINDS:
            raise ValueError(f"channel_kind must be one of {CHANNEL_KINDS}")
        if self.block_size < 1:
            raise ValueError("block_size must be positive")
        if self.rayleigh_lambda <= 0:
            raise ValueError("rayleigh_lambda must be positive")

    @property
    def rate(self) -> float:
        if self.rate_for_scaling is not None:
            return self.rate_for_scaling
        return entropy(self.constellation.priors)

    @property
    def alpha(self) -> float:
        return ebno_to_alpha(self.ebno_db, self.rate, self.profile.sigma_w2)


@dataclass(frozen=True)
class SimResult:
    ber: float
    ber_ci95: float
    ser: float
    throughput: float
    trials_used: int
    bit_errors: int = 0
    symbol_errors: int = 0
    resampled: int = 0
    mean_bound: float = float("nan")


@dataclass
class _Block:
    n: int
    sym_err: int
    bit_err: int
    entropy_sum: float
    bound_sum: float
    resampled: int


def _block_rng(seed: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(block,))
    return np.random.Generator(np.random.Philox(ss))


def _scaled(law: ImproperGaussian, alpha: float, g: complex) -> ImproperGaussian:
    return ImproperGaussian(alpha * abs(g) ** 2 * law.variance, alpha * g * g * law.pseudo_variance)


def _draw_gain(cfg: LinkConfig, rng) -> complex:
    if cfg.channel_kind == "awgn":
        return 1.0 + 0j
    s = math.sqrt(cfg.rayleigh_lambda / 2.0)
    return complex(s * rng.standard_normal(), s * rng.standard_normal())


def _simulate_block(cfg: LinkConfig, block: int, n: int) -> _Block:
    rng = _block_rng(cfg.seed, block)
    alpha = cfg.alpha
    c, s = cfg.constellation, cfg.shaping
    resampled = 0
    while True:
        g = _draw_gain(cfg, rng)
        try:
            link = Link(iq_statistics(aggregate_noise(cfg.profile, ChannelState(g, alpha))).check_regular(),
                        ChannelState(g, alpha))
            if cfg.channel_kind == "rayleigh" and cfg.reoptimize_per_realization and cfg.designer:
                priors, s = cfg.designer(link)
                c = c.with_priors(priors)
            break
        except SingularStatisticsError:
            if cfg.channel_kind == "awgn":
                raise
            resampled += 1
    v = shape_symbols(c.symbols, s)
    m = rng.choice(c.M, size=n, p=c.priors)
    eta_t = sample(transmitter_distortion(cfg.profile), rng, n)
    eta_r = sample(_scaled(receiver_distortion(cfg.profile), alpha, g), rng, n)
    w = sample(ImproperGaussian(cfg.profile.sigma_w2, 0.0), rng, n)
    y = math.sqrt(alpha) * g * (v[m] + eta_t) + eta_r + w
    ctx = DetectorContext(c.with_symbols(v), link.noise_iq, link.channel)
    m_hat = map_detect(ctx, y)
    bound = ber_upper_bound(c, link, s) if cfg.channel_kind == "rayleigh" else 0.0
    return _Block(n, int(np.count_nonzero(m_hat != m)), int(np.sum(bit_errors(m, m_hat, c.labels))),
                  entropy(c.priors) * n, bound, resampled)


def _run_blocks(cfg: LinkConfig, blocks: list[tuple[int, int]], pool) -> list[_Block]:
    if pool is None:
        return [_simulate_block(cfg, b, n) for b, n in blocks]
    return list(pool.map(_simulate_block, [cfg] * len(blocks), *zip(*blocks)))


def _plan(start_symbol: int, count: int, block_size: int) -> list[tuple[int, int]]:
    """Block indices and sizes covering symbols [start, start + count)."""
    out = []
    pos, end = start_symbol, start_symbol + count
    while pos < end:
        b = pos // block_size
        n = min((b + 1) * block_size, end) - pos
        if pos % block_size:
            raise ValueError("extensions must start on a block boundary")
        out.append((b, n))
        pos += n
    return out


def run_link(cfg: LinkConfig) -> SimResult:
    """Simulate ``cfg.trials`` symbols, extending toward ``target_errors`` bit errors.

    Extension doubles the symbol count per round until the error target or
    ``max_trials`` (default 16x ``trials``) is reached; each round starts on
    a block boundary so the outcome is independent of ``workers``.
    """
    if not cfg.reoptimize_per_realization or cfg.channel_kind == "awgn":
        p = cfg.constellation.priors
        power = float(p @ np.abs(shape_symbols(cfg.constellation.symbols, cfg.shaping)) ** 2)
        if power > 1.0 + 1e-6:
            raise ValueError(f"shaped constellation power {power} exceeds the unit budget")
    cap = cfg.max_trials if cfg.max_trials is not None else 16 * cfg.trials
    bs = cfg.block_size
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        blocks = _run_blocks(cfg, _plan(0, cfg.trials, bs), pool)
        used = cfg.trials
        while sum(b.bit_err for b in blocks) < cfg.target_errors and used < cap:
            start = -(-used // bs) * bs
            extra = min(max(start, bs), cap - start)
            if extra <= 0:
                break
            blocks += _run_blocks(cfg, _plan(start, extra, bs), pool)
            used = start + extra
    finally:
        if pool is not None:
            pool.shutdown()
    n = sum(b.n for b in blocks)
    resampled = sum(b.resampled for b in blocks)
    if resampled > MAX_SINGULAR_FRACTION * max(len(blocks), 1) and resampled > 0:
        raise SingularStatisticsError(f"{resampled} singular channel draws exceed the 0.1% cap")
    L = cfg.constellation.bits_per_symbol
    be = sum(b.bit_err for b in blocks)
    se = sum(b.sym_err for b in blocks)
    nbits = n * L
    ber = be / nbits
    ci = 1.96 * math.sqrt(ber * (1.0 - ber) / nbits)
    H = sum(b.entropy_sum for b in blocks) / n
    mean_bound = (sum(b.bound_sum * b.n for b in blocks) / n
                  if cfg.channel_kind == "rayleigh" else float("nan"))
    return SimResult(ber, ci, se / n, (1.0 - ber) * H, n, be, se, resampled, mean_bound)


# ---------------------------------------------------------------- sweeps

SCHEMES = ("ns", "gs", "ps", "hs")


@dataclass(frozen=True)
class Scheme:
    """A shaping scheme on an ``M_nu``-point set carrying ``rate_floor`` bits/symbol."""

    name: str
    constellation: Constellation
    rate_floor: float

    def __post_init__(self):
        if self.name not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")


def design_scheme(scheme: Scheme, link: Link, power_cap: float = 1.0, gs_kwargs=None):
    """Run the scheme's designer; returns a DesignResult."""
    from .design import DesignResult, PSProblem, design_gs, design_hs, design_ps

    c = scheme.constellation
    gs_kwargs = gs_kwargs or {}
    if scheme.name == "ns":
        return DesignResult(priors=c.priors.copy(), shaping=IDENTITY,
                            bound_value=ber_upper_bound(c, link), scheme="ns")
    if scheme.name == "gs":
        return design_gs(c, link, power_cap=power_cap, **gs_kwargs)
    problem = PSProblem(c, scheme.rate_floor, power_cap=power_cap)
    if scheme.name == "ps":
        return design_ps(problem, link)
    return design_hs(problem, link, gs_kwargs=gs_kwargs)


@dataclass(frozen=True)
class SweepRow:
    axis_value: float
    scheme: str
    ber_sim: float
    ber_ci: float
    ber_bound: float
    throughput_sim: float
    throughput_bound: float
    floor: float
    status: str = "ok"
    design: object = None

    def as_csv(self) -> list[str]:
        return [repr(float(self.axis_value)), self.scheme] + [
            repr(float(getattr(self, k))) for k in SWEEP_HEADER[2:8]] + [self.status]


@dataclass(frozen=True)
class _SchemeDesigner:
    # picklable designer used for per-realization redesign under fading
    scheme: Scheme

    def __call__(self, link: Link):
        r = design_scheme(self.scheme, link)
        return r.priors, r.shaping


def sweep(template: LinkConfig, axis: str, values, schemes: list[Scheme],
          redesign: bool = True, simulate: bool = True) -> list[SweepRow]:
    """Design and simulate every scheme at every grid point.

    ``axis`` is ``"ebno_db"`` or ``"kappa"``. With ``redesign=False`` each
    scheme keeps the design from the first grid point. A designer failure
    yields a row with ``status`` set and NaN figures; the sweep continues.
    """
    if axis not in ("ebno_db", "kappa"):
        raise ValueError("axis must be 'ebno_db' or 'kappa'")
    values = list(values)
    if not values:
        raise ValueError("empty sweep grid")
    rows = []
    cached = {}
    for v in values:
        cfg = replace(template, ebno_db=float(v)) if axis == "ebno_db" else \
            replace(template, profile=template.profile.with_kappa(float(v)))
        for sch in schemes:
            cfg_s = replace(cfg, constellation=sch.constellation, rate_for_scaling=(
                template.rate_for_scaling if template.rate_for_scaling is not None else sch.rate_floor))
            rows.append(_sweep_point(cfg_s, sch, float(v), redesign, cached, simulate))
    return rows


def _sweep_point(cfg: LinkConfig, sch: Scheme, v: float, redesign, cached, simulate) -> SweepRow:
    nan = float("nan")
    link = Link.from_profile(cfg.profile, ChannelState(1.0, cfg.alpha))
    try:
        if redesign or sch.name not in cached:
            cached[sch.name] = design_scheme(sch, link)
        d = cached[sch.name]
    except Exception as exc:  # noqa: BLE001 - the sweep records the failure and moves on
        return SweepRow(v, sch.name, nan, nan, nan, nan, nan, nan, f"design_failed: {exc}")
    c = sch.constellation.with_priors(d.priors)
    s = d.shaping
    bound = ber_upper_bound(c, link, s)
    tput = throughput_lower_bound(c, link, s)
    try:
        floor = error_floor(c, cfg.profile, 1.0, s)
    except ValueError:
        floor = nan
    status = "ok" if d.converged else "not_converged"
    if not simulate:
        return SweepRow(v, sch.name, nan, nan, bound, nan, tput, floor, status, d)
    sim_cfg = replace(cfg, constellation=c, shaping=s,
                      designer=_SchemeDesigner(sch) if cfg.channel_kind == "rayleigh" else None)
    r = run_link(sim_cfg)
    if cfg.channel_kind == "rayleigh":
        bound, tput, floor = r.mean_bound, nan, nan
    return SweepRow(v, sch.name, r.ber, r.ber_ci95, bound, r.throughput, tput, floor, status, d)


def write_sweep_csv(rows: list[SweepRow], path, manifest_hash: str | None = None) -> None:
    """Fixed-column CSV; floats use ``repr`` so reruns are byte-identical."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER + (("manifest_hash",) if manifest_hash else ()))
        for r in rows:
            w.writerow(r.as_csv() + ([manifest_hash] if manifest_hash else []))

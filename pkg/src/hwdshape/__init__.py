"""Constellation shaping under improper Gaussian hardware distortion."""

__version__ = "0.1.0"

from .analysis import (Link, ber_upper_bound, error_floor, gamma_mn, grad_ber_wrt_priors,
                       grad_ber_wrt_shaping, pep, qfunc, throughput_lower_bound)
from .constellation import (IDENTITY, Constellation, ShapingParams, apply_shaping,
                            discrete_circularity, distribution_power, entropy,
                            make_constellation)
from .design import (DesignError, DesignResult, PSProblem, design_gs, design_hs, design_ps,
                     linearize_bound, solve_p1a)
from .detection import DetectorContext, bit_errors, map_detect
from .noise import (ChannelState, DistortionProfile, ImproperGaussian, NoiseIQ,
                    aggregate_noise, circularity_coefficient, compose_distortion,
                    iq_statistics)
from .simulator import LinkConfig, Scheme, SimResult, run_link, sweep

__all__ = [
    "IDENTITY", "ChannelState", "Constellation", "DesignError", "DesignResult",
    "DetectorContext", "DistortionProfile", "ImproperGaussian", "Link", "LinkConfig",
    "NoiseIQ", "PSProblem", "Scheme", "ShapingParams", "SimResult", "aggregate_noise",
    "apply_shaping", "ber_upper_bound", "bit_errors", "circularity_coefficient",
    "compose_distortion", "design_gs", "design_hs", "design_ps", "discrete_circularity",
    "distribution_power", "entropy", "error_floor", "gamma_mn", "grad_ber_wrt_priors",
    "grad_ber_wrt_shaping", "iq_statistics", "linearize_bound", "make_constellation",
    "map_detect", "pep", "qfunc", "run_link", "solve_p1a", "sweep", "throughput_lower_bound",
]

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..constellation import IDENTITY, Constellation, ShapingParams


class DesignError(RuntimeError):
    """Raised for infeasible design problems."""


class NonConvergenceError(DesignError):
    pass


@dataclass(frozen=True)
class PSProblem:
    """Prior design problem on a fixed set of symbol coordinates.

    ``constellation`` supplies the reference symbols x_m; when a shaping is
    passed to the designer, power is measured on the shaped symbols.
    """

    constellation: Constellation
    rate_floor: float
    power_cap: float = 1.0
    tolerance: float = 1e-7
    max_iters: int = 300
    p_min: float = 1e-9

    def __post_init__(self):
        if self.rate_floor > math.log2(self.constellation.M) + 1e-12:
            raise DesignError(f"rate floor {self.rate_floor} exceeds log2(M) = "
                              f"{math.log2(self.constellation.M)}")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")

    @classmethod
    def for_orders(cls, constellation: Constellation, M_u: int, **kw) -> PSProblem:
        return cls(constellation, math.log2(M_u), **kw)


@dataclass
class DesignResult:
    priors: np.ndarray
    shaping: ShapingParams = IDENTITY
    bound_value: float = float("nan")
    kkt_residual: float = 0.0
    iterations: int = 0
    trace: list[float] = field(default_factory=list)
    converged: bool = True
    multipliers: tuple[float, float, float] | None = None
    records: list[dict] = field(default_factory=list)
    scheme: str = ""

    def to_json(self) -> dict:
        return {
            "scheme": self.scheme,
            "priors": [float(v) for v in self.priors],
            "zeta": float(self.shaping.zeta),
            "theta": float(self.shaping.theta),
            "bound": float(self.bound_value),
            "kkt_residual": float(self.kkt_residual),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "multipliers": None if self.multipliers is None else [float(v) for v in self.multipliers],
        }


TRACE_HEADER = ("iter", "bound", "entropy", "power", "kkt_residual")


def write_trace_csv(result: DesignResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for r in result.records:
            w.writerow([r["iter"]] + [repr(float(r[k])) for k in TRACE_HEADER[1:]])


def write_result_json(result: DesignResult, path) -> None:
    with open(path, "w") as fh:
        json.dump(result.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")

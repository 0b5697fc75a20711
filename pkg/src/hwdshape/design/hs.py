"""Hybrid shaping: alternate prior design and geometric design."""

from __future__ import annotations

import numpy as np

from ..analysis import Link, ber_upper_bound
from ..constellation import IDENTITY, ShapingParams, entropy, shape_symbols
from .gs import design_gs
from .ps import design_ps
from .result import DesignResult, PSProblem

ORDERS = ("ps_first", "gs_first", "both")


def _alternate(problem: PSProblem, link: Link, p, s, first: str, max_outer, tol, gs_kw):
    c = problem.constellation
    f = ber_upper_bound(c.with_priors(p), link, s)
    trace, records = [f], []
    kkt = 0.0
    mult = None
    j = 0
    converged = False
    for j in range(1, max_outer + 1):
        for stage in ((first, "gs" if first == "ps" else "ps")):
            if stage == "ps":
                r = design_ps(problem, link, p_init=p, shaping=s)
                p, kkt, mult = r.priors, r.kkt_residual, r.multipliers
            else:
                r = design_gs(c, link, p_fixed=p, init=s, power_cap=problem.power_cap, **gs_kw)
                s = r.shaping
        f_new = ber_upper_bound(c.with_priors(p), link, s)
        e = np.abs(shape_symbols(c.symbols, s)) ** 2
        records.append(dict(iter=j, bound=f_new, entropy=entropy(p), power=float(p @ e),
                            kkt_residual=kkt))
        trace.append(f_new)
        done = abs(f - f_new) < tol
        f = f_new
        if done:
            converged = True
            break
    return DesignResult(priors=p, shaping=s, bound_value=f, kkt_residual=kkt, iterations=j,
                        trace=trace, converged=converged, multipliers=mult,
                        records=records, scheme="hs")


def design_hs(problem: PSProblem, link: Link, p_init=None, s_init: ShapingParams | None = None,
              order: str = "both", max_outer: int = 10, tol: float = 1e-10,
              gs_kwargs: dict | None = None) -> DesignResult:
    """Alternate PS and GS until the bound changes by less than ``tol``.

    ``order="both"`` runs the PS-first and GS-first sequences and keeps the
    lower final bound (PS-first on ties).
    """
    if order not in ORDERS:
        raise ValueError(f"order must be one of {ORDERS}")
    M = problem.constellation.M
    p = np.full(M, 1.0 / M) if p_init is None else np.asarray(p_init, float)
    s = IDENTITY if s_init is None else s_init
    gs_kw = dict(gs_kwargs or {})
    runs = []
    for o in (("ps_first", "gs_first") if order == "both" else (order,)):
        r = _alternate(problem, link, p, s, o.split("_")[0], max_outer, tol, gs_kw)
        r.scheme = f"hs:{o}"
        runs.append(r)
    return min(runs, key=lambda r: r.bound_value)

from .gs import design_gs
from .hs import design_hs
from .ps import AffineSurrogate, P1aSolution, design_ps, linearize_bound, solve_p1a
from .result import (DesignError, DesignResult, NonConvergenceError, PSProblem,
                     write_result_json, write_trace_csv)

__all__ = [
    "AffineSurrogate", "DesignError", "DesignResult", "NonConvergenceError", "P1aSolution",
    "PSProblem", "design_gs", "design_hs", "design_ps", "linearize_bound", "solve_p1a",
    "write_result_json", "write_trace_csv",
]

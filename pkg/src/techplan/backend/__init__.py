"""Linear and integer programming backend.

A small self-contained optimization stack: model container, bounded
revised simplex with dual extraction, best-first branch and bound,
exhaustive enumeration for tiny models, and fixed-format MPS export for
cross-checks with external solvers.
"""

from .model import LE, GE, EQ, LinearModel, LpSolution, MipSolution, dual_objective
from .simplex import solve_lp, solve_lp_warm, InfeasibleError, UnboundedError
from .branch_bound import solve_mip
from .exhaustive import enumerate_tiny
from .mps import export_mps, mangle_names, read_external_solution

__all__ = [
    "LE",
    "GE",
    "EQ",
    "LinearModel",
    "LpSolution",
    "MipSolution",
    "dual_objective",
    "solve_lp",
    "solve_lp_warm",
    "solve_mip",
    "enumerate_tiny",
    "export_mps",
    "mangle_names",
    "read_external_solution",
    "InfeasibleError",
    "UnboundedError",
]

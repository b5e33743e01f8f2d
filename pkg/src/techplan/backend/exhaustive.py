"""Exhaustive enumeration of small binary models.

The oracle path for checking branch and bound: every assignment of the
binary variables is visited in lexicographic order (variable-index
order, 0 before 1), so ties go to the first minimizer found.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .model import EQ, GE, LE, LinearModel, MipSolution
from .simplex import solve_lp

MAX_BINARIES = 22
ROW_TOL = 1e-6


def enumerate_tiny(model: LinearModel, limit: int = MAX_BINARIES) -> MipSolution:
    """Solve a model by enumerating all binary assignments.

    Refuses models with more than `limit` binaries.  Assignments that
    pass the binary-only rows get their continuous part solved as an LP
    with the binaries fixed.
    """
    A, b, senses, c, lb, ub = model.arrays()
    bin_idx = np.flatnonzero(model.binary)
    k = bin_idx.size
    if k > limit:
        raise ValueError(f"{k} binaries exceed the enumeration limit of {limit}")
    cont_idx = np.flatnonzero(~np.array(model.binary, dtype=bool))

    # Rows whose continuous coefficients are all zero can be checked
    # without an LP solve.
    if cont_idx.size:
        pure = np.flatnonzero((A[:, cont_idx] == 0.0).all(axis=1))
    else:
        pure = np.arange(model.n_rows)
    A_pure = A[np.ix_(pure, bin_idx)]
    b_pure = b[pure]
    senses_pure = [senses[i] for i in pure]

    best_obj = math.inf
    best_x = None
    nodes = 0
    lb_work = lb.copy()
    ub_work = ub.copy()
    for bits in itertools.product((0.0, 1.0), repeat=k):
        nodes += 1
        v = np.array(bits)
        act = A_pure @ v
        ok = True
        for i, s in enumerate(senses_pure):
            if s == LE and act[i] > b_pure[i] + ROW_TOL:
                ok = False
                break
            if s == GE and act[i] < b_pure[i] - ROW_TOL:
                ok = False
                break
            if s == EQ and abs(act[i] - b_pure[i]) > ROW_TOL:
                ok = False
                break
        if not ok:
            continue
        if cont_idx.size == 0:
            obj = float(c[bin_idx] @ v)
            if obj < best_obj - 1e-9:
                best_obj = obj
                best_x = np.zeros(model.n_vars)
                best_x[bin_idx] = v
            continue
        lb_work[bin_idx] = v
        ub_work[bin_idx] = v
        sol = solve_lp(model, lb=lb_work, ub=ub_work)
        if sol.status != "optimal":
            continue
        if sol.objective < best_obj - 1e-9:
            best_obj = sol.objective
            best_x = sol.x.copy()
            best_x[bin_idx] = v

    if best_x is None:
        return MipSolution(status="infeasible", bound=math.inf, nodes=nodes)
    return MipSolution(
        status="optimal", objective=best_obj, x=best_x, bound=best_obj, gap=0.0, nodes=nodes
    )

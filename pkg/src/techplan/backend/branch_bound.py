"""Best-first branch and bound over the binary variables of a model.

Nodes carry full bound arrays; children are solved eagerly so the heap
always pops the node with the least LP bound.  Branching picks the most
fractional binary, ties broken by the lowest variable index.  An
optional rounding dive and a caller-supplied warm start provide early
incumbents for pruning.
"""

from __future__ import annotations

import copy
import heapq
import math
import time

import numpy as np

from .model import LinearModel, MipSolution
from .simplex import solve_lp, solve_lp_warm

INT_TOL = 1e-6
EPS = 1e-9


def _fractionality(x: np.ndarray, bin_idx: np.ndarray) -> np.ndarray:
    v = x[bin_idx]
    return np.minimum(v - np.floor(v), np.ceil(v) - v)


def _round_binaries(x: np.ndarray, bin_idx: np.ndarray) -> np.ndarray:
    out = x.copy()
    out[bin_idx] = np.round(out[bin_idx])
    return out


def solve_mip(
    model: LinearModel,
    time_limit: float | None = None,
    integral_objective: bool = False,
    warm_start: np.ndarray | None = None,
    dive_rounds: int = 40,
    branch_priority: np.ndarray | None = None,
) -> MipSolution:
    """Minimize a model with binary variables by branch and bound.

    integral_objective asserts every feasible mixed solution has an
    integer objective, allowing nodes within 1 of the incumbent to be
    pruned.  warm_start is an optional feasible point used as the
    initial incumbent after validation.  branch_priority (one value per
    variable, higher first) steers branching toward structural
    decisions; fractionality breaks ties within a priority class.
    """
    deadline = None if time_limit is None else time.monotonic() + time_limit
    bin_idx = np.flatnonzero(model.binary)
    _, _, _, _, lb0, ub0 = model.arrays()
    prio = None if branch_priority is None else np.asarray(branch_priority, dtype=float)

    best_x = None
    best_obj = math.inf
    if warm_start is not None:
        w = np.asarray(warm_start, dtype=float)
        bad = model.check_feasible(w, tol=1e-6)
        if bad:
            raise ValueError(f"warm start violates {bad[0]} (+{len(bad) - 1} more)" if len(bad) > 1 else f"warm start violates {bad[0]}")
        best_x = _round_binaries(w, bin_idx)
        best_obj = model.objective_value(best_x)

    def remaining() -> float | None:
        if deadline is None:
            return None
        return max(deadline - time.monotonic(), 0.01)

    nodes = 0
    counter = 0
    heap: list = []
    pruned_to = math.inf  # least bound among nodes pruned by the incumbent

    def prune_margin() -> float:
        return 1.0 - 1e-6 if integral_objective else EPS

    def consider(lb, ub, warm=None):
        """Solve a node; push it, fathom it, or record an incumbent."""
        nonlocal best_x, best_obj, nodes, counter, pruned_to
        if warm is not None:
            sol = solve_lp_warm(model, lb, ub, warm[0], warm[1], time_limit=remaining())
        else:
            sol = solve_lp(model, lb=lb, ub=ub, time_limit=remaining())
        nodes += 1
        if sol.status == "infeasible":
            return None
        if sol.status in ("unbounded", "time_limit"):
            return sol.status
        if sol.objective >= best_obj - prune_margin():
            pruned_to = min(pruned_to, sol.objective)
            return None
        frac = _fractionality(sol.x, bin_idx)
        if bin_idx.size == 0 or frac.max() <= INT_TOL:
            x = _round_binaries(sol.x, bin_idx)
            obj = model.objective_value(x)
            if obj < best_obj - EPS:
                best_obj, best_x = obj, x
            return None
        if prio is None:
            j = int(bin_idx[np.argmax(frac)])
        else:
            cand = np.flatnonzero(frac > INT_TOL)
            pj = prio[bin_idx[cand]]
            top = cand[pj == pj.max()]
            j = int(bin_idx[top[np.argmax(frac[top])]])
        counter += 1
        heapq.heappush(
            heap, (sol.objective, counter, lb, ub, j, sol.x.copy(), sol.basis, sol.at_upper)
        )
        return None

    def unbounded_or_infeasible() -> MipSolution:
        """An unbounded LP relaxation leaves both outcomes open; probe
        integer feasibility with a zero objective to tell them apart."""
        probe = copy.deepcopy(model)
        probe.obj = [0.0] * probe.n_vars
        probe._cache = None
        r = solve_mip(probe, time_limit=remaining(), dive_rounds=dive_rounds)
        status = "unbounded" if r.status == "optimal" else r.status
        return MipSolution(status=status, nodes=nodes + r.nodes)

    status = consider(lb0.copy(), ub0.copy())
    if status == "unbounded":
        return unbounded_or_infeasible()
    if status == "time_limit":
        gap = math.inf if best_x is None else (math.inf if not heap else (best_obj - heap[0][0]) / max(1.0, abs(best_obj)))
        return MipSolution(status="time_limit", objective=best_obj, x=best_x, bound=-math.inf, gap=gap, nodes=nodes)

    # Rounding dive for an early incumbent: repeatedly fix the most
    # fractional binary to its nearest integer and re-solve.
    if status is None and heap and dive_rounds > 0:
        lb = heap[0][2].copy()
        ub = heap[0][3].copy()
        x = heap[0][5]
        dive_warm = (heap[0][6], heap[0][7])
        for _ in range(dive_rounds):
            if deadline is not None and time.monotonic() > deadline:
                break
            frac = _fractionality(x, bin_idx)
            if frac.max() <= INT_TOL:
                break
            j = int(bin_idx[np.argmax(frac)])
            v = round(float(x[j]))
            lb[j] = ub[j] = float(v)
            if dive_warm[0] is not None:
                sol = solve_lp_warm(model, lb, ub, dive_warm[0], dive_warm[1], time_limit=remaining())
            else:
                sol = solve_lp(model, lb=lb, ub=ub, time_limit=remaining())
            nodes += 1
            if sol.status != "optimal" or sol.objective >= best_obj - EPS:
                break
            x = sol.x
            dive_warm = (sol.basis, sol.at_upper)
            if _fractionality(x, bin_idx).max() <= INT_TOL:
                xr = _round_binaries(x, bin_idx)
                obj = model.objective_value(xr)
                if obj < best_obj - EPS:
                    best_obj, best_x = obj, xr
                break

    timed_out = False
    while heap:
        if deadline is not None and time.monotonic() > deadline:
            timed_out = True
            break
        bound, _, lb, ub, j, _, pbasis, pup = heapq.heappop(heap)
        if bound >= best_obj - prune_margin():
            pruned_to = min(pruned_to, bound)
            continue
        warm = None if pbasis is None else (pbasis, pup)
        lb1, ub1 = lb.copy(), ub.copy()
        ub1[j] = 0.0
        st = consider(lb1, ub1, warm)
        if st == "unbounded":
            return unbounded_or_infeasible()
        if st == "time_limit":
            timed_out = True
            break
        lb[j] = 1.0
        st = consider(lb, ub, warm)
        if st == "unbounded":
            return unbounded_or_infeasible()
        if st == "time_limit":
            timed_out = True
            break

    if timed_out:
        open_bounds = [entry[0] for entry in heap]
        bound = min(open_bounds) if open_bounds else min(pruned_to, best_obj)
        gap = math.inf
        if best_x is not None:
            gap = (best_obj - bound) / max(1.0, abs(best_obj))
        return MipSolution(
            status="time_limit", objective=best_obj, x=best_x, bound=bound, gap=gap, nodes=nodes
        )
    if best_x is None:
        return MipSolution(status="infeasible", bound=math.inf, nodes=nodes)
    return MipSolution(
        status="optimal", objective=best_obj, x=best_x, bound=best_obj, gap=0.0, nodes=nodes
    )

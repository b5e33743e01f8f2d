"""Bounded-variable revised simplex with dual extraction.

Two-phase method over the equality form [A | I] where slack bounds
encode the row sense: "<=" slacks live in [0, inf), ">=" slacks in
(-inf, 0], "=" slacks are fixed at 0.  Nonbasic variables sit at a
finite bound and entering steps may flip a variable to its opposite
bound without a basis change.

Pricing is Dantzig's rule with a permanent switch to Bland's rule after
5 * (rows + cols) consecutive degenerate pivots, so the method cannot
cycle.  Row duals come out of the final basis with the sign convention
of a minimization: "<=" rows have duals <= 0, ">=" rows >= 0.
"""

from __future__ import annotations

import math
import time

import numpy as np

from .model import GE, LE, LinearModel, LpSolution

FEAS_TOL = 1e-6
OPT_TOL = 1e-7
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 64
MAX_ITERS = 200_000


class InfeasibleError(Exception):
    """The model has no feasible point."""


class UnboundedError(Exception):
    """The objective decreases without bound."""


class _WarmStartFailed(Exception):
    """A warm-started solve could not proceed; solve from scratch."""


class _Tableau:
    """Working state of the extended problem [A | I | artificials].

    With `basis`/`at_upper` given, the tableau is rebuilt around that
    basis instead of the all-slack start; no artificials are created
    and the caller is expected to run the dual simplex first.
    """

    def __init__(self, A, b, senses, c, lb, ub, basis=None, at_upper=None):
        m, n = A.shape
        self.m, self.n = m, n
        slack_lb = np.zeros(m)
        slack_ub = np.zeros(m)
        for i, s in enumerate(senses):
            if s == LE:
                slack_lb[i], slack_ub[i] = 0.0, math.inf
            elif s == GE:
                slack_lb[i], slack_ub[i] = -math.inf, 0.0
            else:
                slack_lb[i], slack_ub[i] = 0.0, 0.0
        self.b = b

        if basis is not None:
            self.n_art = 0
            self.A = np.hstack([A, np.eye(m)])
            self.lb = np.concatenate([lb, slack_lb])
            self.ub = np.concatenate([ub, slack_ub])
            self.c2 = np.concatenate([c, np.zeros(m)])
            self.c1 = np.zeros(self.A.shape[1])
            self.basis = np.asarray(basis, dtype=int).copy()
            self.is_basic = np.zeros(self.A.shape[1], dtype=bool)
            self.is_basic[self.basis] = True
            # Nonbasics sit at a bound feasible for the (possibly new)
            # box; a variable parked at a now-invalid side is moved.
            up = np.asarray(at_upper, dtype=bool).copy()
            up[~np.isfinite(self.ub)] = False
            up[~np.isfinite(self.lb) & np.isfinite(self.ub)] = True
            self.at_upper = up
            self.x = np.where(up, self.ub, np.where(np.isfinite(self.lb), self.lb, 0.0))
            self.refactor()
            return

        # Nonbasic structural variables start at a finite bound.
        x0 = np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))
        at_upper0 = ~np.isfinite(lb) & np.isfinite(ub)
        resid = b - A @ x0

        art_cols = []
        basis = np.empty(m, dtype=int)
        for i in range(m):
            if slack_lb[i] - FEAS_TOL <= resid[i] <= slack_ub[i] + FEAS_TOL:
                basis[i] = n + i
            else:
                basis[i] = n + m + len(art_cols)
                col = np.zeros(m)
                col[i] = 1.0 if resid[i] > 0 else -1.0
                art_cols.append(col)
        self.n_art = len(art_cols)
        if self.n_art:
            self.A = np.hstack([A, np.eye(m), np.array(art_cols).T])
        else:
            self.A = np.hstack([A, np.eye(m)])
        self.lb = np.concatenate([lb, slack_lb, np.zeros(self.n_art)])
        self.ub = np.concatenate([ub, slack_ub, np.full(self.n_art, math.inf)])
        self.c2 = np.concatenate([c, np.zeros(m + self.n_art)])
        self.c1 = np.zeros(self.A.shape[1])
        self.c1[n + m :] = 1.0

        self.basis = basis
        self.is_basic = np.zeros(self.A.shape[1], dtype=bool)
        self.is_basic[basis] = True
        self.x = np.concatenate([x0, np.zeros(m + self.n_art)])
        self.at_upper = np.zeros(self.A.shape[1], dtype=bool)
        self.at_upper[:n] = at_upper0
        for i, s in enumerate(senses):
            if s == GE and not self.is_basic[n + i]:
                self.at_upper[n + i] = True
        self.refactor()

    def refactor(self):
        B = self.A[:, self.basis]
        try:
            self.B_inv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise RuntimeError("singular basis during refactorization") from exc
        self.recompute_basics()

    def recompute_basics(self):
        nb_mask = ~self.is_basic
        rhs = self.b - self.A[:, nb_mask] @ self.x[nb_mask]
        self.x[self.basis] = self.B_inv @ rhs

    def duals(self, c) -> np.ndarray:
        return c[self.basis] @ self.B_inv

    def reduced_costs(self, c) -> np.ndarray:
        return c - self.duals(c) @ self.A

    def replace_basic(self, leave_pos: int, q: int, direction: np.ndarray):
        """Put q into the basis at position leave_pos, updating B_inv."""
        self.basis[leave_pos] = q
        self.is_basic[q] = True
        self.B_inv[leave_pos] /= direction[leave_pos]
        scaled = self.B_inv[leave_pos].copy()
        delta = np.outer(direction, scaled)
        delta[leave_pos] = 0.0
        self.B_inv -= delta


def _iterate(t: _Tableau, c: np.ndarray, deadline: float | None, stats: dict) -> str:
    """Run simplex iterations until optimal, unbounded, or out of time."""
    stall_limit = 5 * (t.m + t.n)
    stall = 0
    bland = False
    since_refactor = 0
    while True:
        if stats["iterations"] >= MAX_ITERS:
            raise RuntimeError("simplex iteration limit exceeded")
        if deadline is not None and time.monotonic() > deadline:
            return "time_limit"
        rc = t.reduced_costs(c)
        movable = ~t.is_basic & (t.lb < t.ub)
        eligible = np.flatnonzero(
            movable & ((~t.at_upper & (rc < -OPT_TOL)) | (t.at_upper & (rc > OPT_TOL)))
        )
        if eligible.size == 0:
            return "optimal"
        if bland:
            q = int(eligible[0])
        else:
            q = int(eligible[np.argmax(np.abs(rc[eligible]))])
        sigma = -1.0 if t.at_upper[q] else 1.0
        direction = t.B_inv @ t.A[:, q]
        eff = sigma * direction

        # Ratio test: entering moves by step >= 0, basic i by -eff[i] * step.
        xb = t.x[t.basis]
        lb_b = t.lb[t.basis]
        ub_b = t.ub[t.basis]
        ratios = np.full(t.m, math.inf)
        pos = eff > PIVOT_TOL
        neg = eff < -PIVOT_TOL
        ratios[pos] = (xb[pos] - lb_b[pos]) / eff[pos]
        ratios[neg] = (ub_b[neg] - xb[neg]) / (-eff[neg])
        np.maximum(ratios, 0.0, out=ratios)
        min_ratio = ratios.min() if t.m else math.inf
        flip = t.ub[q] - t.lb[q]

        if not math.isfinite(min_ratio) and not math.isfinite(flip):
            return "unbounded"
        stats["iterations"] += 1
        if flip < min_ratio - PIVOT_TOL:
            # The entering variable reaches its other bound first.
            t.x[t.basis] -= eff * flip
            t.at_upper[q] = not t.at_upper[q]
            t.x[q] = t.ub[q] if t.at_upper[q] else t.lb[q]
            step = flip
        else:
            cand = np.flatnonzero(ratios <= min_ratio + PIVOT_TOL)
            leave_pos = int(cand[np.argmin(t.basis[cand])])
            step = min_ratio
            t.x[t.basis] -= eff * step
            t.x[q] += sigma * step
            p = t.basis[leave_pos]
            to_upper = eff[leave_pos] < 0
            t.x[p] = ub_b[leave_pos] if to_upper else lb_b[leave_pos]
            t.at_upper[p] = to_upper
            t.is_basic[p] = False
            t.replace_basic(leave_pos, q, direction)
            since_refactor += 1
            if since_refactor >= REFACTOR_EVERY:
                t.refactor()
                since_refactor = 0
        if step <= PIVOT_TOL:
            stall += 1
            if stall > stall_limit:
                bland = True
        else:
            stall = 0


def _dual_iterate(t: _Tableau, c: np.ndarray, deadline: float | None, stats: dict) -> str:
    """Dual simplex: restore primal feasibility keeping dual feasibility.

    Used after bound changes on an optimal basis (branch and bound).
    Returns "optimal" (primal feasible), "infeasible" (dual unbounded),
    or raises _WarmStartFailed when it cannot finish cleanly.
    """
    max_iters = 200 + 20 * t.m
    since_refactor = 0
    for _ in range(max_iters):
        if deadline is not None and time.monotonic() > deadline:
            return "time_limit"
        xb = t.x[t.basis]
        up_viol = xb - t.ub[t.basis]
        lo_viol = t.lb[t.basis] - xb
        viol = np.maximum(up_viol, lo_viol)
        r = int(np.argmax(viol))
        if viol[r] <= FEAS_TOL:
            return "optimal"
        above = up_viol[r] >= lo_viol[r]
        rowv = t.B_inv[r] @ t.A
        movable = ~t.is_basic & (t.ub - t.lb > PIVOT_TOL)
        if above:
            can = movable & (
                (~t.at_upper & (rowv > PIVOT_TOL)) | (t.at_upper & (rowv < -PIVOT_TOL))
            )
        else:
            can = movable & (
                (~t.at_upper & (rowv < -PIVOT_TOL)) | (t.at_upper & (rowv > PIVOT_TOL))
            )
        cand = np.flatnonzero(can)
        if cand.size == 0:
            return "infeasible"
        rc = t.reduced_costs(c)
        ratios = np.abs(rc[cand]) / np.abs(rowv[cand])
        q = int(cand[np.argmin(ratios)])
        p = t.basis[r]
        direction = t.B_inv @ t.A[:, q]
        if abs(direction[r]) <= PIVOT_TOL:
            raise _WarmStartFailed("tiny dual pivot")
        t.is_basic[p] = False
        t.at_upper[p] = above
        t.x[p] = t.ub[p] if above else t.lb[p]
        t.replace_basic(r, q, direction)
        since_refactor += 1
        if since_refactor >= REFACTOR_EVERY:
            t.refactor()
            since_refactor = 0
        else:
            t.recompute_basics()
        stats["iterations"] += 1
    raise _WarmStartFailed("dual simplex iteration limit")


def _drive_out_artificials(t: _Tableau):
    """Pivot basic artificials out of the basis where possible.

    Rows whose artificial cannot leave are linearly dependent; their
    artificial is pinned to zero and simply stays basic.
    """
    n_real = t.n + t.m
    for pos in range(t.m):
        p = t.basis[pos]
        if p < n_real:
            continue
        row = t.B_inv[pos] @ t.A[:, :n_real]
        usable = (np.abs(row) > 1e-8) & ~t.is_basic[:n_real] & (t.lb[:n_real] < t.ub[:n_real])
        candidates = np.flatnonzero(usable)
        if candidates.size:
            q = int(candidates[0])
            direction = t.B_inv @ t.A[:, q]
            t.is_basic[p] = False
            t.x[p] = 0.0
            t.replace_basic(pos, q, direction)
            t.recompute_basics()


def solve_lp(
    model: LinearModel,
    lb: np.ndarray | None = None,
    ub: np.ndarray | None = None,
    time_limit: float | None = None,
) -> LpSolution:
    """Solve the LP relaxation of a model.

    `lb`/`ub` override the model bounds without rebuilding it (used by
    branch and bound).  On optimality the solution carries primal
    values, row duals and reduced costs.
    """
    A, b, senses, c, mlb, mub = model.arrays()
    lb = mlb if lb is None else np.asarray(lb, dtype=float)
    ub = mub if ub is None else np.asarray(ub, dtype=float)
    if np.any(lb > ub):
        return LpSolution(status="infeasible")

    # Free variables are split into a positive and a negative part.
    # Only the split variables get their lower bound zeroed; a merely
    # semi-infinite bound like [-inf, u] is handled natively.
    free = np.flatnonzero(~np.isfinite(lb) & ~np.isfinite(ub))
    if free.size:
        A = np.hstack([A, -A[:, free]])
        c = np.concatenate([c, -c[free]])
        lb = lb.copy()
        lb[free] = 0.0
        lb = np.concatenate([lb, np.zeros(free.size)])
        ub = np.concatenate([ub, np.full(free.size, math.inf)])

    deadline = None if time_limit is None else time.monotonic() + time_limit
    stats = {"iterations": 0}
    t = _Tableau(A, b, list(senses), c, lb, ub)

    if t.n_art:
        status = _iterate(t, t.c1, deadline, stats)
        if status == "time_limit":
            return LpSolution(status="time_limit", iterations=stats["iterations"])
        if status == "unbounded":
            raise RuntimeError("phase 1 reported unbounded")
        if float(t.c1 @ t.x) > FEAS_TOL:
            return LpSolution(status="infeasible", iterations=stats["iterations"])
        _drive_out_artificials(t)
        t.ub[t.n + t.m :] = 0.0

    status = _iterate(t, t.c2, deadline, stats)
    if status == "unbounded":
        return LpSolution(status="unbounded", iterations=stats["iterations"])
    return _extract(model, t, free, status, stats)


def _extract(model: LinearModel, t: _Tableau, free, status, stats) -> LpSolution:
    t.recompute_basics()
    n = model.n_vars
    x_full = t.x[: t.n]
    if free.size:
        x = x_full[:n].copy()
        x[free] = x_full[free] - x_full[n:]
    else:
        x = x_full[:n].copy()
    duals = t.duals(t.c2)
    rc = t.reduced_costs(t.c2)[:n]
    objective = float(model.arrays()[3] @ x)

    # Snapshot the basis for warm re-solves.  A pinned artificial kept
    # basic for a dependent row is swapped for that row's slack, which
    # spans the same unit column, so the snapshot never references
    # artificial columns.
    n_real = t.n + t.m
    basis = t.basis.copy()
    art_pos = np.flatnonzero(basis >= n_real)
    basis[art_pos] = t.n + art_pos
    return LpSolution(
        status=status,
        objective=objective,
        x=x,
        duals=duals,
        reduced_costs=rc,
        iterations=stats["iterations"],
        basis=basis,
        at_upper=t.at_upper[:n_real].copy(),
    )


def solve_lp_warm(
    model: LinearModel,
    lb: np.ndarray,
    ub: np.ndarray,
    basis: np.ndarray,
    at_upper: np.ndarray,
    time_limit: float | None = None,
) -> LpSolution:
    """Re-solve after bound changes, starting from a previous basis.

    Runs the dual simplex (bound changes keep the old basis dual
    feasible) and finishes with primal iterations as a safety net.
    Falls back to a cold solve_lp whenever the warm path cannot finish.
    """
    A, b, senses, c, mlb, mub = model.arrays()
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    if np.any(lb > ub):
        return LpSolution(status="infeasible")

    free = np.flatnonzero(~np.isfinite(lb) & ~np.isfinite(ub))
    if free.size:
        A = np.hstack([A, -A[:, free]])
        c = np.concatenate([c, -c[free]])
        lb2 = lb.copy()
        lb2[free] = 0.0
        lb2 = np.concatenate([lb2, np.zeros(free.size)])
        ub2 = np.concatenate([ub, np.full(free.size, math.inf)])
    else:
        lb2, ub2 = lb, ub

    m = A.shape[0]
    n_ext = A.shape[1]
    deadline = None if time_limit is None else time.monotonic() + time_limit
    stats = {"iterations": 0}
    try:
        if len(at_upper) != n_ext + m or (basis.size and basis.max() >= n_ext + m):
            raise _WarmStartFailed("basis shape mismatch")
        t = _Tableau(A, b, list(senses), c, lb2, ub2, basis=basis, at_upper=at_upper)
        status = _dual_iterate(t, t.c2, deadline, stats)
        if status == "infeasible":
            return LpSolution(status="infeasible", iterations=stats["iterations"])
        if status == "time_limit":
            return LpSolution(status="time_limit", iterations=stats["iterations"])
        status = _iterate(t, t.c2, deadline, stats)
        if status == "unbounded":
            return LpSolution(status="unbounded", iterations=stats["iterations"])
        if status == "time_limit":
            return LpSolution(status="time_limit", iterations=stats["iterations"])
        # The dual path assumed primal feasibility at exit; distrust and
        # verify before reporting optimal.
        t.recompute_basics()
        if (
            np.any(t.x[t.basis] < t.lb[t.basis] - 10 * FEAS_TOL)
            or np.any(t.x[t.basis] > t.ub[t.basis] + 10 * FEAS_TOL)
        ):
            raise _WarmStartFailed("primal infeasible after warm solve")
        return _extract(model, t, free, status, stats)
    except (_WarmStartFailed, RuntimeError, np.linalg.LinAlgError):
        return solve_lp(model, lb=lb, ub=ub, time_limit=time_limit)

"""Random model generators shared by backend tests and the acceptance gate."""

from __future__ import annotations

import math
import random

from techplan.backend import EQ, GE, LE, LinearModel


def random_lp(rng: random.Random, max_vars: int = 6, max_rows: int = 5) -> LinearModel:
    """A small LP with integer data; may be infeasible or unbounded."""
    n = rng.randint(2, max_vars)
    m = rng.randint(1, max_rows)
    model = LinearModel("fuzz-lp")
    for j in range(n):
        ub = rng.choice([4.0, math.inf, math.inf])
        model.add_var(f"x{j}", lb=0.0, ub=ub, obj=rng.randint(-5, 5))
    for i in range(m):
        picked = rng.sample(range(n), rng.randint(1, n))
        coeffs = {j: rng.randint(-5, 5) for j in picked}
        coeffs = {j: v for j, v in coeffs.items() if v} or {rng.randrange(n): 1.0}
        sense = rng.choice([LE, LE, GE, EQ])
        model.add_row(f"r{i}", coeffs, sense, rng.randint(-3, 10))
    return model


def random_mip(rng: random.Random) -> LinearModel:
    """A tiny mixed-binary model with finite continuous bounds.

    Bounds stay finite so exhaustive enumeration (which skips
    non-optimal LP sub-solves) is a sound reference.
    """
    nb = rng.randint(1, 8)
    nc = rng.randint(0, 3)
    model = LinearModel("fuzz-mip")
    for j in range(nb):
        model.add_var(f"b{j}", binary=True, obj=rng.randint(-6, 6))
    for j in range(nc):
        model.add_var(f"c{j}", lb=0.0, ub=rng.choice([4.0, 6.0]), obj=rng.randint(-4, 4))
    for i in range(rng.randint(1, 6)):
        nv = model.n_vars
        picked = rng.sample(range(nv), rng.randint(1, nv))
        coeffs = {j: rng.randint(-4, 4) for j in picked}
        coeffs = {j: v for j, v in coeffs.items() if v} or {rng.randrange(nv): 1.0}
        sense = rng.choice([LE, LE, GE, EQ])
        model.add_row(f"r{i}", coeffs, sense, rng.randint(-2, 8))
    return model


def check_strong_duality(model: LinearModel, sol, tol: float = 1e-7) -> float:
    """|primal - dual| objective gap for an optimal LP solution."""
    from techplan.backend import dual_objective

    return abs(sol.objective - dual_objective(model, sol))


def check_complementary_slackness(model: LinearModel, sol, tol: float = 1e-7) -> float:
    """Worst complementary-slackness violation of an optimal LP solution.

    Rows: dual * slack must vanish.  Variables: the reduced cost must
    vanish unless the variable sits at one of its bounds.
    """
    worst = 0.0
    act = model.row_activity(sol.x)
    for i in range(model.n_rows):
        slack = act[i] - model.rhs[i]
        worst = max(worst, abs(sol.duals[i] * slack))
    for j in range(model.n_vars):
        at_lb = abs(sol.x[j] - model.lb[j]) <= tol
        at_ub = math.isfinite(model.ub[j]) and abs(sol.x[j] - model.ub[j]) <= tol
        if not at_lb and not at_ub:
            worst = max(worst, abs(sol.reduced_costs[j]))
        elif at_lb and not at_ub:
            # Minimization: a variable held at its lower bound must not
            # want to decrease further.
            worst = max(worst, max(0.0, -sol.reduced_costs[j]))
        elif at_ub and not at_lb:
            worst = max(worst, max(0.0, sol.reduced_costs[j]))
    return worst

"""Neighborhood-search metaheuristic: feasibility, determinism, quality."""

import random

import pytest

from techplan.alns import (
    _DESTROY,
    _REPAIR,
    AlnsConfig,
    _Ctx,
    _state_to_solution,
    initial_solution,
    run_alns,
    setcover_finalize,
)
from techplan.core import solution_objective, validate_route
from techplan.instances import gen_synthetic

from oracle import solution_cost, trsp_optimum

FAST = AlnsConfig(retries=2, iters_per_retry=150)


def test_solutions_are_feasible_and_priced_right():
    for seed in range(4):
        inst = gen_synthetic(seed=seed, n_tasks=10, n_masters=3)
        sol, stats, pool = run_alns(inst, FAST, seed=seed)
        for route in sol.routes:
            assert validate_route(route, inst) == [], seed
        assert solution_objective(sol, inst) == sol.objective
        assert solution_cost(sol, inst) == sol.objective
        assert stats.retries == FAST.retries
        assert stats.iterations > 0
        assert stats.best_objective == sol.objective
        assert stats.pool_size == len(pool.entries) > 0


def test_deterministic_under_iteration_budget():
    inst = gen_synthetic(seed=9, n_tasks=12, n_masters=3)
    a, _, _ = run_alns(inst, FAST, seed=5)
    b, _, _ = run_alns(inst, FAST, seed=5)
    assert a.objective == b.objective
    assert [(r.technician_id, r.visits) for r in a.routes] == [
        (r.technician_id, r.visits) for r in b.routes
    ]
    assert a.unserved == b.unserved


def test_never_beats_exact_optimum():
    for seed in range(3):
        inst = gen_synthetic(seed=seed + 20, n_tasks=6, n_masters=2)
        opt = trsp_optimum(inst)
        sol, _, _ = run_alns(inst, FAST, seed=seed)
        assert sol.objective >= opt, seed


def test_improves_on_greedy_start():
    inst = gen_synthetic(seed=31, n_tasks=14, n_masters=3)
    ctx = _Ctx(inst)
    greedy = _state_to_solution(ctx, initial_solution(ctx)).objective
    sol, _, _ = run_alns(inst, FAST, seed=0)
    assert sol.objective <= greedy


def test_pool_travel_values_are_honest():
    inst = gen_synthetic(seed=2, n_tasks=10, n_masters=3)
    _, _, pool = run_alns(inst, FAST, seed=1)
    ctx = _Ctx(inst)
    for (tech_id, order), (travel, _) in list(pool.entries.items())[:60]:
        assert ctx.order_travel(ctx.tech_by_id[tech_id], list(order)) == travel


def test_setcover_never_worse_than_incumbent():
    for seed in range(3):
        inst = gen_synthetic(seed=seed + 7, n_tasks=12, n_masters=3)
        sol, _, pool = run_alns(inst, FAST, seed=seed)
        final = setcover_finalize(inst, pool, sol, time_limit=10)
        assert final.objective <= sol.objective, seed
        for route in final.routes:
            assert validate_route(route, inst) == [], seed
        assert solution_cost(final, inst) == final.objective


def test_operators_preserve_feasibility_mini_fuzz():
    """Small-scale twin of the acceptance-level operator soak."""
    rng = random.Random(123)
    cfg = AlnsConfig()
    steps = 0
    for seed in (0, 3):
        inst = gen_synthetic(seed=seed, n_tasks=9, n_masters=3)
        ctx = _Ctx(inst)
        state = initial_solution(ctx)
        for _ in range(700):
            _, destroy = _DESTROY[rng.randrange(len(_DESTROY))]
            _, repair = _REPAIR[rng.randrange(len(_REPAIR))]
            destroy(ctx, state, rng, cfg)
            repair(ctx, state, rng)
            steps += 1
            sol = _state_to_solution(ctx, state)
            for route in sol.routes:
                assert validate_route(route, inst) == []
    assert steps == 1400

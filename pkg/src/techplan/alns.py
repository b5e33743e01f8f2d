"""Adaptive large-neighbourhood search for the routing problem.

Destroy/repair operators with roulette-wheel selection, record-to-record
acceptance with a linearly vanishing threshold, restarts, and a path
pool fed by every accepted solution.  The pool backs a set-covering
finalization step that recombines routes seen during the search.
"""

from __future__ import annotations

import logging
import math
import random
import time
from dataclasses import dataclass, field

import numpy as np

from .backend import GE, LE, LinearModel, solve_mip
from .core import (
    Instance,
    Route,
    Solution,
    earliest_schedule,
    eligible_tasks,
    solution_objective,
)

log = logging.getLogger(__name__)


@dataclass
class AlnsConfig:
    retries: int = 3
    seconds_per_retry: float = 100.0
    # When set, each retry runs a fixed number of iterations instead of a
    # wall-clock budget; results are then reproducible across machines.
    iters_per_retry: int | None = None
    destroy_lo: float = 0.40
    destroy_hi: float = 0.60
    rtr_threshold: float = 0.0015
    weight_decay: float = 0.99
    score_best: float = 33.0
    score_improve: float = 9.0
    score_accept: float = 13.0
    pool_cap: int = 25000
    setcover_seconds: float = 60.0


@dataclass
class AlnsStats:
    iterations: int = 0
    accepted: int = 0
    new_best: int = 0
    retries: int = 0
    pool_size: int = 0
    seconds: float = 0.0
    best_objective: int = 0
    destroy_weights: dict[str, float] = field(default_factory=dict)
    repair_weights: dict[str, float] = field(default_factory=dict)


class PathPool:
    """Routes seen in accepted solutions, keyed (technician, visit order).

    Each entry keeps the route travel cost and a potential: the best
    objective of any solution the route appeared in.  The pool stops
    growing at `cap` entries; known routes still get potential updates.
    """

    def __init__(self, cap: int = 25000):
        self.cap = cap
        self.entries: dict[tuple[str, tuple[str, ...]], list] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, tech_id: str, order: tuple[str, ...], travel: int, potential: int) -> None:
        if not order:
            return
        key = (tech_id, order)
        entry = self.entries.get(key)
        if entry is not None:
            if potential < entry[1]:
                entry[1] = potential
        elif len(self.entries) < self.cap:
            self.entries[key] = [travel, potential]


class _State:
    """Mutable working solution: visit orders, unserved set, travel cache."""

    __slots__ = ("routes", "unserved", "travel")

    def __init__(self, routes, unserved, travel):
        self.routes: dict[str, list[str]] = routes
        self.unserved: set[str] = unserved
        self.travel: dict[str, int] = travel

    def copy(self) -> "_State":
        return _State(
            {t: list(r) for t, r in self.routes.items()},
            set(self.unserved),
            dict(self.travel),
        )

    def objective(self, ctx) -> int:
        return sum(self.travel.values()) + sum(ctx.penalty[t] for t in self.unserved)


class _Ctx:
    """Per-run lookups shared by the operators."""

    def __init__(self, instance: Instance):
        self.instance = instance
        self.techs = sorted(instance.dailies, key=lambda t: t.id)
        self.tech_by_id = {t.id: t for t in self.techs}
        self.eligible = {t.id: eligible_tasks(t, instance) for t in self.techs}
        self.penalty = {task.id: task.penalty for task in instance.tasks}

    def order_travel(self, tech, order) -> int:
        # Hot-path twin of core.route_travel working on a bare visit order.
        if not order:
            return 0
        tm = self.instance.travel
        by_id = self.instance.task_by_id
        locs = [by_id[t].location for t in order]
        total = tm.time(tech.depot, locs[0], tech.master_id)
        for a, b in zip(locs, locs[1:]):
            total += tm.time(a, b, tech.master_id)
        return total + tm.time(locs[-1], tech.depot, tech.master_id)


def _best_insertion(ctx, state, task_id):
    """Cheapest feasible insertion of a task, or None.

    Returns (delta, tech_id, position); ties break on the tuple
    (delta, tech id, position) so repairs are deterministic.
    """
    best = None
    for tech in ctx.techs:
        if task_id not in ctx.eligible[tech.id]:
            continue
        order = state.routes[tech.id]
        base = state.travel[tech.id]
        for pos in range(len(order) + 1):
            cand = order[:pos] + [task_id] + order[pos:]
            if earliest_schedule(cand, tech, ctx.instance) is None:
                continue
            delta = ctx.order_travel(tech, cand) - base
            key = (delta, tech.id, pos)
            if best is None or key < best:
                best = key
    return best


def _two_best_insertions(ctx, state, task_id):
    """Best and second-best insertion deltas (second may be inf)."""
    best = None
    d2 = math.inf
    for tech in ctx.techs:
        if task_id not in ctx.eligible[tech.id]:
            continue
        order = state.routes[tech.id]
        base = state.travel[tech.id]
        for pos in range(len(order) + 1):
            cand = order[:pos] + [task_id] + order[pos:]
            if earliest_schedule(cand, tech, ctx.instance) is None:
                continue
            delta = ctx.order_travel(tech, cand) - base
            key = (delta, tech.id, pos)
            if best is None or key < best:
                if best is not None:
                    d2 = min(d2, best[0])
                best = key
            else:
                d2 = min(d2, delta)
    return best, d2


def _apply_insertion(ctx, state, task_id, tech_id, pos):
    order = state.routes[tech_id]
    order.insert(pos, task_id)
    state.travel[tech_id] = ctx.order_travel(ctx.tech_by_id[tech_id], order)
    state.unserved.discard(task_id)


def _repair_greedy(ctx, state, rng):
    """Repeated cheapest insertion; skips tasks cheaper left unserved."""
    while True:
        best = None
        for task_id in sorted(state.unserved):
            ins = _best_insertion(ctx, state, task_id)
            if ins is None or ins[0] >= ctx.penalty[task_id]:
                continue
            key = (ins[0], task_id, ins[1], ins[2])
            if best is None or key < best:
                best = key
        if best is None:
            return
        delta, task_id, tech_id, pos = best
        _apply_insertion(ctx, state, task_id, tech_id, pos)


def _repair_regret2(ctx, state, rng):
    """Regret-2 insertion: place the task that loses most by waiting."""
    while True:
        best = None
        for task_id in sorted(state.unserved):
            ins, d2 = _two_best_insertions(ctx, state, task_id)
            if ins is None or ins[0] >= ctx.penalty[task_id]:
                continue
            regret = d2 - ins[0]
            # Max regret first, then cheaper insertion, then task id.
            key = (-regret, ins[0], task_id, ins[1], ins[2])
            if best is None or key < best:
                best = key
        if best is None:
            return
        _, _, task_id, tech_id, pos = best
        _apply_insertion(ctx, state, task_id, tech_id, pos)


def _remove_tasks(ctx, state, removed):
    removed = set(removed)
    for tech_id, order in state.routes.items():
        if any(t in removed for t in order):
            state.routes[tech_id] = [t for t in order if t not in removed]
            state.travel[tech_id] = ctx.order_travel(
                ctx.tech_by_id[tech_id], state.routes[tech_id]
            )
    state.unserved |= removed


def _destroy_random(ctx, state, rng, cfg):
    served = sorted(t for order in state.routes.values() for t in order)
    if not served:
        return
    lo = math.ceil(cfg.destroy_lo * len(served))
    hi = max(lo, math.floor(cfg.destroy_hi * len(served)))
    q = rng.randint(lo, hi)
    _remove_tasks(ctx, state, rng.sample(served, q))


def _destroy_route(ctx, state, rng, cfg):
    nonempty = sorted(t for t, order in state.routes.items() if order)
    if not nonempty:
        return
    _remove_tasks(ctx, state, list(state.routes[rng.choice(nonempty)]))


def initial_solution(ctx) -> _State:
    """Deterministic start: insert by descending penalty, cheapest spot."""
    state = _State(
        {t.id: [] for t in ctx.techs},
        {task.id for task in ctx.instance.tasks},
        {t.id: 0 for t in ctx.techs},
    )
    for task in sorted(ctx.instance.tasks, key=lambda t: (-t.penalty, t.id)):
        ins = _best_insertion(ctx, state, task.id)
        if ins is not None and ins[0] < task.penalty:
            _apply_insertion(ctx, state, task.id, ins[1], ins[2])
    return state


def _state_to_solution(ctx, state) -> Solution:
    routes = []
    for tech in ctx.techs:
        order = state.routes[tech.id]
        if not order:
            continue
        starts = earliest_schedule(order, tech, ctx.instance)
        if starts is None:  # pragma: no cover - states are feasible by construction
            raise RuntimeError(f"infeasible order for {tech.id}: {order}")
        routes.append(Route(tech.id, list(zip(order, starts))))
    return Solution(
        routes=routes,
        unserved=set(state.unserved),
        objective=state.objective(ctx),
    )


def _pool_add_state(pool, ctx, state, obj):
    for tech in ctx.techs:
        order = state.routes[tech.id]
        if order:
            pool.add(tech.id, tuple(order), state.travel[tech.id], obj)


_DESTROY = (("random", _destroy_random), ("route", _destroy_route))
_REPAIR = (("greedy", _repair_greedy), ("regret2", _repair_regret2))


def _pick(rng, weights) -> int:
    total = sum(weights)
    r = rng.random() * total
    acc = 0.0
    for i, w in enumerate(weights):
        acc += w
        if r < acc:
            return i
    return len(weights) - 1


def run_alns(
    instance: Instance, config: AlnsConfig | None = None, seed: int = 0
) -> tuple[Solution, AlnsStats, PathPool]:
    """Run the search and return (best solution, stats, path pool).

    Each retry restarts from the greedy solution with its own rng
    stream.  With `iters_per_retry` set the run is deterministic in
    `seed`; otherwise each retry spends `seconds_per_retry` wall-clock.
    """
    cfg = config or AlnsConfig()
    ctx = _Ctx(instance)
    pool = PathPool(cfg.pool_cap)
    stats = AlnsStats(retries=cfg.retries)
    t0 = time.monotonic()

    best_state = initial_solution(ctx)
    best_obj = best_state.objective(ctx)
    _pool_add_state(pool, ctx, best_state, best_obj)

    wd = [1.0] * len(_DESTROY)
    wr = [1.0] * len(_REPAIR)
    for retry in range(cfg.retries):
        rng = random.Random(seed * 10007 + retry)
        current = initial_solution(ctx)
        cur_obj = current.objective(ctx)
        if cur_obj < best_obj:
            best_state, best_obj = current.copy(), cur_obj
        retry_start = time.monotonic()
        it = 0
        while True:
            if cfg.iters_per_retry is not None:
                if it >= cfg.iters_per_retry:
                    break
                frac = it / cfg.iters_per_retry
            else:
                elapsed = time.monotonic() - retry_start
                if elapsed >= cfg.seconds_per_retry:
                    break
                frac = elapsed / cfg.seconds_per_retry
            it += 1
            stats.iterations += 1
            threshold = cfg.rtr_threshold * (1.0 - frac)

            di = _pick(rng, wd)
            ri = _pick(rng, wr)
            cand = current.copy()
            _DESTROY[di][1](ctx, cand, rng, cfg)
            _REPAIR[ri][1](ctx, cand, rng)
            obj = cand.objective(ctx)

            score = 0.0
            accept = obj < (1.0 + threshold) * best_obj
            if obj < best_obj:
                best_state, best_obj = cand.copy(), obj
                score = cfg.score_best
                stats.new_best += 1
            elif accept and obj < cur_obj:
                score = cfg.score_improve
            elif accept:
                score = cfg.score_accept
            if accept:
                current, cur_obj = cand, obj
                stats.accepted += 1
                _pool_add_state(pool, ctx, cand, obj)
            wd[di] = cfg.weight_decay * wd[di] + (1.0 - cfg.weight_decay) * score
            wr[ri] = cfg.weight_decay * wr[ri] + (1.0 - cfg.weight_decay) * score

    stats.pool_size = len(pool)
    stats.seconds = time.monotonic() - t0
    stats.best_objective = best_obj
    stats.destroy_weights = {name: wd[i] for i, (name, _) in enumerate(_DESTROY)}
    stats.repair_weights = {name: wr[i] for i, (name, _) in enumerate(_REPAIR)}
    solution = _state_to_solution(ctx, best_state)
    if solution_objective(solution, instance) != best_obj:  # pragma: no cover
        raise RuntimeError("objective drift between search state and solution")
    return solution, stats, pool


def setcover_finalize(
    instance: Instance,
    pool: PathPool,
    incumbent: Solution,
    time_limit: float = 60.0,
) -> Solution:
    """Recombine pooled routes by set covering; never worse than incumbent.

    Selects at most one pooled route per technician so every task is
    covered or paid for.  Tasks covered twice are dropped from all but
    the first route (coverage is an inequality).  Falls back to the
    incumbent when the MIP finds nothing better within the time limit.
    """
    ctx = _Ctx(instance)
    entries = dict(pool.entries)
    for route in incumbent.routes:
        key = (route.technician_id, tuple(route.task_ids))
        if key not in entries:
            tech = ctx.tech_by_id[route.technician_id]
            entries[key] = [ctx.order_travel(tech, list(key[1])), incumbent.objective]

    model = LinearModel(f"setcover:{instance.name}")
    keys = sorted(entries)
    path_var = {
        key: model.add_var(f"path[{i}]", binary=True, obj=float(entries[key][0]))
        for i, key in enumerate(keys)
    }
    yvar = {
        task.id: model.add_var(f"unserved[{task.id}]", lb=0.0, obj=task.penalty)
        for task in instance.tasks
    }
    by_tech: dict[str, list] = {}
    by_task: dict[str, list] = {}
    for key in keys:
        by_tech.setdefault(key[0], []).append(path_var[key])
        for task_id in key[1]:
            by_task.setdefault(task_id, []).append(path_var[key])
    for task in instance.tasks:
        coeffs = {v: 1.0 for v in by_task.get(task.id, [])}
        coeffs[yvar[task.id]] = 1.0
        model.add_row(f"cover[{task.id}]", coeffs, GE, 1.0)
    for tech_id in sorted(by_tech):
        model.add_row(f"one_route[{tech_id}]", {v: 1.0 for v in by_tech[tech_id]}, LE, 1.0)

    warm = np.zeros(model.n_vars)
    for route in incumbent.routes:
        warm[path_var[(route.technician_id, tuple(route.task_ids))]] = 1.0
    for task_id in incumbent.unserved:
        warm[yvar[task_id]] = 1.0

    mip = solve_mip(model, time_limit=time_limit, integral_objective=True, warm_start=warm)
    if mip.x is None:
        return incumbent

    seen: set[str] = set()
    routes = []
    for key in keys:
        if mip.x[path_var[key]] < 0.5:
            continue
        order = [t for t in key[1] if t not in seen]
        seen.update(order)
        if not order:
            continue
        tech = ctx.tech_by_id[key[0]]
        starts = earliest_schedule(order, tech, instance)
        if starts is None:  # pragma: no cover - subsequences stay feasible
            log.warning("set cover produced an infeasible order for %s; keeping incumbent", key[0])
            return incumbent
        routes.append(Route(key[0], list(zip(order, starts))))
    routes.sort(key=lambda r: r.technician_id)
    result = Solution(
        routes=routes,
        unserved={task.id for task in instance.tasks if task.id not in seen}
        - set(incumbent.digitized),
        digitized=set(incumbent.digitized),
    )
    result.objective = solution_objective(result, instance)
    if result.objective > incumbent.objective:
        return incumbent
    return result

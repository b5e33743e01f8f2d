"""Exact routing and scheduling MIP for desk-scale instances.

Arc-based formulation over (technician, i, j) with continuous service
start times, coverage-or-penalty objective, and per-arc big-M chaining.
Implied-infeasible arcs are dropped up front; durations are positive,
so chaining alone rules out subtours.
"""

from __future__ import annotations

import itertools
import logging

import numpy as np

from .alns import AlnsConfig, run_alns
from .backend import EQ, GE, LE, LinearModel, MipSolution, solve_lp, solve_mip
from .core import (
    Instance,
    Route,
    Solution,
    earliest_schedule,
    eligible_tasks,
    solution_objective,
    validate_route,
)

log = logging.getLogger(__name__)

DESK_TASKS = 20
DESK_TECHS = 3

DEPOT = "@depot"


def _service_bounds(task, tech, travel):
    """Feasible z-interval of a task for a technician, or None.

    Unlike the candidate filter, this accounts for the return leg to
    the depot, which the schedule must fit before the shift ends.
    """
    back = travel.time(task.location, tech.depot, tech.master_id)
    lo = max(task.window.start, tech.window.start)
    hi = min(task.window.end, tech.window.end - back) - task.duration
    if lo > hi:
        return None
    return lo, hi


def build_trsp(instance: Instance):
    """Build the exact MIP.  Returns (model, index) for extraction.

    index maps: arc[(tech_id, i, j)] -> var, y[task_id] -> var,
    z[(tech_id, task_id)] -> var, with DEPOT as the pseudo-node.
    """
    model = LinearModel(f"trsp:{instance.name}")
    tm = instance.travel
    arc: dict[tuple[str, str, str], int] = {}
    yvar: dict[str, int] = {}
    zvar: dict[tuple[str, str], int] = {}
    svar: dict[tuple[str, str], int] = {}
    bounds: dict[tuple[str, str], tuple[int, int]] = {}

    for task in instance.tasks:
        yvar[task.id] = model.add_var(f"unserved[{task.id}]", lb=0.0, obj=task.penalty)

    served_by: dict[str, list[str]] = {t.id: [] for t in instance.tasks}
    for tech in instance.dailies:
        cand = []
        lo: dict[str, int] = {}
        hi: dict[str, int] = {}
        for tid in sorted(eligible_tasks(tech, instance)):
            task = instance.task_by_id[tid]
            zb = _service_bounds(task, tech, tm)
            if zb is None:
                continue
            cand.append(task)
            lo[tid], hi[tid] = zb

        # Start-bound propagation to a fixpoint: a served task starts no
        # earlier than its cheapest feasible way in (depot departure or
        # completion of some predecessor).  Tightening lo shrinks big-M
        # below and can delete tasks and arcs outright.
        def depot_feasible(task):
            return tech.window.start + tm.time(tech.depot, task.location, tech.master_id) <= hi[task.id]

        def arc_feasible(a, b):
            return lo[a.id] + a.duration + tm.time(a.location, b.location, tech.master_id) <= hi[b.id]

        for _ in range(len(cand) + 1):
            changed = False
            for task in list(cand):
                arrivals = []
                if depot_feasible(task):
                    arrivals.append(
                        tech.window.start + tm.time(tech.depot, task.location, tech.master_id)
                    )
                for prev in cand:
                    if prev.id != task.id and arc_feasible(prev, task):
                        arrivals.append(
                            lo[prev.id]
                            + prev.duration
                            + tm.time(prev.location, task.location, tech.master_id)
                        )
                if not arrivals:
                    cand.remove(task)
                    del lo[task.id], hi[task.id]
                    changed = True
                    continue
                new_lo = max(lo[task.id], min(arrivals))
                if new_lo > hi[task.id]:
                    cand.remove(task)
                    del lo[task.id], hi[task.id]
                    changed = True
                elif new_lo > lo[task.id]:
                    lo[task.id] = new_lo
                    changed = True
            if not changed:
                break

        for task in cand:
            bounds[(tech.id, task.id)] = (lo[task.id], hi[task.id])
            zvar[(tech.id, task.id)] = model.add_var(
                f"start[{tech.id},{task.id}]", lb=lo[task.id], ub=hi[task.id]
            )
            served_by[task.id].append(tech.id)

        for task in cand:
            c_out = tm.time(tech.depot, task.location, tech.master_id)
            if depot_feasible(task):
                arc[(tech.id, DEPOT, task.id)] = model.add_var(
                    f"arc[{tech.id},{DEPOT},{task.id}]", binary=True, obj=c_out
                )
            arc[(tech.id, task.id, DEPOT)] = model.add_var(
                f"arc[{tech.id},{task.id},{DEPOT}]",
                binary=True,
                obj=tm.time(task.location, tech.depot, tech.master_id),
            )
        for a in cand:
            for b in cand:
                if a.id != b.id and arc_feasible(a, b):
                    arc[(tech.id, a.id, b.id)] = model.add_var(
                        f"arc[{tech.id},{a.id},{b.id}]",
                        binary=True,
                        obj=tm.time(a.location, b.location, tech.master_id),
                    )

        # Infeasible two-arc chains: entering j via p forces j to start at
        # max(lo_p + f_p + c_pj, lo_j); when that start cannot reach k in
        # time the two arcs exclude each other.  Big-M rows encode this
        # only after branching; stating it on the binaries prunes both the
        # LP and the tree.
        for j in cand:
            ins = [
                (p, arc[(tech.id, p.id, j.id)])
                for p in cand
                if p.id != j.id and (tech.id, p.id, j.id) in arc
            ]
            if (tech.id, DEPOT, j.id) in arc:
                ins.append((None, arc[(tech.id, DEPOT, j.id)]))
            outs = [
                (k, arc[(tech.id, j.id, k.id)])
                for k in cand
                if k.id != j.id and (tech.id, j.id, k.id) in arc
            ]
            for p, vin in ins:
                if p is None:
                    arrive = tech.window.start + tm.time(
                        tech.depot, j.location, tech.master_id
                    )
                    pname = DEPOT
                else:
                    arrive = lo[p.id] + p.duration + tm.time(
                        p.location, j.location, tech.master_id
                    )
                    pname = p.id
                start_j = max(arrive, lo[j.id])
                for k, vout in outs:
                    if p is not None and p.id == k.id:
                        continue
                    done = start_j + j.duration + tm.time(
                        j.location, k.location, tech.master_id
                    )
                    if done > hi[k.id]:
                        model.add_row(
                            f"chain2[{tech.id},{pname},{j.id},{k.id}]",
                            {vin: 1.0, vout: 1.0},
                            LE,
                            1.0,
                        )

        # Serve indicators: s equals the out-degree of the task for this
        # technician.  The assignment structure lives in these variables,
        # and branching on them first decomposes the search.
        for task in cand:
            outs = [v for (t, i, j), v in arc.items() if t == tech.id and i == task.id]
            s = model.add_var(f"serve[{tech.id},{task.id}]", binary=True)
            svar[(tech.id, task.id)] = s
            coeffs = {v: 1.0 for v in outs}
            coeffs[s] = -1.0
            model.add_row(f"link[{tech.id},{task.id}]", coeffs, EQ, 0.0)

        # Mutually exclusive pairs: under the triangle inequality a
        # detour never relaxes timing, so if no direct order of two
        # tasks fits this shift, no route serves both.
        for a_pos, a in enumerate(cand):
            for b in cand[a_pos + 1 :]:
                if (tech.id, a.id, b.id) not in arc and (tech.id, b.id, a.id) not in arc:
                    model.add_row(
                        f"excl[{tech.id},{a.id},{b.id}]",
                        {svar[(tech.id, a.id)]: 1.0, svar[(tech.id, b.id)]: 1.0},
                        LE,
                        1.0,
                    )

        # Shift-load row: a route's travel plus its service time never
        # exceeds the shift width (waiting only adds).  Big-M chaining
        # carries this fact only arc by arc after branching; stated
        # whole it stops the LP from blending time-infeasible tours.
        load: dict[int, float] = {}
        for (t, i, j), v in arc.items():
            if t == tech.id:
                load[v] = model.obj[v]
        for task in cand:
            load[svar[(tech.id, task.id)]] = float(task.duration)
        if load:
            model.add_row(
                f"load[{tech.id}]", load, LE, float(tech.window.end - tech.window.start)
            )

        # Depot departure and return at most once; flow conservation.
        out_d = {v: 1.0 for (t, i, j), v in arc.items() if t == tech.id and i == DEPOT}
        if out_d:
            model.add_row(f"depart[{tech.id}]", out_d, LE, 1.0)
        in_d = {v: 1.0 for (t, i, j), v in arc.items() if t == tech.id and j == DEPOT}
        if in_d:
            model.add_row(f"return[{tech.id}]", in_d, LE, 1.0)
        for task in cand:
            coeffs: dict[int, float] = {}
            for (t, i, j), v in arc.items():
                if t != tech.id:
                    continue
                if j == task.id:
                    coeffs[v] = coeffs.get(v, 0.0) + 1.0
                elif i == task.id:
                    coeffs[v] = coeffs.get(v, 0.0) - 1.0
            model.add_row(f"flow[{tech.id},{task.id}]", coeffs, EQ, 0.0)

        # Chaining: z_i + f_i + c_ij <= z_j unless the arc is unused.
        for (t, i, j), v in list(arc.items()):
            if t != tech.id:
                continue
            if i == DEPOT and j != DEPOT:
                task_j = instance.task_by_id[j]
                c_dj = tm.time(tech.depot, task_j.location, tech.master_id)
                model.add_row(
                    f"chain[{tech.id},{DEPOT},{j}]",
                    {v: float(c_dj), zvar[(tech.id, j)]: -1.0},
                    LE,
                    float(-tech.window.start),
                )
            elif j == DEPOT:
                continue
            else:
                task_i = instance.task_by_id[i]
                c_ij = tm.time(task_i.location, instance.task_by_id[j].location, tech.master_id)
                # Tightest valid M from the z-variable bounds: with the arc
                # unused the row must allow z_i at its upper and z_j at its
                # lower bound.  Integer solutions are unchanged; the LP
                # relaxation is much stronger than with window-based M.
                _, hi_i = bounds[(tech.id, i)]
                lo_j, _ = bounds[(tech.id, j)]
                big_m = max(hi_i + task_i.duration + c_ij - lo_j, 0)
                model.add_row(
                    f"chain[{tech.id},{i},{j}]",
                    {zvar[(tech.id, i)]: 1.0, zvar[(tech.id, j)]: -1.0, v: float(big_m)},
                    LE,
                    float(big_m - task_i.duration - c_ij),
                )
        # Two-cycle cuts: integer-redundant given chaining, but they
        # close most of the big-M gap in the LP relaxation.
        for a_pos, a in enumerate(cand):
            for b in cand[a_pos + 1 :]:
                va = arc.get((tech.id, a.id, b.id))
                vb = arc.get((tech.id, b.id, a.id))
                if va is not None and vb is not None:
                    model.add_row(
                        f"twocycle[{tech.id},{a.id},{b.id}]", {va: 1.0, vb: 1.0}, LE, 1.0
                    )

        # Single-commodity flow layer: the depot ships one unit per
        # visited task, each visit absorbs one.  Redundant for integer
        # solutions (chaining already forbids cycles) but it denies the
        # LP the disconnected fractional cycles that otherwise cover
        # tasks without any depot leg.
        k_route = len(cand)
        gvar: dict[tuple[str, str], int] = {}
        for (t, i, j), v in list(arc.items()):
            if t != tech.id or j == DEPOT:
                continue
            cap = k_route if i == DEPOT else k_route - 1
            if cap <= 0:
                continue
            g = model.add_var(f"flow[{tech.id},{i},{j}]", lb=0.0, ub=float(cap))
            gvar[(i, j)] = g
            model.add_row(f"flowcap[{tech.id},{i},{j}]", {g: 1.0, v: -float(cap)}, LE, 0.0)
        for task in cand:
            coeffs = {}
            for (i, j), g in gvar.items():
                if j == task.id:
                    coeffs[g] = coeffs.get(g, 0.0) + 1.0
                elif i == task.id:
                    coeffs[g] = coeffs.get(g, 0.0) - 1.0
            coeffs[svar[(tech.id, task.id)]] = -1.0
            model.add_row(f"absorb[{tech.id},{task.id}]", coeffs, EQ, 0.0)

    for task in instance.tasks:
        servers = {v: 1.0 for (t, tid), v in svar.items() if tid == task.id}
        coeffs = dict(servers)
        coeffs[yvar[task.id]] = 1.0
        model.add_row(f"cover[{task.id}]", coeffs, GE, 1.0)
        # Serve each task at most once across technicians.  A duplicate
        # visit never pays (travel obeys the triangle inequality), so the
        # optimum is unchanged, extraction stays single-served, and the
        # LP tightens.
        if len(servers) > 1:
            model.add_row(f"once[{task.id}]", servers, LE, 1.0)

    index = {"arc": arc, "y": yvar, "z": zvar, "serve": svar, "bounds": bounds}
    return model, index


def _all_unserved_start(model: LinearModel, index) -> np.ndarray:
    """Feasible warm start: nobody drives, every task pays its penalty."""
    x = np.array(model.lb, dtype=float)
    for v in index["y"].values():
        x[v] = 1.0
    return x


def _solution_warm_start(model: LinearModel, index, solution: Solution) -> np.ndarray:
    """Lift a routed solution into the full variable vector."""
    x = np.array(model.lb, dtype=float)
    for tid in solution.unserved:
        x[index["y"][tid]] = 1.0
    for route in solution.routes:
        t = route.technician_id
        order = route.task_ids
        prev = DEPOT
        for pos, tid in enumerate(order):
            x[index["arc"][(t, prev, tid)]] = 1.0
            x[model.var_index(f"flow[{t},{prev},{tid}]")] = float(len(order) - pos)
            x[index["serve"][(t, tid)]] = 1.0
            prev = tid
        x[index["arc"][(t, prev, DEPOT)]] = 1.0
        for tid, start in route.visits:
            x[index["z"][(t, tid)]] = float(start)
    return x


def _subtour_rounds(
    model: LinearModel, index: dict, instance: Instance, rounds: int = 30, max_size: int = 6
) -> int:
    """Root cutting: add violated path subtour rows, return how many.

    For a technician t, a task subset S and a chosen task k in S, every
    route satisfies  sum of arcs within S  <=  serves(S) - serve(k):
    visits inside S form disjoint subpaths, so the arc count stays one
    below the visit count whenever any task of S is served.  Integer
    solutions always pass; the fractional two-cycle clusters the plain
    relaxation produces fail it badly, so a few rounds of exact
    separation over the fractional support tighten the root bound a lot.
    """
    arc = index["arc"]
    svar = index["serve"]
    arcs_by_tech: dict[str, list[tuple[str, str, int]]] = {}
    for (t, i, j), v in arc.items():
        if i != DEPOT and j != DEPOT:
            arcs_by_tech.setdefault(t, []).append((i, j, v))
    added = 0
    for _ in range(rounds):
        sol = solve_lp(model)
        if sol.status != "optimal":
            break
        new = 0
        for tech in instance.dailies:
            support = sorted(
                {
                    n
                    for i, j, v in arcs_by_tech.get(tech.id, ())
                    if 1e-6 < sol.x[v] < 1.0 - 1e-6
                    for n in (i, j)
                }
            )
            if not support:
                continue
            inside = [
                (i, j, v)
                for i, j, v in arcs_by_tech[tech.id]
                if i in set(support) and j in set(support)
            ]
            for r in range(2, min(len(support), max_size) + 1):
                for subset in itertools.combinations(support, r):
                    sset = set(subset)
                    members = [(i, j, v) for i, j, v in inside if i in sset and j in sset]
                    lhs = sum(sol.x[v] for _, _, v in members)
                    serves = [(sol.x[svar[(tech.id, n)]], n) for n in subset]
                    smax, pick = max(serves)
                    rhs = sum(val for val, _ in serves) - smax
                    if lhs <= rhs + 1e-6:
                        continue
                    coeffs: dict[int, float] = {}
                    for _, _, v in members:
                        coeffs[v] = coeffs.get(v, 0.0) + 1.0
                    for _, n in serves:
                        if n != pick:
                            coeffs[svar[(tech.id, n)]] = -1.0
                    model.add_row(
                        f"subtour[{tech.id},{'|'.join(subset)},{pick}]", coeffs, LE, 0.0
                    )
                    new += 1
        if new == 0:
            break
        added += new
    return added


def solve_trsp(instance: Instance, time_limit: float | None = None) -> tuple[Solution, MipSolution]:
    """Solve the exact MIP and extract a validated Solution.

    The extracted objective equals the MIP objective exactly when the
    solve finished; on a time limit the incumbent is extracted and the
    MipSolution carries the remaining gap.
    """
    if len(instance.tasks) > DESK_TASKS or len(instance.dailies) > DESK_TECHS:
        log.warning(
            "instance %s exceeds desk scale (%d tasks, %d daily technicians); "
            "the exact model may take very long",
            instance.name,
            len(instance.tasks),
            len(instance.dailies),
        )
    model, index = build_trsp(instance)
    _subtour_rounds(model, index, instance)

    # Seed the search with a quick deterministic heuristic incumbent;
    # fall back to the all-unserved point if lifting it fails (possible
    # only with travel matrices violating the triangle inequality).
    warm = _all_unserved_start(model, index)
    heur, _, _ = run_alns(
        instance, AlnsConfig(retries=1, iters_per_retry=250, pool_cap=1000), seed=1
    )
    lifted = _solution_warm_start(model, index, heur)
    if not model.check_feasible(lifted):
        warm = lifted

    prio = np.zeros(model.n_vars)
    for v in index["serve"].values():
        prio[v] = 2.0
    for (t, i, j), v in index["arc"].items():
        if i == DEPOT:
            prio[v] = 1.0

    mip = solve_mip(
        model,
        time_limit=time_limit,
        integral_objective=True,
        warm_start=warm,
        branch_priority=prio,
    )
    if mip.x is None:
        raise RuntimeError(f"exact solve failed with status {mip.status}")

    arc = index["arc"]
    succ: dict[str, dict[str, str]] = {}
    for (t, i, j), v in arc.items():
        if mip.x[v] > 0.5:
            succ.setdefault(t, {})[i] = j
    routes = []
    served = set()
    for tech in instance.dailies:
        chain = succ.get(tech.id, {})
        if DEPOT not in chain:
            continue
        order = []
        node = chain[DEPOT]
        while node != DEPOT:
            if node in served:
                raise RuntimeError(f"task {node} served twice in the MIP solution")
            order.append(node)
            served.add(node)
            node = chain[node]
        starts = earliest_schedule(order, tech, instance)
        if starts is None:
            raise RuntimeError(f"MIP route for {tech.id} is not schedulable")
        route = Route(technician_id=tech.id, visits=list(zip(order, starts)))
        bad = validate_route(route, instance)
        if bad:
            raise RuntimeError(f"MIP route for {tech.id} invalid: {bad[0]}")
        routes.append(route)

    unserved = {t.id for t in instance.tasks} - served
    solution = Solution(routes=routes, unserved=unserved)
    solution.objective = solution_objective(solution, instance)
    if mip.status == "optimal" and solution.objective != round(mip.objective):
        raise RuntimeError(
            f"extracted objective {solution.objective} != MIP objective {mip.objective}"
        )
    return solution, mip

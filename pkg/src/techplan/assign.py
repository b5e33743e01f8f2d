"""Task-assignment approximation of the routing problem.

Routing is replaced by a per-technician travel estimate: a scale factor
times the longest single leg implied by the assigned tasks (pairwise
and depot legs).  Time windows enter as pairwise overlap cuts and a
capacity row, not as a schedule.  The investment variant adds overtime,
digitization, skill-bundle and hiring decisions on top.
"""

from __future__ import annotations

from .backend import GE, LE, LinearModel
from .catalog import InvestmentCatalog
from .core import Instance, eligible_tasks, expand_daily, tasks_overlap

TRAVEL_SCALE = 5


def _pair_rows(model, instance, tech, cand, xvars, est, scale):
    """Travel-estimate and overlap rows for one technician."""
    tm = instance.travel
    for a_pos, a in enumerate(cand):
        c_da = tm.time(tech.depot, a.location, tech.master_id)
        if c_da > 0:
            model.add_row(
                f"est_depot[{tech.id},{a.id}]",
                {est: 1.0, xvars[a.id]: -float(scale * c_da)},
                GE,
                0.0,
            )
        for b in cand[a_pos + 1 :]:
            c_ab = max(
                tm.time(a.location, b.location, tech.master_id),
                tm.time(b.location, a.location, tech.master_id),
            )
            if tasks_overlap(a, b):
                model.add_row(
                    f"overlap[{tech.id},{a.id},{b.id}]",
                    {xvars[a.id]: 1.0, xvars[b.id]: 1.0},
                    LE,
                    1.0,
                )
            elif c_ab > 0:
                model.add_row(
                    f"est_pair[{tech.id},{a.id},{b.id}]",
                    {
                        est: 1.0,
                        xvars[a.id]: -float(scale * c_ab),
                        xvars[b.id]: -float(scale * c_ab),
                    },
                    GE,
                    -float(scale * c_ab),
                )


def build_assignment(instance: Instance, travel_scale: int = TRAVEL_SCALE):
    """Build the plain assignment model.  Returns (model, index).

    index maps: assign[(tech_id, task_id)] -> var, est[tech_id] -> var,
    y[task_id] -> var.
    """
    model = LinearModel(f"assign:{instance.name}")
    tm = instance.travel
    yvar = {
        task.id: model.add_var(f"unserved[{task.id}]", lb=0.0, obj=task.penalty)
        for task in instance.tasks
    }
    assign: dict[tuple[str, str], int] = {}
    est: dict[str, int] = {}

    for tech in instance.dailies:
        cand = [instance.task_by_id[tid] for tid in sorted(eligible_tasks(tech, instance))]
        est[tech.id] = model.add_var(f"travel_est[{tech.id}]", lb=0.0, obj=1.0)
        xvars = {
            task.id: model.add_var(f"assign[{tech.id},{task.id}]", binary=True)
            for task in cand
        }
        for task in cand:
            assign[(tech.id, task.id)] = xvars[task.id]
        _pair_rows(model, instance, tech, cand, xvars, est[tech.id], travel_scale)
        cap = {
            xvars[task.id]: float(
                task.duration + tm.time(tech.depot, task.location, tech.master_id)
            )
            for task in cand
        }
        if cap:
            model.add_row(f"capacity[{tech.id}]", cap, LE, float(tech.capacity))

    for task in instance.tasks:
        coeffs = {yvar[task.id]: 1.0}
        for tech in instance.dailies:
            v = assign.get((tech.id, task.id))
            if v is not None:
                coeffs[v] = 1.0
        model.add_row(f"cover[{task.id}]", coeffs, GE, 1.0)

    return model, {"assign": assign, "est": est, "y": yvar}


def invest_candidates(instance: Instance, catalog: InvestmentCatalog, tech) -> list:
    """Tasks a technician could serve if investments were bought.

    Skills are relaxed to what the bundles could add; the technician
    window is extended by the overtime option; the travel cap stays.
    Tasks with a missing skill no bundle offers are excluded.
    """
    upgradable = set()
    for b in catalog.bundles:
        upgradable |= b.skills
    out = []
    for tid in sorted(
        eligible_tasks(tech, instance, ignore_skills=True, overtime=catalog.overtime_minutes)
    ):
        task = instance.task_by_id[tid]
        if (task.skills - tech.skills) <= upgradable:
            out.append(task)
    return out


def build_assignment_invest(
    instance: Instance, catalog: InvestmentCatalog, travel_scale: int = TRAVEL_SCALE
):
    """Build the assignment model with investment decisions.

    Returns (model, index); index adds ot[tech_id], dig[task_id],
    bundle[(master_id, bundle_pos)] and hire[master_id] over the plain
    assignment maps.  Hire-candidate technicians join the pool gated on
    their hire decision; capacity grows with overtime; digitizing a
    task satisfies its coverage row.
    """
    model = LinearModel(f"assign-invest:{instance.name}")
    tm = instance.travel
    dailies = list(instance.dailies) + expand_daily(
        catalog.hire_candidates, instance.horizon_days
    )
    masters = {m.id: m for m in instance.masters}
    for m in catalog.hire_candidates:
        masters[m.id] = m

    yvar = {
        task.id: model.add_var(f"unserved[{task.id}]", lb=0.0, obj=task.penalty)
        for task in instance.tasks
    }
    dig = {
        tid: model.add_var(f"dig[{tid}]", binary=True, obj=cost)
        for tid, cost in sorted(catalog.digitization.items())
    }
    bundle: dict[tuple[str, int], int] = {}
    for mid in sorted(masters):
        for bi, b in enumerate(catalog.bundles):
            bundle[(mid, bi)] = model.add_var(f"bundle[{mid},{bi}]", binary=True, obj=b.cost)
    hire = {
        m.id: model.add_var(f"hire[{m.id}]", binary=True, obj=catalog.hire_cost(m))
        for m in catalog.hire_candidates
    }

    assign: dict[tuple[str, str], int] = {}
    est: dict[str, int] = {}
    ot: dict[str, int] = {}
    for tech in dailies:
        cand = invest_candidates(instance, catalog, tech)
        est[tech.id] = model.add_var(f"travel_est[{tech.id}]", lb=0.0, obj=1.0)
        ot[tech.id] = model.add_var(f"ot[{tech.id}]", binary=True, obj=catalog.overtime_cost)
        xvars = {
            task.id: model.add_var(f"assign[{tech.id},{task.id}]", binary=True)
            for task in cand
        }
        for task in cand:
            assign[(tech.id, task.id)] = xvars[task.id]
        _pair_rows(model, instance, tech, cand, xvars, est[tech.id], travel_scale)
        cap = {
            xvars[task.id]: float(
                task.duration + tm.time(tech.depot, task.location, tech.master_id)
            )
            for task in cand
        }
        if cap:
            cap[ot[tech.id]] = -float(catalog.overtime_minutes)
            model.add_row(f"capacity[{tech.id}]", cap, LE, float(tech.capacity))

        for task in cand:
            for s in sorted(task.skills - tech.skills):
                gate = {xvars[task.id]: 1.0}
                for bi, b in enumerate(catalog.bundles):
                    if s in b.skills:
                        gate[bundle[(tech.master_id, bi)]] = -1.0
                model.add_row(f"skillgate[{tech.id},{task.id},{s}]", gate, LE, 0.0)
            if tech.hire_candidate:
                model.add_row(
                    f"hiregate[{tech.id},{task.id}]",
                    {xvars[task.id]: 1.0, hire[tech.master_id]: -1.0},
                    LE,
                    0.0,
                )

    for task in instance.tasks:
        coeffs = {yvar[task.id]: 1.0}
        if task.id in dig:
            coeffs[dig[task.id]] = 1.0
        for tech in dailies:
            v = assign.get((tech.id, task.id))
            if v is not None:
                coeffs[v] = 1.0
        model.add_row(f"cover[{task.id}]", coeffs, GE, 1.0)

    budgets = catalog.budgets
    if budgets.overtime is not None and ot:
        model.add_row("budget_ot", {v: 1.0 for v in ot.values()}, LE, float(budgets.overtime))
    if budgets.digitization is not None and dig:
        model.add_row("budget_dig", {v: 1.0 for v in dig.values()}, LE, float(budgets.digitization))
    if budgets.skill is not None and bundle:
        model.add_row("budget_skill", {v: 1.0 for v in bundle.values()}, LE, float(budgets.skill))
    if budgets.hire is not None and hire:
        model.add_row("budget_hire", {v: 1.0 for v in hire.values()}, LE, float(budgets.hire))

    index = {
        "assign": assign,
        "est": est,
        "y": yvar,
        "ot": ot,
        "dig": dig,
        "bundle": bundle,
        "hire": hire,
        "dailies": [d.id for d in dailies],
    }
    return model, index

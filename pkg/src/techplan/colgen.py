"""Column generation for the investment-planning assignment model.

The restricted master picks at most one task set ("column") per daily
technician together with the investment decisions (overtime, skill
bundles, hiring, digitization).  Pricing solves one small MIP per
technician whose objective is the column's reduced cost under the
current master duals; negative columns are accumulated until pricing
proves none exists or the iteration cap is hit, and the final master is
then solved as an integer program over everything generated.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

from .assign import TRAVEL_SCALE, _pair_rows, invest_candidates
from .backend import GE, LE, LinearModel, MipSolution, solve_lp, solve_mip
from .catalog import InvestmentCatalog
from .core import Instance, Solution, eligible_tasks, expand_daily, tasks_overlap

log = logging.getLogger(__name__)

DUAL_SIGN_TOL = 1e-7


@dataclass(frozen=True)
class Column:
    """One candidate task set for one daily technician.

    Canonical: task ids and bundle positions sorted, so equal columns
    compare equal and dedup by identity key works.  The pricing
    objective rides along for auditing and never takes part in
    comparisons.
    """

    technician_id: str
    task_ids: tuple[str, ...]
    uses_overtime: bool = False
    bundles: tuple[int, ...] = ()
    cost: int = 0
    pricing_objective: float | None = field(default=None, compare=False, repr=False)

    def key(self) -> tuple:
        return (self.technician_id, self.task_ids, self.uses_overtime, self.bundles)


@dataclass
class Duals:
    """Master dual values by row family; anything absent reads as 0.

    alpha: per technician (at-most-one-assignment, <= rows, so <= 0)
    beta: per new technician (hire linkage, <= 0)
    gamma: per technician (overtime linkage, <= 0)
    mu: per (technician, bundle position) (skill linkage, <= 0)
    nu: per task (coverage, >= rows, so >= 0)
    """

    alpha: dict[str, float] = field(default_factory=dict)
    beta: dict[str, float] = field(default_factory=dict)
    gamma: dict[str, float] = field(default_factory=dict)
    mu: dict[tuple[str, int], float] = field(default_factory=dict)
    nu: dict[str, float] = field(default_factory=dict)


@dataclass
class ColgenConfig:
    max_iters: int = 75
    cols_per_tech: int = 1
    global_cap: int | None = None  # max technicians priced per iteration
    subproblem_time: float = 3.0
    master_lp_time: float = 30.0
    final_ip_time: float = 60.0
    neg_tol: float = -1e-6
    warmstart: bool = True

    def __post_init__(self):
        if self.max_iters <= 0 or self.cols_per_tech <= 0:
            raise ValueError("iteration limits must be positive")
        if self.subproblem_time <= 0 or self.master_lp_time <= 0 or self.final_ip_time <= 0:
            raise ValueError("time limits must be positive")
        if self.global_cap is not None and self.global_cap <= 0:
            raise ValueError("global_cap must be positive")

    @classmethod
    def large(cls) -> "ColgenConfig":
        """Preset for instances in the hundreds of tasks."""
        return cls(master_lp_time=120.0, final_ip_time=1200.0, global_cap=500)


@dataclass
class ColgenResult:
    mip: MipSolution
    trace: list[tuple[int, float, int, float]]  # (iteration, lp_obj, n_new_cols, seconds)
    columns: list[Column]
    cg_optimal: bool
    master_model: LinearModel
    master_index: dict
    audits: list[tuple[Column, Duals]] = field(default_factory=list)


def estimate_cost(task_ids, tech, instance: Instance, scale: int = TRAVEL_SCALE) -> int:
    """Scaled travel estimate of a task set: scale times the longest
    single leg (depot legs and pairwise legs, worst direction)."""
    tm = instance.travel
    tasks = [instance.task_by_id[tid] for tid in task_ids]
    worst = 0
    for pos, a in enumerate(tasks):
        worst = max(worst, tm.time(tech.depot, a.location, tech.master_id))
        for b in tasks[pos + 1 :]:
            worst = max(
                worst,
                tm.time(a.location, b.location, tech.master_id),
                tm.time(b.location, a.location, tech.master_id),
            )
    return scale * worst


def initial_columns(instance: Instance) -> list[Column]:
    """Greedy seed columns plus an empty column per daily technician.

    Tasks are packed in id order subject to the capacity estimate
    (duration plus depot leg) and pairwise overlap; each task lands on
    at most one technician.  The empty columns keep every master
    feasible no matter what pricing later contributes.
    """
    tm = instance.travel
    out: list[Column] = []
    seen: set[tuple] = set()
    served: set[str] = set()
    for tech in sorted(instance.dailies, key=lambda t: t.id):
        chosen: list = []
        used = 0.0
        for tid in sorted(eligible_tasks(tech, instance)):
            if tid in served:
                continue
            task = instance.task_by_id[tid]
            need = task.duration + tm.time(tech.depot, task.location, tech.master_id)
            if used + need > tech.capacity:
                continue
            if any(tasks_overlap(task, other) for other in chosen):
                continue
            chosen.append(task)
            used += need
        for ids in ({t.id for t in chosen}, set()):
            col = Column(
                technician_id=tech.id,
                task_ids=tuple(sorted(ids)),
                cost=estimate_cost(sorted(ids), tech, instance),
            )
            if col.key() not in seen:
                seen.add(col.key())
                out.append(col)
        served |= {t.id for t in chosen}
    return out


def _invest_universe(instance: Instance, catalog: InvestmentCatalog):
    """All daily technicians (existing plus hire candidates) and the
    master map behind them."""
    dailies = list(instance.dailies) + expand_daily(
        catalog.hire_candidates, instance.horizon_days
    )
    masters = {m.id: m for m in instance.masters}
    for m in catalog.hire_candidates:
        masters[m.id] = m
    return dailies, masters


def build_master(
    columns: list[Column],
    instance: Instance,
    catalog: InvestmentCatalog,
    relax_columns: bool = False,
):
    """Build the restricted master.  Returns (model, index).

    Rows are laid down family by family — assignment, hire linkage,
    overtime linkage, skill linkage, coverage, budgets — and the index
    records each row's position so dual extraction is positional.

    With relax_columns the column variables are continuous with no
    upper bound: the at-most-one row already caps them, and leaving the
    explicit bound off keeps all of a column's value in the row duals,
    which is what pricing compares against.  The final integer solve
    uses the binary form.
    """
    dailies, masters = _invest_universe(instance, catalog)
    tech_ids = {t.id for t in dailies}
    for col in columns:
        if col.technician_id not in tech_ids:
            raise ValueError(f"column references unknown technician {col.technician_id}")

    model = LinearModel(f"master:{instance.name}")
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
    ot = {
        tech.id: model.add_var(f"ot[{tech.id}]", binary=True, obj=catalog.overtime_cost)
        for tech in dailies
    }
    xvar: list[int] = []
    for pos, col in enumerate(columns):
        name = f"col[{pos},{col.technician_id}]"
        if relax_columns:
            xvar.append(model.add_var(name, lb=0.0, obj=col.cost))
        else:
            xvar.append(model.add_var(name, binary=True, obj=col.cost))

    by_tech: dict[str, list[int]] = {}
    for pos, col in enumerate(columns):
        by_tech.setdefault(col.technician_id, []).append(pos)

    rows: dict[str, dict] = {"alpha": {}, "beta": {}, "gamma": {}, "mu": {}, "nu": {}}
    for tech in dailies:
        positions = by_tech.get(tech.id, ())
        if positions:
            rows["alpha"][tech.id] = model.add_row(
                f"assign[{tech.id}]", {xvar[p]: 1.0 for p in positions}, LE, 1.0
            )
    for tech in dailies:
        if not tech.hire_candidate:
            continue
        # Only working columns imply the hire; an empty column must not.
        positions = [p for p in by_tech.get(tech.id, ()) if columns[p].task_ids]
        if positions:
            coeffs = {xvar[p]: 1.0 for p in positions}
            coeffs[hire[tech.master_id]] = -1.0
            rows["beta"][tech.id] = model.add_row(f"hired[{tech.id}]", coeffs, LE, 0.0)
    for tech in dailies:
        positions = [p for p in by_tech.get(tech.id, ()) if columns[p].uses_overtime]
        if positions:
            coeffs = {xvar[p]: 1.0 for p in positions}
            coeffs[ot[tech.id]] = -1.0
            rows["gamma"][tech.id] = model.add_row(f"overtime[{tech.id}]", coeffs, LE, 0.0)
    for tech in dailies:
        for bi in range(len(catalog.bundles)):
            positions = [p for p in by_tech.get(tech.id, ()) if bi in columns[p].bundles]
            if positions:
                coeffs = {xvar[p]: 1.0 for p in positions}
                coeffs[bundle[(tech.master_id, bi)]] = -1.0
                rows["mu"][(tech.id, bi)] = model.add_row(
                    f"skill[{tech.id},{bi}]", coeffs, LE, 0.0
                )
    for task in instance.tasks:
        coeffs = {yvar[task.id]: 1.0}
        if task.id in dig:
            coeffs[dig[task.id]] = 1.0
        for pos, col in enumerate(columns):
            if task.id in col.task_ids:
                coeffs[xvar[pos]] = 1.0
        rows["nu"][task.id] = model.add_row(f"cover[{task.id}]", coeffs, GE, 1.0)

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
        "x": xvar,
        "columns": list(columns),
        "y": yvar,
        "dig": dig,
        "bundle": bundle,
        "hire": hire,
        "ot": ot,
        "rows": rows,
        "dailies": [t.id for t in dailies],
    }
    return model, index


def extract_duals(lp, index) -> Duals:
    """Read the master duals positionally and check their signs."""
    if lp.duals is None:
        raise ValueError("LP solution carries no duals")
    rows = index["rows"]
    duals = Duals()
    duals.alpha = {tid: 0.0 for tid in index["dailies"]}
    for tid, r in rows["alpha"].items():
        duals.alpha[tid] = float(lp.duals[r])
    for tid, r in rows["beta"].items():
        duals.beta[tid] = float(lp.duals[r])
    for tid, r in rows["gamma"].items():
        duals.gamma[tid] = float(lp.duals[r])
    for key, r in rows["mu"].items():
        duals.mu[key] = float(lp.duals[r])
    for tid, r in rows["nu"].items():
        duals.nu[tid] = float(lp.duals[r])
    for name, vals in (
        ("alpha", duals.alpha.values()),
        ("beta", duals.beta.values()),
        ("gamma", duals.gamma.values()),
        ("mu", duals.mu.values()),
    ):
        bad = [v for v in vals if v > DUAL_SIGN_TOL]
        if bad:
            raise AssertionError(f"{name} dual positive: {max(bad)}")
    bad = [v for v in duals.nu.values() if v < -DUAL_SIGN_TOL]
    if bad:
        raise AssertionError(f"nu dual negative: {min(bad)}")
    return duals


def reduced_cost(column: Column, duals: Duals) -> float:
    """Column cost minus what the master currently pays for its parts."""
    t = column.technician_id
    total = float(column.cost)
    if column.uses_overtime:
        total -= duals.gamma.get(t, 0.0)
    for bi in column.bundles:
        total -= duals.mu.get((t, bi), 0.0)
    for tid in column.task_ids:
        total -= duals.nu.get(tid, 0.0)
    total -= duals.alpha.get(t, 0.0) + duals.beta.get(t, 0.0)
    return total


def price(
    tech,
    duals: Duals,
    instance: Instance,
    catalog: InvestmentCatalog,
    time_limit: float | None = None,
    neg_tol: float = -1e-6,
    travel_scale: int = TRAVEL_SCALE,
    info: dict | None = None,
) -> Column | None:
    """Most negative reduced-cost column for one technician, or None.

    Single-technician MIP: travel-estimate and overlap rows, capacity
    with the overtime option, and skill gates onto bundle purchases;
    the objective discounts each part by its master dual.  The constant
    part of the reduced cost (the technician duals) is added outside
    the solve.
    """
    tm = instance.travel
    cand = invest_candidates(instance, catalog, tech)
    constant = -(duals.alpha.get(tech.id, 0.0) + duals.beta.get(tech.id, 0.0))
    if info is not None:
        info["exact"] = True
    if not cand:
        return None

    model = LinearModel(f"price:{tech.id}")
    est = model.add_var("travel_est", lb=0.0, obj=1.0)
    u_ot = model.add_var("ot", binary=True, obj=-duals.gamma.get(tech.id, 0.0))
    addable = [(bi, b) for bi, b in enumerate(catalog.bundles) if b.skills - tech.skills]
    u_bundle = {
        bi: model.add_var(f"bundle[{bi}]", binary=True, obj=-duals.mu.get((tech.id, bi), 0.0))
        for bi, _ in addable
    }
    xvars = {
        task.id: model.add_var(
            f"assign[{task.id}]", binary=True, obj=-duals.nu.get(task.id, 0.0)
        )
        for task in cand
    }
    _pair_rows(model, instance, tech, cand, xvars, est, travel_scale)
    cap = {
        xvars[task.id]: float(
            task.duration + tm.time(tech.depot, task.location, tech.master_id)
        )
        for task in cand
    }
    cap[u_ot] = -float(catalog.overtime_minutes)
    model.add_row("capacity", cap, LE, float(tech.capacity))
    for task in cand:
        for s in sorted(task.skills - tech.skills):
            gate = {xvars[task.id]: 1.0}
            for bi, b in addable:
                if s in b.skills:
                    gate[u_bundle[bi]] = -1.0
            model.add_row(f"skillgate[{task.id},{s}]", gate, LE, 0.0)

    mip = solve_mip(model, time_limit=time_limit)
    if info is not None:
        info["exact"] = mip.status == "optimal"
    if mip.x is None:
        return None
    total = float(mip.objective) + constant
    if total >= neg_tol:
        return None

    chosen = tuple(sorted(tid for tid, v in xvars.items() if mip.x[v] > 0.5))
    active = sorted(bi for bi, v in u_bundle.items() if mip.x[v] > 0.5)
    # Zero-priced options can sit active for free; strip any the column
    # does not actually need (the objective value is unaffected).
    missing = set()
    load = 0.0
    for tid in chosen:
        task = instance.task_by_id[tid]
        missing |= task.skills - tech.skills
        load += task.duration + tm.time(tech.depot, task.location, tech.master_id)
    for bi in list(active):
        if duals.mu.get((tech.id, bi), 0.0) != 0.0:
            continue
        rest = [b for b in active if b != bi]
        covered = set()
        for b in rest:
            covered |= catalog.bundles[b].skills
        if missing <= covered:
            active = rest
    overtime = bool(mip.x[u_ot] > 0.5)
    if overtime and duals.gamma.get(tech.id, 0.0) == 0.0 and load <= tech.capacity:
        overtime = False
    cost = estimate_cost(chosen, tech, instance, travel_scale)
    est_val = float(mip.x[est])
    if abs(est_val - cost) > 1e-6:
        raise AssertionError(f"pricing travel estimate {est_val} != recomputed {cost}")
    return Column(
        technician_id=tech.id,
        task_ids=chosen,
        uses_overtime=overtime,
        bundles=tuple(active),
        cost=cost,
        pricing_objective=total,
    )


def select_technicians(duals: Duals, global_cap: int | None = None) -> list[str]:
    """Technician ids in pricing order: most promising duals first.

    Key is the constant part of the reduced cost (alpha, plus beta for
    new technicians), descending; ties break on the id.
    """
    ids = sorted(duals.alpha)
    ids.sort(key=lambda t: (-(duals.alpha.get(t, 0.0) + duals.beta.get(t, 0.0)), t))
    if global_cap is not None:
        ids = ids[:global_cap]
    return ids


def warmstart_columns(
    solution: Solution, instance: Instance, catalog: InvestmentCatalog | None = None
) -> list[Column]:
    """Columns from an existing solution's routes, costs re-estimated
    with the assignment travel formula so master costs stay
    internally comparable.

    The assignment capacity surrogate charges a depot leg per task, so
    a perfectly good route can overshoot it; such a route is admitted
    with the overtime flag when that closes the gap and dropped
    otherwise, keeping every master column expressible in the flat
    assignment model.
    """
    tm = instance.travel
    out = []
    for route in solution.routes:
        if not route.visits:
            continue
        tech = instance.daily_by_id[route.technician_id]
        ids = tuple(sorted(route.task_ids))
        load = sum(
            instance.task_by_id[tid].duration
            + tm.time(tech.depot, instance.task_by_id[tid].location, tech.master_id)
            for tid in ids
        )
        overtime = False
        if load > tech.capacity:
            if catalog is not None and load <= tech.capacity + catalog.overtime_minutes:
                overtime = True
            else:
                log.debug("route for %s exceeds the capacity surrogate; skipped", tech.id)
                continue
        out.append(
            Column(
                technician_id=tech.id,
                task_ids=ids,
                uses_overtime=overtime,
                cost=estimate_cost(ids, tech, instance),
            )
        )
    return out


def run_colgen(
    instance: Instance,
    catalog: InvestmentCatalog,
    config: ColgenConfig | None = None,
    warmstart_solution: Solution | None = None,
) -> ColgenResult:
    """Full column-generation loop plus integer finalization.

    Each iteration solves the master LP, extracts duals, prices
    technicians in dual order, and adds every negative column found.
    The loop stops on the iteration cap or as soon as an iteration adds
    nothing; if that empty iteration priced every technician exactly,
    the LP value is provably optimal over all columns (cg_optimal).
    """
    config = config or ColgenConfig()
    dailies, _ = _invest_universe(instance, catalog)
    tech_by_id = {t.id: t for t in dailies}

    columns = initial_columns(instance)
    seen = {c.key() for c in columns}
    if config.warmstart and warmstart_solution is not None:
        for col in warmstart_columns(warmstart_solution, instance, catalog):
            if col.key() not in seen:
                seen.add(col.key())
                columns.append(col)

    trace: list[tuple[int, float, int, float]] = []
    audits: list[tuple[Column, Duals]] = []
    cg_optimal = False
    for it in range(1, config.max_iters + 1):
        started = time.monotonic()
        model, index = build_master(columns, instance, catalog, relax_columns=True)
        lp = solve_lp(model, time_limit=config.master_lp_time)
        if not lp.optimal:
            log.warning("master LP iteration %d ended %s; stopping generation", it, lp.status)
            break
        duals = extract_duals(lp, index)
        new = 0
        all_exact = True
        for tid in select_technicians(duals, config.global_cap):
            info: dict = {}
            col = price(
                tech_by_id[tid],
                duals,
                instance,
                catalog,
                time_limit=config.subproblem_time,
                neg_tol=config.neg_tol,
                info=info,
            )
            if not info.get("exact", False):
                all_exact = False
            if col is not None and col.key() not in seen:
                seen.add(col.key())
                columns.append(col)
                audits.append((col, duals))
                new += 1
        trace.append((it, float(lp.objective), new, time.monotonic() - started))
        if new == 0:
            cg_optimal = all_exact
            break

    model, index = build_master(columns, instance, catalog)
    mip = solve_mip(model, time_limit=config.final_ip_time, integral_objective=True)
    return ColgenResult(
        mip=mip,
        trace=trace,
        columns=columns,
        cg_optimal=cg_optimal,
        master_model=model,
        master_index=index,
        audits=audits,
    )

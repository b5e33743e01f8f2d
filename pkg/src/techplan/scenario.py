"""Investment pipeline and business-case accounting.

Glue between the planning layers: pull the purchased investments out of
the generated-column master, rebuild the instance with them applied,
re-solve the routing with and without the investments, and price the
difference against the capital outlay.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

from .alns import AlnsConfig, run_alns, setcover_finalize
from .catalog import InvestmentCatalog
from .colgen import ColgenConfig, ColgenResult, run_colgen
from .core import Instance, Solution, TimeWindow, route_travel
from .reports import ReportRow

log = logging.getLogger(__name__)

FRACTIONAL_TOL = 1e-6


@dataclass
class InvestmentDecision:
    """Purchased investments, by identifier."""

    overtime_daily_techs: set[str] = field(default_factory=set)
    new_masters: set[str] = field(default_factory=set)
    skill_upgrades: set[tuple[str, int]] = field(default_factory=set)  # (master, bundle pos)
    digitized_tasks: set[str] = field(default_factory=set)

    @property
    def is_empty(self) -> bool:
        return not (
            self.overtime_daily_techs
            or self.new_masters
            or self.skill_upgrades
            or self.digitized_tasks
        )


class PipelineError(RuntimeError):
    """A pipeline stage failed; `stage` names which one."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage}: {cause}")
        self.stage = stage


def extract_investments(result: ColgenResult, tol: float = FRACTIONAL_TOL) -> InvestmentDecision:
    """Collect the investment variables set in the final master solve.

    The integer master must deliver integral investment values; anything
    fractional beyond the tolerance is a solver bug worth failing on.
    """
    x = result.mip.x
    if x is None:
        raise ValueError(f"master produced no integer solution (status {result.mip.status})")
    idx = result.master_index
    decision = InvestmentDecision()
    families = [
        ("overtime", idx["ot"], decision.overtime_daily_techs),
        ("hire", idx["hire"], decision.new_masters),
        ("skill", idx["bundle"], decision.skill_upgrades),
        ("digitization", idx["dig"], decision.digitized_tasks),
    ]
    for label, vars_by_key, sink in families:
        for key, v in vars_by_key.items():
            value = float(x[v])
            if abs(value - round(value)) > tol:
                raise ValueError(f"fractional {label} decision {key}: {value}")
            if value > 0.5:
                sink.add(key)
    return decision


def apply_investments(
    instance: Instance, decision: InvestmentDecision, catalog: InvestmentCatalog
) -> Instance:
    """Rebuild the instance with the purchased investments in force.

    Hired candidates become regular masters; upgraded bundles fold
    into master skills (daily technicians inherit them); purchased
    overtime extends the matching shift once, tracked on the instance
    so reapplying the same decision changes nothing; digitized tasks
    leave the task set entirely.
    """
    for tid in sorted(decision.digitized_tasks):
        if tid not in catalog.digitization:
            raise ValueError(f"task {tid} is not digitizable")

    cand_by_id = {m.id: m for m in catalog.hire_candidates}
    present = {m.id for m in instance.masters}
    masters = list(instance.masters)
    for mid in sorted(decision.new_masters):
        if mid in present:
            continue  # already materialized by an earlier application
        if mid not in cand_by_id:
            raise ValueError(f"unknown hire candidate {mid}")
        masters.append(replace(cand_by_id[mid], hire_candidate=False))

    hired_ids = {m.id for m in masters}
    upgrades: dict[str, set[str]] = {}
    for mid, bi in sorted(decision.skill_upgrades):
        if not 0 <= bi < len(catalog.bundles):
            raise ValueError(f"unknown skill bundle {bi}")
        if mid not in hired_ids:
            if mid in cand_by_id:
                # Paid for but pointless without the hire; the capex
                # still charges it, matching the master's accounting.
                log.warning("skill upgrade for unhired candidate %s dropped", mid)
                continue
            raise ValueError(f"skill upgrade for unknown master {mid}")
        upgrades.setdefault(mid, set()).update(catalog.bundles[bi].skills)

    owner = {f"{m.id}#{s.day}": (m.id, s.day) for m in masters for s in m.shifts}
    candidate_dailies = {
        f"{m.id}#{s.day}" for m in catalog.hire_candidates for s in m.shifts
    }
    granted = set(instance.overtime_granted)
    extend: dict[str, set[int]] = {}
    for did in sorted(decision.overtime_daily_techs):
        if did in granted:
            continue
        if did not in owner:
            if did in candidate_dailies:
                log.warning("overtime for unhired candidate shift %s dropped", did)
                continue
            raise ValueError(f"overtime for unknown technician {did}")
        mid, day = owner[did]
        extend.setdefault(mid, set()).add(day)
        granted.add(did)

    rebuilt = []
    for m in masters:
        skills = m.skills | frozenset(upgrades.get(m.id, ()))
        shifts = m.shifts
        if m.id in extend:
            shifts = tuple(
                replace(
                    s,
                    window=TimeWindow(
                        s.window.start, s.window.end + catalog.overtime_minutes
                    ),
                )
                if s.day in extend[m.id]
                else s
                for s in m.shifts
            )
        if skills != m.skills or shifts != m.shifts:
            m = replace(m, skills=skills, shifts=shifts)
        rebuilt.append(m)

    tasks = tuple(t for t in instance.tasks if t.id not in decision.digitized_tasks)
    return Instance(
        name=instance.name,
        horizon_days=instance.horizon_days,
        tasks=tasks,
        masters=tuple(rebuilt),
        travel=instance.travel,
        skills=instance.skills,
        travel_cap=instance.travel_cap,
        overtime_granted=frozenset(granted),
    )


def capex_breakdown(
    decision: InvestmentDecision, catalog: InvestmentCatalog
) -> tuple[int, int, int, int]:
    """(overtime, digitization, skill, new-technician) spend in minutes.

    Uses the catalog's own coefficients, so the total always equals the
    investment term the master objective charged for the same choices.
    """
    cand_by_id = {m.id: m for m in catalog.hire_candidates}
    ot = len(decision.overtime_daily_techs) * catalog.overtime_cost
    dig = 0
    for tid in sorted(decision.digitized_tasks):
        if tid not in catalog.digitization:
            raise ValueError(f"task {tid} is not digitizable")
        dig += catalog.digitization[tid]
    skill = 0
    for _, bi in sorted(decision.skill_upgrades):
        if not 0 <= bi < len(catalog.bundles):
            raise ValueError(f"unknown skill bundle {bi}")
        skill += catalog.bundles[bi].cost
    nt = 0
    for mid in sorted(decision.new_masters):
        if mid not in cand_by_id:
            raise ValueError(f"unknown hire candidate {mid}")
        nt += catalog.hire_cost(cand_by_id[mid])
    return ot, dig, skill, nt


def capex(
    decision: InvestmentDecision,
    catalog: InvestmentCatalog,
    horizon_days: int | None = None,
) -> int:
    """Total investment spend in travel minutes.

    The horizon argument is accepted for call-shape stability; the
    catalog's bundle and hiring prices already encode the horizon they
    were built for.
    """
    return sum(capex_breakdown(decision, catalog))


def business_case(obj_noinv: int, obj_inv: int, capex_total: int) -> int:
    """Savings net of investment: positive means the spend pays off.

    Exact integer arithmetic; a loss stays negative, never clamped.
    """
    return int(obj_noinv) - int(obj_inv) - int(capex_total)


@dataclass
class PipelineConfig:
    seed: int = 0
    alns: AlnsConfig = field(default_factory=AlnsConfig)
    colgen: ColgenConfig = field(default_factory=ColgenConfig)
    # "budget" reports the configured allotments (bytes reproducible);
    # "measured" reports wall clock.
    timing: str = "budget"
    warmstart_colgen: bool = True
    finalize: bool = True  # set-cover recombination after each search

    def __post_init__(self):
        if self.timing not in ("budget", "measured"):
            raise ValueError(f"unknown timing mode {self.timing!r}")


@dataclass
class Report:
    """One pipeline run: the report row plus everything behind it."""

    row: ReportRow
    decision: InvestmentDecision
    seeds: dict[str, int]
    colgen: ColgenResult
    solution_noinv: Solution
    solution_inv: Solution
    modified_instance: Instance


def _search(instance: Instance, config: PipelineConfig, seed: int) -> Solution:
    solution, _, pool = run_alns(instance, config.alns, seed=seed)
    if config.finalize:
        solution = setcover_finalize(
            instance, pool, solution, time_limit=config.alns.setcover_seconds
        )
    return solution


def run_pipeline(
    instance: Instance, catalog: InvestmentCatalog, config: PipelineConfig | None = None
) -> Report:
    """The full investment study on one instance.

    Stages: route the base instance, plan investments over the
    generated columns (warm-started from the base routes), apply them,
    route the modified instance, then account capital against savings.
    Each solver stage gets its own recorded seed; the exact stages take
    no randomness but their seeds are recorded all the same.
    """
    config = config or PipelineConfig()
    base = config.seed
    seeds = {
        "alns_noinv": 10 * base + 1,
        "colgen": 10 * base + 2,
        "alns_inv": 10 * base + 3,
        "setcover": 10 * base + 4,
    }

    started = time.monotonic()
    try:
        noinv = _search(instance, config, seeds["alns_noinv"])
    except Exception as exc:
        raise PipelineError("alns_noinv", exc) from exc
    alns_seconds = time.monotonic() - started

    started = time.monotonic()
    try:
        cg = run_colgen(
            instance,
            catalog,
            config.colgen,
            warmstart_solution=noinv if config.warmstart_colgen else None,
        )
    except Exception as exc:
        raise PipelineError("colgen", exc) from exc
    assm_seconds = time.monotonic() - started

    try:
        decision = extract_investments(cg)
        modified = apply_investments(instance, decision, catalog)
    except Exception as exc:
        raise PipelineError("apply", exc) from exc

    started = time.monotonic()
    try:
        inv = _search(modified, config, seeds["alns_inv"])
    except Exception as exc:
        raise PipelineError("alns_inv", exc) from exc
    alns_seconds += time.monotonic() - started
    inv.digitized = set(decision.digitized_tasks)

    cap_ot, cap_dig, cap_skill, cap_nt = capex_breakdown(decision, catalog)
    cap_total = cap_ot + cap_dig + cap_skill + cap_nt
    bc = business_case(noinv.objective, inv.objective, cap_total)

    if config.timing == "budget":
        per_stage = config.alns.retries * config.alns.seconds_per_retry
        if config.finalize:
            per_stage += config.alns.setcover_seconds
        alns_seconds = 2 * per_stage
        assm_seconds = (
            len(cg.trace) * config.colgen.master_lp_time + config.colgen.final_ip_time
        )

    row = ReportRow(
        instance_id=instance.name,
        obj_noinv=noinv.objective,
        obj_inv=inv.objective,
        capex_total=cap_total,
        capex_ot=cap_ot,
        capex_dig=cap_dig,
        capex_skill=cap_skill,
        capex_nt=cap_nt,
        business_case=bc,
        unserved_noinv=len(noinv.unserved),
        unserved_inv=len(inv.unserved),
        travel_noinv=sum(route_travel(r, instance) for r in noinv.routes),
        travel_inv=sum(route_travel(r, modified) for r in inv.routes),
        cg_iters=len(cg.trace),
        cg_optimal=cg.cg_optimal,
        seconds_assm=assm_seconds,
        seconds_alns=alns_seconds,
    )
    return Report(
        row=row,
        decision=decision,
        seeds=seeds,
        colgen=cg,
        solution_noinv=noinv,
        solution_inv=inv,
        modified_instance=modified,
    )

"""Investment catalogs: what can be bought and at what price.

Costs are expressed in travel-time minutes (1 EUR buys 5 minutes of
travel reduction, so 90 EUR of overtime is 450 minutes and so on).
Two pricing profiles exist: "mathlouthi" for the benchmark-style
instances and "tdc" for the industrial profile.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from .core import Instance, MasterTechnician

OVERTIME_MINUTES = 120
OVERTIME_COST = 450
DIG_COST_MATHLOUTHI = 2500
DIG_COST_TDC = 500
HIRE_COST_PER_DAY = 1200
SKILL_COST_PER_DAY = 35
BUNDLES_MATHLOUTHI = 5
BUNDLES_TDC = 10


@dataclass(frozen=True)
class SkillBundle:
    skills: frozenset[str]
    cost: int  # per-master upgrade price


@dataclass
class InvestmentBudgets:
    """Optional caps on how many investments of each type may be taken."""

    overtime: int | None = None
    digitization: int | None = None
    skill: int | None = None
    hire: int | None = None


@dataclass
class InvestmentCatalog:
    overtime_minutes: int = OVERTIME_MINUTES
    overtime_cost: int = OVERTIME_COST
    digitization: dict[str, int] = field(default_factory=dict)  # task id -> cost
    bundles: tuple[SkillBundle, ...] = ()
    hire_candidates: tuple[MasterTechnician, ...] = ()
    hire_cost_per_day: int = HIRE_COST_PER_DAY
    charge_per_master_once: bool = False
    budgets: InvestmentBudgets = field(default_factory=InvestmentBudgets)

    def hire_cost(self, master: MasterTechnician) -> int:
        """Price of hiring a candidate, flat or per working day."""
        if self.charge_per_master_once:
            return self.hire_cost_per_day
        return self.hire_cost_per_day * len(master.shifts)


def kmeans_skill_bundles(instance: Instance, k: int, seed: int = 0) -> list[frozenset[str]]:
    """Partition the skill universe into k bundles by k-means.

    Each skill is embedded as its incidence vector over the daily
    technicians (who has it).  Squared Euclidean distance between two
    such vectors moves with the count of technicians lacking one of the
    two skills, so skills held by the same people cluster together.
    k-means++ seeding, at most 100 Lloyd iterations, deterministic for
    a fixed seed.  Empty clusters are repaired by stealing the point
    farthest from its center; irreparably empty clusters are dropped,
    so duplicates of identical skills always share a bundle.
    """
    skills = list(instance.skills)
    if k <= 0:
        raise ValueError("k must be positive")
    if not skills:
        return []
    k = min(k, len(skills))
    dailies = instance.dailies
    vectors = np.zeros((len(skills), max(len(dailies), 1)))
    for si, s in enumerate(skills):
        for di, d in enumerate(dailies):
            if s in d.skills:
                vectors[si, di] = 1.0

    rng = random.Random(seed)

    def sq_dist(a, b):
        diff = a - b
        return float(diff @ diff)

    # k-means++ seeding.
    centers = [vectors[rng.randrange(len(skills))].copy()]
    while len(centers) < k:
        d2 = np.array([min(sq_dist(v, c) for c in centers) for v in vectors])
        total = float(d2.sum())
        if total <= 0:
            remaining = [i for i in range(len(skills)) if not any(sq_dist(vectors[i], c) == 0 for c in centers)]
            pick = remaining[0] if remaining else rng.randrange(len(skills))
            centers.append(vectors[pick].copy())
            continue
        r = rng.random() * total
        acc = 0.0
        pick = len(skills) - 1
        for i, w in enumerate(d2):
            acc += float(w)
            if acc >= r:
                pick = i
                break
        centers.append(vectors[pick].copy())

    centers = np.array(centers)
    assign = np.zeros(len(skills), dtype=int)
    for it in range(100):
        dists = ((vectors[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = dists.argmin(axis=1)
        # Repair empty clusters with the point farthest from its center.
        for c in range(k):
            if not (new_assign == c).any():
                own = dists[np.arange(len(skills)), new_assign]
                far = int(own.argmax())
                if own[far] > 0:
                    new_assign[far] = c
        if it > 0 and (new_assign == assign).all():
            break
        assign = new_assign
        for c in range(k):
            members = vectors[assign == c]
            if len(members):
                centers[c] = members.mean(axis=0)

    bundles = []
    for c in range(k):
        members = frozenset(skills[i] for i in np.flatnonzero(assign == c))
        if members:
            bundles.append(members)
    bundles.sort(key=lambda b: sorted(b))
    return bundles


def build_catalog(
    instance: Instance,
    profile: str = "mathlouthi",
    n_bundles: int | None = None,
    digitizable_skills: set[str] | None = None,
    bundle_seed: int = 0,
    budgets: InvestmentBudgets | None = None,
) -> InvestmentCatalog:
    """Assemble the investment catalog for an instance.

    mathlouthi profile: every fifth task (by sorted id) can be
    digitized at 2500; tdc profile: tasks whose skills meet the
    digitizable set can be digitized at 500, falling back to the
    per-task digitizable flags when no skill set is given.  Both
    profiles price overtime at 450 for 120 minutes, hiring at 1200 per
    working day, and skill bundles at 35 per horizon day.  Hire
    candidates duplicate the existing masters.
    """
    if profile not in ("mathlouthi", "tdc"):
        raise ValueError(f"unknown profile {profile!r}")
    digitization = {}
    if profile == "mathlouthi":
        n_bundles = BUNDLES_MATHLOUTHI if n_bundles is None else n_bundles
        for idx, tid in enumerate(sorted(t.id for t in instance.tasks)):
            if idx % 5 == 0:
                digitization[tid] = DIG_COST_MATHLOUTHI
    else:
        n_bundles = BUNDLES_TDC if n_bundles is None else n_bundles
        for t in instance.tasks:
            if digitizable_skills is not None:
                if t.skills & digitizable_skills:
                    digitization[t.id] = DIG_COST_TDC
            elif t.digitizable:
                digitization[t.id] = DIG_COST_TDC

    bundle_cost = SKILL_COST_PER_DAY * instance.horizon_days
    bundles = tuple(
        SkillBundle(skills=b, cost=bundle_cost)
        for b in kmeans_skill_bundles(instance, n_bundles, seed=bundle_seed)
    )
    hire_candidates = tuple(
        MasterTechnician(
            id=f"{m.id}+new",
            depot=m.depot,
            skills=m.skills,
            shifts=m.shifts,
            xy=m.xy,
            hire_candidate=True,
        )
        for m in instance.masters
    )
    return InvestmentCatalog(
        digitization=digitization,
        bundles=bundles,
        hire_candidates=hire_candidates,
        budgets=budgets or InvestmentBudgets(),
    )

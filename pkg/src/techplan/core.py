"""Domain model for technician routing and scheduling.

All times are integer minutes counted from the start of the planning
horizon (day 0, minute 0).  Travel times are integer minutes.  Functions
in this module are pure: they never mutate their inputs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

log = logging.getLogger(__name__)

MINUTES_PER_DAY = 1440

# Tasks farther than this from the technician depot are never candidates
# for that technician.
DEFAULT_TRAVEL_CAP = 100


@dataclass(frozen=True)
class TimeWindow:
    """Half-open-free interval [start, end] in absolute minutes."""

    start: int
    end: int

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"empty time window [{self.start}, {self.end}]")

    @property
    def length(self) -> int:
        return self.end - self.start

    def contains(self, t: int) -> bool:
        return self.start <= t <= self.end


@dataclass(frozen=True)
class Task:
    id: str
    location: int
    duration: int
    penalty: int
    window: TimeWindow
    skills: frozenset[str] = frozenset()
    digitizable: bool = False
    xy: tuple[float, float] | None = None

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError(f"task {self.id}: duration must be positive")
        if self.penalty < 0:
            raise ValueError(f"task {self.id}: negative penalty")
        if self.window.length < self.duration:
            raise ValueError(f"task {self.id}: window shorter than duration")


@dataclass(frozen=True)
class Shift:
    """One working day of a master technician, window in absolute minutes."""

    day: int
    window: TimeWindow


@dataclass(frozen=True)
class MasterTechnician:
    id: str
    depot: int
    skills: frozenset[str] = frozenset()
    shifts: tuple[Shift, ...] = ()
    xy: tuple[float, float] | None = None
    hire_candidate: bool = False


@dataclass(frozen=True)
class DailyTechnician:
    """One master on one working day.  The unit all solvers schedule."""

    id: str
    master_id: str
    day: int
    depot: int
    window: TimeWindow
    skills: frozenset[str] = frozenset()
    hire_candidate: bool = False

    @property
    def capacity(self) -> int:
        """Workable minutes, by construction the window length."""
        return self.window.length


class TravelMatrix:
    """Integer travel times between locations.

    A single shared matrix, with optional per-master overrides for
    technician-specific travel times.
    """

    def __init__(self, minutes: np.ndarray, overrides: dict[str, np.ndarray] | None = None):
        minutes = np.asarray(minutes, dtype=np.int64)
        if minutes.ndim != 2 or minutes.shape[0] != minutes.shape[1]:
            raise ValueError("travel matrix must be square")
        if (minutes < 0).any():
            raise ValueError("negative travel time")
        self.minutes = minutes
        self.overrides = {k: np.asarray(v, dtype=np.int64) for k, v in (overrides or {}).items()}
        for key, mat in self.overrides.items():
            if mat.shape != minutes.shape:
                raise ValueError(f"override for {key} has wrong shape")

    @property
    def n_locations(self) -> int:
        return self.minutes.shape[0]

    def time(self, i: int, j: int, master_id: str | None = None) -> int:
        if master_id is not None and master_id in self.overrides:
            return int(self.overrides[master_id][i, j])
        return int(self.minutes[i, j])

    def check_triangle(self, sample: int = 20000, seed: int = 0) -> int:
        """Count triangle-inequality violations, warning if any are found.

        Exhaustive for small matrices, sampled for large ones.
        """
        n = self.n_locations
        bad = 0
        m = self.minutes
        if n <= 150:
            for k in range(n):
                # d(i,j) <= d(i,k) + d(k,j) for all i, j
                viol = m > m[:, k][:, None] + m[k, :][None, :]
                bad += int(viol.sum())
        else:
            rng = np.random.RandomState(seed)
            idx = rng.randint(0, n, size=(sample, 3))
            i, k, j = idx[:, 0], idx[:, 1], idx[:, 2]
            bad = int((m[i, j] > m[i, k] + m[k, j]).sum())
        if bad:
            log.warning("travel matrix violates the triangle inequality (%d triple(s))", bad)
        return bad

    def __eq__(self, other) -> bool:
        if not isinstance(other, TravelMatrix):
            return NotImplemented
        if not np.array_equal(self.minutes, other.minutes):
            return False
        if set(self.overrides) != set(other.overrides):
            return False
        return all(np.array_equal(v, other.overrides[k]) for k, v in self.overrides.items())


@dataclass(eq=False)
class Instance:
    name: str
    horizon_days: int
    tasks: tuple[Task, ...]
    masters: tuple[MasterTechnician, ...]
    travel: TravelMatrix
    skills: tuple[str, ...] = ()
    travel_cap: int = DEFAULT_TRAVEL_CAP
    # Daily-technician ids whose shift already includes purchased
    # overtime; lets investment application skip an already-extended
    # shift instead of growing it again.
    overtime_granted: frozenset[str] = frozenset()

    def __post_init__(self):
        problems = []
        seen = set()
        for t in self.tasks:
            if t.id in seen:
                problems.append(f"duplicate task id {t.id}")
            seen.add(t.id)
        seen = set()
        for m in self.masters:
            if m.id in seen:
                problems.append(f"duplicate master id {m.id}")
            seen.add(m.id)
        n = self.travel.n_locations
        for t in self.tasks:
            if not 0 <= t.location < n:
                problems.append(f"task {t.id}: location {t.location} outside travel matrix")
        universe = set(self.skills)
        for t in self.tasks:
            if not t.skills <= universe:
                problems.append(f"task {t.id}: unknown skill(s) {sorted(t.skills - universe)}")
        for m in self.masters:
            if not 0 <= m.depot < n:
                problems.append(f"master {m.id}: depot {m.depot} outside travel matrix")
            if not m.skills <= universe:
                problems.append(f"master {m.id}: unknown skill(s) {sorted(m.skills - universe)}")
            for s in m.shifts:
                if not 0 <= s.day < self.horizon_days:
                    problems.append(f"master {m.id}: shift day {s.day} outside horizon")
        daily_ids = {f"{m.id}#{s.day}" for m in self.masters for s in m.shifts}
        for tid in self.overtime_granted:
            if tid not in daily_ids:
                problems.append(f"overtime granted to unknown technician {tid}")
        if problems:
            raise ValueError("invalid instance: " + "; ".join(problems))

    @cached_property
    def dailies(self) -> tuple[DailyTechnician, ...]:
        return tuple(expand_daily(self.masters, self.horizon_days))

    @cached_property
    def task_by_id(self) -> dict[str, Task]:
        return {t.id: t for t in self.tasks}

    @cached_property
    def daily_by_id(self) -> dict[str, DailyTechnician]:
        return {d.id: d for d in self.dailies}

    def __eq__(self, other) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.name == other.name
            and self.horizon_days == other.horizon_days
            and self.travel_cap == other.travel_cap
            and self.skills == other.skills
            and self.tasks == other.tasks
            and self.masters == other.masters
            and self.overtime_granted == other.overtime_granted
            and self.travel == other.travel
        )


@dataclass
class Route:
    technician_id: str
    visits: list[tuple[str, int]] = field(default_factory=list)  # (task id, start minute)

    @property
    def task_ids(self) -> list[str]:
        return [task_id for task_id, _ in self.visits]


@dataclass
class Solution:
    routes: list[Route] = field(default_factory=list)
    unserved: set[str] = field(default_factory=set)
    digitized: set[str] = field(default_factory=set)
    objective: int = 0


def expand_daily(masters, horizon_days: int) -> list[DailyTechnician]:
    """One DailyTechnician per (master, working day), ids "<master>#<day>"."""
    out = []
    for m in masters:
        for shift in sorted(m.shifts, key=lambda s: s.day):
            if not 0 <= shift.day < horizon_days:
                raise ValueError(f"master {m.id}: shift day {shift.day} outside horizon")
            out.append(
                DailyTechnician(
                    id=f"{m.id}#{shift.day}",
                    master_id=m.id,
                    day=shift.day,
                    depot=m.depot,
                    window=shift.window,
                    skills=m.skills,
                    hire_candidate=m.hire_candidate,
                )
            )
    return out


def feasible_starts(task: Task, tech: DailyTechnician, overtime: int = 0) -> TimeWindow | None:
    """Feasible service-start interval of a task for a technician.

    Intersects the task window with the technician window (extended by
    `overtime` minutes at the end) and leaves room for the service
    duration.  Return travel to the depot is not part of this check.
    Returns None when no feasible start exists.
    """
    lo = max(task.window.start, tech.window.start)
    hi = min(task.window.end, tech.window.end + overtime) - task.duration
    if lo > hi:
        return None
    return TimeWindow(lo, hi)


def tasks_overlap(a: Task, b: Task) -> bool:
    """True when no technician could serve both tasks, ignoring travel.

    Serving a then b needs a.start + a.duration + b.duration <= b.end at
    best; symmetrically for b then a.  Overlap means both orders fail.
    """
    a_then_b = a.window.start + a.duration + b.duration <= b.window.end
    b_then_a = b.window.start + b.duration + a.duration <= a.window.end
    return not a_then_b and not b_then_a


def eligible_tasks(
    tech: DailyTechnician,
    instance: Instance,
    *,
    ignore_skills: bool = False,
    overtime: int = 0,
) -> set[str]:
    """Task ids a technician may serve.

    A task qualifies when the technician has its skills (unless skill
    checks are suspended for investment models), a feasible start exists
    (optionally with the overtime extension), and the depot-to-task
    travel is within the instance travel cap.
    """
    out = set()
    cap = instance.travel_cap
    for task in instance.tasks:
        if not ignore_skills and not task.skills <= tech.skills:
            continue
        if feasible_starts(task, tech, overtime) is None:
            continue
        if instance.travel.time(tech.depot, task.location, tech.master_id) > cap:
            continue
        out.add(task.id)
    return out


def route_travel(route: Route, instance: Instance) -> int:
    """Total travel of a route: depot leg, inter-task legs, return leg."""
    if not route.visits:
        return 0
    tech = instance.daily_by_id[route.technician_id]
    tm = instance.travel
    locs = [instance.task_by_id[task_id].location for task_id in route.task_ids]
    total = tm.time(tech.depot, locs[0], tech.master_id)
    for a, b in zip(locs, locs[1:]):
        total += tm.time(a, b, tech.master_id)
    total += tm.time(locs[-1], tech.depot, tech.master_id)
    return total


def validate_route(route: Route, instance: Instance) -> list[str]:
    """All constraint violations of a route, empty when the route is valid.

    Checks skills, task windows, the technician window including return
    travel, and chaining with travel (waiting is allowed).
    """
    violations = []
    tech = instance.daily_by_id.get(route.technician_id)
    if tech is None:
        return [f"unknown technician {route.technician_id}"]
    tm = instance.travel
    seen = set()
    prev_task = None
    prev_start = None
    for task_id, start in route.visits:
        task = instance.task_by_id.get(task_id)
        if task is None:
            violations.append(f"unknown task: {task_id}")
            continue
        if task_id in seen:
            violations.append(f"duplicate visit: task {task_id}")
            continue
        seen.add(task_id)
        if not task.skills <= tech.skills:
            missing = ",".join(sorted(task.skills - tech.skills))
            violations.append(f"skill: task {task_id} needs {missing}")
        if not (task.window.start <= start <= task.window.end - task.duration):
            violations.append(f"task window: task {task_id} starts at {start}")
        if start < tech.window.start:
            violations.append(f"technician window: task {task_id} starts at {start}")
        if start + task.duration + tm.time(task.location, tech.depot, tech.master_id) > tech.window.end:
            violations.append(f"technician window: task {task_id} cannot return to depot")
        if prev_task is None:
            earliest = tech.window.start + tm.time(tech.depot, task.location, tech.master_id)
            if start < earliest:
                violations.append(f"chaining: task {task_id} starts before depot departure allows")
        else:
            earliest = prev_start + prev_task.duration + tm.time(
                prev_task.location, task.location, tech.master_id
            )
            if start < earliest:
                violations.append(f"chaining: task {task_id} starts before travel from {prev_task.id}")
        prev_task, prev_start = task, start
    return violations


def earliest_schedule(
    task_ids: list[str], tech: DailyTechnician, instance: Instance
) -> list[int] | None:
    """Earliest feasible start times for a fixed visit order, or None.

    Greedy forward pass: each task starts as early as its window, the
    technician window and travel from the predecessor allow.  Earliest
    starts dominate for feasibility, so None means the order is
    infeasible for this technician.
    """
    tm = instance.travel
    starts = []
    prev_loc = tech.depot
    t = tech.window.start
    for task_id in task_ids:
        task = instance.task_by_id[task_id]
        if not task.skills <= tech.skills:
            return None
        t = max(t + tm.time(prev_loc, task.location, tech.master_id), task.window.start)
        if t > task.window.end - task.duration:
            return None
        starts.append(t)
        t += task.duration
        prev_loc = task.location
    if task_ids:
        if t + tm.time(prev_loc, tech.depot, tech.master_id) > tech.window.end:
            return None
    return starts


def solution_objective(solution: Solution, instance: Instance) -> int:
    """Travel of all routes plus penalties of unserved tasks.

    Raises ValueError unless routes, unserved and digitized cover every
    task exactly once.
    """
    covered: dict[str, str] = {}
    for route in solution.routes:
        for task_id in route.task_ids:
            if task_id in covered:
                raise ValueError(f"task {task_id} covered twice ({covered[task_id]} and route)")
            covered[task_id] = f"route {route.technician_id}"
    for task_id in solution.unserved:
        if task_id in covered:
            raise ValueError(f"task {task_id} covered twice ({covered[task_id]} and unserved)")
        covered[task_id] = "unserved"
    for task_id in solution.digitized:
        if task_id in covered:
            raise ValueError(f"task {task_id} covered twice ({covered[task_id]} and digitized)")
        covered[task_id] = "digitized"
    missing = [t.id for t in instance.tasks if t.id not in covered]
    if missing:
        raise ValueError(f"tasks not covered: {', '.join(sorted(missing))}")
    unknown = set(covered) - set(instance.task_by_id)
    if unknown:
        raise ValueError(f"unknown tasks in solution: {', '.join(sorted(unknown))}")
    total = 0
    for route in solution.routes:
        total += route_travel(route, instance)
    for task_id in solution.unserved:
        total += instance.task_by_id[task_id].penalty
    return total

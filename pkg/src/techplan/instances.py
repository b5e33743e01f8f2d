"""Instance files and synthetic instance generation.

The canonical on-disk form is a JSON document with sections meta,
skills, tasks, masters and travel.  Writing is deterministic (sorted
keys, fixed layout), so a file written here parses back to an equal
Instance and re-writes to identical bytes.
"""

from __future__ import annotations

import json
import math
import random

import numpy as np

from .core import (
    Instance,
    MasterTechnician,
    Shift,
    Task,
    TimeWindow,
    TravelMatrix,
)

DAY_START = 540  # 9:00
DAY_END = 1020  # 17:00


class SchemaError(ValueError):
    """An instance document violates the canonical schema."""


def _need(obj, key, kind, path):
    if key not in obj:
        raise SchemaError(f"{path}.{key}: missing")
    val = obj[key]
    if kind is int and isinstance(val, bool):
        raise SchemaError(f"{path}.{key}: expected int, got bool")
    if not isinstance(val, kind):
        raise SchemaError(f"{path}.{key}: expected {kind.__name__}, got {type(val).__name__}")
    return val


def _window(raw, path) -> TimeWindow:
    if not isinstance(raw, list) or len(raw) != 2 or not all(isinstance(v, int) for v in raw):
        raise SchemaError(f"{path}: expected [start, end] minutes")
    if raw[0] > raw[1]:
        raise SchemaError(f"{path}: start {raw[0]} after end {raw[1]}")
    return TimeWindow(raw[0], raw[1])


def _xy(raw, path):
    if raw is None:
        return None
    if not isinstance(raw, list) or len(raw) != 2:
        raise SchemaError(f"{path}: expected [x, y]")
    return (float(raw[0]), float(raw[1]))


def parse_canonical(path: str) -> Instance:
    """Read a canonical instance document, validating as it goes.

    Schema violations raise SchemaError naming the offending field.
    """
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise SchemaError("top level: expected an object")
    meta = _need(doc, "meta", dict, "$")
    name = _need(meta, "name", str, "meta")
    horizon = _need(meta, "horizon_days", int, "meta")
    cap = _need(meta, "travel_cap", int, "meta")
    skills_raw = _need(doc, "skills", list, "$")
    for i, s in enumerate(skills_raw):
        if not isinstance(s, str):
            raise SchemaError(f"skills[{i}]: expected string")

    tasks = []
    for i, raw in enumerate(_need(doc, "tasks", list, "$")):
        p = f"tasks[{i}]"
        if not isinstance(raw, dict):
            raise SchemaError(f"{p}: expected an object")
        try:
            tasks.append(
                Task(
                    id=_need(raw, "id", str, p),
                    location=_need(raw, "location", int, p),
                    duration=_need(raw, "duration", int, p),
                    penalty=_need(raw, "penalty", int, p),
                    window=_window(_need(raw, "window", list, p), f"{p}.window"),
                    skills=frozenset(_need(raw, "skills", list, p)),
                    digitizable=bool(raw.get("digitizable", False)),
                    xy=_xy(raw.get("xy"), f"{p}.xy"),
                )
            )
        except ValueError as exc:
            if isinstance(exc, SchemaError):
                raise
            raise SchemaError(f"{p}: {exc}") from exc

    masters = []
    for i, raw in enumerate(_need(doc, "masters", list, "$")):
        p = f"masters[{i}]"
        if not isinstance(raw, dict):
            raise SchemaError(f"{p}: expected an object")
        shifts = []
        for j, sraw in enumerate(_need(raw, "shifts", list, p)):
            sp = f"{p}.shifts[{j}]"
            if not isinstance(sraw, dict):
                raise SchemaError(f"{sp}: expected an object")
            shifts.append(
                Shift(
                    day=_need(sraw, "day", int, sp),
                    window=_window(_need(sraw, "window", list, sp), f"{sp}.window"),
                )
            )
        masters.append(
            MasterTechnician(
                id=_need(raw, "id", str, p),
                depot=_need(raw, "depot", int, p),
                skills=frozenset(_need(raw, "skills", list, p)),
                shifts=tuple(shifts),
                xy=_xy(raw.get("xy"), f"{p}.xy"),
                hire_candidate=bool(raw.get("hire_candidate", False)),
            )
        )

    travel_raw = doc.get("travel")
    if travel_raw is not None:
        minutes = _need(travel_raw, "minutes", list, "travel")
        n = len(minutes)
        for i, row in enumerate(minutes):
            if not isinstance(row, list) or len(row) != n:
                raise SchemaError(f"travel.minutes[{i}]: expected a row of {n} ints")
        overrides = {}
        for key, mat in travel_raw.get("overrides", {}).items():
            overrides[key] = np.array(mat, dtype=np.int64)
        travel = TravelMatrix(np.array(minutes, dtype=np.int64), overrides)
    else:
        travel = travel_from_xy(tasks, masters)

    try:
        inst = Instance(
            name=name,
            horizon_days=horizon,
            tasks=tuple(tasks),
            masters=tuple(masters),
            travel=travel,
            skills=tuple(skills_raw),
            travel_cap=cap,
        )
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc
    inst.travel.check_triangle()
    return inst


def travel_from_xy(tasks, masters) -> TravelMatrix:
    """Euclidean travel times rounded up to whole minutes.

    Locations are indexed tasks first, then masters, in listing order.
    Rounding up preserves the triangle inequality.
    """
    pts = []
    for t in tasks:
        if t.xy is None:
            raise SchemaError(f"task {t.id}: no travel matrix and no xy coordinates")
        pts.append(t.xy)
    for m in masters:
        if m.xy is None:
            raise SchemaError(f"master {m.id}: no travel matrix and no xy coordinates")
        pts.append(m.xy)
    n = len(pts)
    mat = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(i + 1, n):
            d = math.ceil(math.hypot(pts[i][0] - pts[j][0], pts[i][1] - pts[j][1]))
            mat[i, j] = mat[j, i] = d
    return TravelMatrix(mat)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True)


def write_canonical(instance: Instance, path: str) -> None:
    """Write an instance in the canonical layout: one entity per line."""
    lines = ["{"]
    meta = {
        "name": instance.name,
        "horizon_days": instance.horizon_days,
        "travel_cap": instance.travel_cap,
    }
    lines.append(f'"meta": {_dump(meta)},')
    lines.append(f'"skills": {_dump(list(instance.skills))},')
    lines.append('"tasks": [')
    for i, t in enumerate(instance.tasks):
        obj = {
            "id": t.id,
            "location": t.location,
            "duration": t.duration,
            "penalty": t.penalty,
            "window": [t.window.start, t.window.end],
            "skills": sorted(t.skills),
            "digitizable": t.digitizable,
        }
        if t.xy is not None:
            obj["xy"] = list(t.xy)
        comma = "," if i + 1 < len(instance.tasks) else ""
        lines.append(f"  {_dump(obj)}{comma}")
    lines.append("],")
    lines.append('"masters": [')
    for i, m in enumerate(instance.masters):
        obj = {
            "id": m.id,
            "depot": m.depot,
            "skills": sorted(m.skills),
            "shifts": [{"day": s.day, "window": [s.window.start, s.window.end]} for s in m.shifts],
            "hire_candidate": m.hire_candidate,
        }
        if m.xy is not None:
            obj["xy"] = list(m.xy)
        comma = "," if i + 1 < len(instance.masters) else ""
        lines.append(f"  {_dump(obj)}{comma}")
    lines.append("],")
    lines.append('"travel": {"minutes": [')
    n = instance.travel.n_locations
    for i in range(n):
        row = json.dumps([int(v) for v in instance.travel.minutes[i]])
        comma = "," if i + 1 < n else ""
        lines.append(f"  {row}{comma}")
    if instance.travel.overrides:
        lines.append('], "overrides": {')
        keys = sorted(instance.travel.overrides)
        for ki, key in enumerate(keys):
            mat = instance.travel.overrides[key]
            rows = json.dumps([[int(v) for v in row] for row in mat])
            comma = "," if ki + 1 < len(keys) else ""
            lines.append(f"  {_dump(key)}: {rows}{comma}")
        lines.append("}}")
    else:
        lines.append("]}")
    lines.append("}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def gen_synthetic(
    seed: int,
    n_tasks: int = 12,
    n_masters: int = 3,
    n_days: int = 1,
    n_skills: int = 4,
    geometry: str = "uniform",
    window_style: str = "narrow",
    ensure_coverage: bool = True,
    penalty_range: tuple[int, int] = (200, 500),
    travel_cap: int = 100,
    name: str | None = None,
) -> Instance:
    """Generate a random instance on a 120 x 120 minute grid.

    geometry "clustered" groups tasks around a few centers, "uniform"
    scatters them.  window_style picks narrow (1.5-3h) or wide (5-8h)
    task windows inside the 9:00-17:00 working day.  With
    ensure_coverage every task ends up with at least one technician who
    can reach and serve it; without it scarcity is left as sampled.
    """
    if geometry not in ("uniform", "clustered"):
        raise ValueError(f"unknown geometry {geometry!r}")
    if window_style not in ("narrow", "wide"):
        raise ValueError(f"unknown window_style {window_style!r}")
    rng = random.Random(seed)
    skills = tuple(f"S{i:02d}" for i in range(n_skills))

    depots = [(rng.randint(0, 120), rng.randint(0, 120)) for _ in range(n_masters)]
    master_skills = []
    master_days = []
    for j in range(n_masters):
        size = rng.randint(max(1, n_skills // 3), n_skills)
        master_skills.append(set(rng.sample(skills, size)))
        days = [d for d in range(n_days) if rng.random() < 0.8]
        if not days:
            days = [rng.randrange(n_days)]
        master_days.append(days)
    for d in range(n_days):
        if not any(d in days for days in master_days):
            master_days[rng.randrange(n_masters)].append(d)

    centers = None
    if geometry == "clustered":
        centers = [(rng.randint(10, 110), rng.randint(10, 110)) for _ in range(max(2, n_tasks // 6))]

    task_rows = []
    for i in range(n_tasks):
        if centers is not None:
            cx, cy = centers[rng.randrange(len(centers))]
            x = min(120, max(0, cx + round(rng.gauss(0, 8))))
            y = min(120, max(0, cy + round(rng.gauss(0, 8))))
        else:
            x, y = rng.randint(0, 120), rng.randint(0, 120)
        duration = rng.randint(20, 90)
        day = rng.randrange(n_days)
        if window_style == "narrow":
            width = rng.randint(90, 180)
        else:
            width = rng.randint(300, 480)
        width = max(width, duration + 10)
        start_rel = rng.randint(DAY_START, DAY_END - width)
        r = rng.random()
        if r < 0.60:
            tskills = {rng.choice(skills)}
        elif r < 0.85 and n_skills >= 2:
            tskills = set(rng.sample(skills, 2))
        else:
            tskills = set()
        penalty = rng.randint(*penalty_range)
        task_rows.append(
            {
                "x": x,
                "y": y,
                "duration": duration,
                "day": day,
                "start": day * 1440 + start_rel,
                "end": day * 1440 + start_rel + width,
                "skills": tskills,
                "penalty": penalty,
            }
        )

    if ensure_coverage:
        for row in task_rows:
            working = [j for j in range(n_masters) if row["day"] in master_days[j]]
            near = [
                j
                for j in working
                if math.ceil(math.hypot(depots[j][0] - row["x"], depots[j][1] - row["y"]))
                <= travel_cap
            ]
            if not near:
                j = rng.choice(working)
                # Re-place the task within reach of that depot.
                r = rng.uniform(0, max(travel_cap - 10, 5))
                ang = rng.uniform(0, 2 * math.pi)
                row["x"] = min(120, max(0, round(depots[j][0] + r * math.cos(ang))))
                row["y"] = min(120, max(0, round(depots[j][1] + r * math.sin(ang))))
                near = [j]
            if not any(row["skills"] <= master_skills[j] for j in near):
                j = min(
                    near,
                    key=lambda jj: math.hypot(depots[jj][0] - row["x"], depots[jj][1] - row["y"]),
                )
                master_skills[j] |= row["skills"]

    tasks = tuple(
        Task(
            id=f"t{i:03d}",
            location=i,
            duration=row["duration"],
            penalty=row["penalty"],
            window=TimeWindow(row["start"], row["end"]),
            skills=frozenset(row["skills"]),
            xy=(float(row["x"]), float(row["y"])),
        )
        for i, row in enumerate(task_rows)
    )
    masters = tuple(
        MasterTechnician(
            id=f"m{j:02d}",
            depot=n_tasks + j,
            skills=frozenset(master_skills[j]),
            shifts=tuple(
                Shift(day=d, window=TimeWindow(d * 1440 + DAY_START, d * 1440 + DAY_END))
                for d in sorted(master_days[j])
            ),
            xy=(float(depots[j][0]), float(depots[j][1])),
        )
        for j in range(n_masters)
    )
    return Instance(
        name=name or f"syn{seed:05d}",
        horizon_days=n_days,
        tasks=tasks,
        masters=masters,
        travel=travel_from_xy(tasks, masters),
        skills=skills,
        travel_cap=travel_cap,
    )

"""Importer for the Mathlouthi et al. benchmark layout.

Source files are line oriented with one record per line:

    TASK <id> <x> <y> <duration> <penalty> <k> <a1> <b1> ... <ak> <bk> SKILLS <s,..|-> TOOLS <t,..|->
    TECH <id> <x> <y> SKILLS <s,..|-> TOOLS <t,..|->
    TOOLDEPOT <id> <x> <y> TOOLS <t,..|->
    TRAVELTIME <n> followed by n whitespace-separated rows of n integers
    TRAVELDIST <n> followed by n rows, ignored

Locations index in listing order: tasks, technicians, tool depots.
Import rules: tools and tool depots are dropped, travel distances are
dropped (times kept), technicians work 9:00-17:00, and a task with k
time windows becomes k single-window tasks sharing one location.
Penalties stay in travel-time units.
"""

from __future__ import annotations

import numpy as np

from .core import Instance, MasterTechnician, Shift, Task, TimeWindow, TravelMatrix

TECH_WINDOW = TimeWindow(540, 1020)  # 9:00 - 17:00


def _split_list(token: str) -> frozenset[str]:
    if token == "-":
        return frozenset()
    return frozenset(token.split(","))


class _Reader:
    def __init__(self, path: str):
        self.path = path
        with open(path) as fh:
            self.lines = fh.readlines()
        self.pos = 0

    def next_tokens(self):
        while self.pos < len(self.lines):
            line = self.lines[self.pos].strip()
            self.pos += 1
            if line and not line.startswith("#"):
                return self.lineno, line.split()
        return None, None

    @property
    def lineno(self) -> int:
        return self.pos

    def fail(self, msg: str):
        raise ValueError(f"{self.path}:{self.lineno}: {msg}")

    def read_matrix(self, n: int) -> np.ndarray:
        vals: list[int] = []
        while len(vals) < n * n:
            lineno, toks = self.next_tokens()
            if toks is None:
                self.fail(f"matrix truncated, got {len(vals)} of {n * n} values")
            try:
                vals.extend(int(t) for t in toks)
            except ValueError:
                self.fail("matrix row contains a non-integer")
        if len(vals) != n * n:
            self.fail(f"matrix has {len(vals)} values, expected {n * n}")
        return np.array(vals, dtype=np.int64).reshape(n, n)


def import_mathlouthi(path: str, name: str | None = None) -> Instance:
    """Read a benchmark file and apply the import rules."""
    rd = _Reader(path)
    raw_tasks = []
    raw_techs = []
    n_tooldepots = 0
    travel_time = None

    while True:
        lineno, toks = rd.next_tokens()
        if toks is None:
            break
        kind = toks[0].upper()
        if kind == "TASK":
            try:
                tid, x, y = toks[1], float(toks[2]), float(toks[3])
                duration, penalty, k = int(toks[4]), int(toks[5]), int(toks[6])
                windows = []
                for w in range(k):
                    a, b = int(toks[7 + 2 * w]), int(toks[8 + 2 * w])
                    windows.append((a, b))
                rest = toks[7 + 2 * k :]
            except (IndexError, ValueError):
                rd.fail("malformed TASK record")
            if len(rest) != 4 or rest[0].upper() != "SKILLS" or rest[2].upper() != "TOOLS":
                rd.fail("TASK record must end with SKILLS <list> TOOLS <list>")
            raw_tasks.append((tid, (x, y), duration, penalty, windows, _split_list(rest[1])))
        elif kind == "TECH":
            try:
                tid, x, y = toks[1], float(toks[2]), float(toks[3])
                rest = toks[4:]
            except (IndexError, ValueError):
                rd.fail("malformed TECH record")
            if len(rest) != 4 or rest[0].upper() != "SKILLS" or rest[2].upper() != "TOOLS":
                rd.fail("TECH record must end with SKILLS <list> TOOLS <list>")
            raw_techs.append((tid, (x, y), _split_list(rest[1])))
        elif kind == "TOOLDEPOT":
            n_tooldepots += 1
        elif kind == "TRAVELTIME":
            try:
                n = int(toks[1])
            except (IndexError, ValueError):
                rd.fail("TRAVELTIME needs a size")
            travel_time = rd.read_matrix(n)
        elif kind == "TRAVELDIST":
            try:
                n = int(toks[1])
            except (IndexError, ValueError):
                rd.fail("TRAVELDIST needs a size")
            rd.read_matrix(n)
        else:
            rd.fail(f"unknown record type {toks[0]!r}")

    if not raw_tasks:
        raise ValueError(f"{path}: no TASK records")
    if not raw_techs:
        raise ValueError(f"{path}: no TECH records")

    n_locs = len(raw_tasks) + len(raw_techs)
    if travel_time is not None:
        expected = n_locs + n_tooldepots
        if travel_time.shape[0] != expected:
            raise ValueError(
                f"{path}: travel matrix is {travel_time.shape[0]}x{travel_time.shape[0]}, "
                f"expected {expected} locations"
            )
        travel = TravelMatrix(travel_time[:n_locs, :n_locs])
    else:
        travel = None

    tasks = []
    for src_idx, (tid, xy, duration, penalty, windows, skills) in enumerate(raw_tasks):
        for w, (a, b) in enumerate(windows):
            split_id = tid if len(windows) == 1 else f"{tid}_w{w}"
            tasks.append(
                Task(
                    id=split_id,
                    location=src_idx,
                    duration=duration,
                    penalty=penalty,
                    window=TimeWindow(a, b),
                    skills=skills,
                    xy=xy,
                )
            )
    masters = [
        MasterTechnician(
            id=tid,
            depot=len(raw_tasks) + j,
            skills=skills,
            shifts=(Shift(day=0, window=TECH_WINDOW),),
            xy=xy,
        )
        for j, (tid, xy, skills) in enumerate(raw_techs)
    ]

    if travel is None:
        pts = [xy for _, xy, *_ in raw_tasks] + [xy for _, xy, _ in raw_techs]
        import math as _math

        mat = np.zeros((n_locs, n_locs), dtype=np.int64)
        for i in range(n_locs):
            for j in range(i + 1, n_locs):
                d = _math.ceil(_math.hypot(pts[i][0] - pts[j][0], pts[i][1] - pts[j][1]))
                mat[i, j] = mat[j, i] = d
        travel = TravelMatrix(mat)

    skills_universe = set()
    for t in tasks:
        skills_universe |= t.skills
    for m in masters:
        skills_universe |= m.skills
    return Instance(
        name=name or "mathlouthi",
        horizon_days=1,
        tasks=tuple(tasks),
        masters=tuple(masters),
        travel=travel,
        skills=tuple(sorted(skills_universe)),
    )

"""Solution files and batch reports.

Solutions serialize to a small JSON document; batch runs produce a CSV
report with a fixed column order plus duration-curve CSVs (values
sorted nonincreasing) for cross-instance comparisons.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

from .core import Route, Solution

REPORT_COLUMNS = [
    "instance_id",
    "obj_noinv",
    "obj_inv",
    "capex_total",
    "capex_ot",
    "capex_dig",
    "capex_skill",
    "capex_nt",
    "business_case",
    "unserved_noinv",
    "unserved_inv",
    "travel_noinv",
    "travel_inv",
    "cg_iters",
    "cg_optimal",
    "seconds_assm",
    "seconds_alns",
]


@dataclass
class ReportRow:
    instance_id: str
    obj_noinv: int
    obj_inv: int
    capex_total: int
    capex_ot: int
    capex_dig: int
    capex_skill: int
    capex_nt: int
    business_case: int
    unserved_noinv: int
    unserved_inv: int
    travel_noinv: int
    travel_inv: int
    cg_iters: int
    cg_optimal: bool
    seconds_assm: float
    seconds_alns: float


def _cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.3f}"
    return str(value)


def write_report(rows: list[ReportRow], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for row in rows:
            writer.writerow([_cell(getattr(row, col)) for col in REPORT_COLUMNS])


def write_duration_curve(rows: list[ReportRow], column: str, path: str) -> None:
    """One column of the report sorted nonincreasing, for curve plots."""
    if column not in REPORT_COLUMNS:
        raise ValueError(f"unknown report column {column!r}")
    values = sorted((getattr(row, column) for row in rows), reverse=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", column])
        for rank, value in enumerate(values, start=1):
            writer.writerow([rank, _cell(value)])


def write_solution(solution: Solution, path: str) -> None:
    doc = {
        "objective": solution.objective,
        "routes": [
            {
                "technician": r.technician_id,
                "visits": [[task_id, start] for task_id, start in r.visits],
            }
            for r in sorted(solution.routes, key=lambda r: r.technician_id)
            if r.visits
        ],
        "unserved": sorted(solution.unserved),
        "digitized": sorted(solution.digitized),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_solution(path: str) -> Solution:
    with open(path) as fh:
        doc = json.load(fh)
    routes = [
        Route(
            technician_id=r["technician"],
            visits=[(task_id, int(start)) for task_id, start in r["visits"]],
        )
        for r in doc["routes"]
    ]
    return Solution(
        routes=routes,
        unserved=set(doc["unserved"]),
        digitized=set(doc.get("digitized", [])),
        objective=int(doc["objective"]),
    )

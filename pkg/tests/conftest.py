"""Shared fixtures and hand-built instances for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from techplan.core import (
    Instance,
    MasterTechnician,
    Shift,
    Task,
    TimeWindow,
    TravelMatrix,
)

# Symmetric, triangle-clean travel matrix over five locations:
# 0 and 1 are depots, 2-4 are task sites.
TOY_TRAVEL = np.array(
    [
        [0, 50, 20, 30, 40],
        [50, 0, 35, 25, 45],
        [20, 35, 0, 15, 30],
        [30, 25, 15, 0, 20],
        [40, 45, 30, 20, 0],
    ]
)


def make_toy(travel_cap: int = 100) -> Instance:
    """Three tasks, two masters, one day; small enough to check by hand."""
    tasks = (
        Task(
            id="t1",
            location=2,
            duration=60,
            penalty=300,
            window=TimeWindow(0, 300),
            skills=frozenset({"s1"}),
        ),
        Task(
            id="t2",
            location=3,
            duration=45,
            penalty=250,
            window=TimeWindow(100, 400),
            skills=frozenset({"s2"}),
        ),
        Task(
            id="t3",
            location=4,
            duration=30,
            penalty=200,
            window=TimeWindow(350, 580),
            skills=frozenset(),
        ),
    )
    masters = (
        MasterTechnician(
            id="mA",
            depot=0,
            skills=frozenset({"s1", "s2"}),
            shifts=(Shift(0, TimeWindow(0, 600)),),
        ),
        MasterTechnician(
            id="mB",
            depot=1,
            skills=frozenset({"s1"}),
            shifts=(Shift(0, TimeWindow(0, 300)),),
        ),
    )
    return Instance(
        name="toy",
        horizon_days=1,
        tasks=tasks,
        masters=masters,
        travel=TravelMatrix(TOY_TRAVEL),
        skills=("s1", "s2"),
        travel_cap=travel_cap,
    )


@pytest.fixture
def toy() -> Instance:
    return make_toy()

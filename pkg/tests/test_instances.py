"""Synthetic generator, canonical JSON round-trips, benchmark import."""

import json

import numpy as np
import pytest

from techplan.core import Instance, TravelMatrix
from techplan.instances import (
    SchemaError,
    gen_synthetic,
    parse_canonical,
    travel_from_xy,
    write_canonical,
)
from techplan.mathlouthi import import_mathlouthi

from conftest import make_toy
from oracle import daily_techs, eligible


def test_gen_deterministic_and_seed_sensitive():
    a = gen_synthetic(seed=5)
    b = gen_synthetic(seed=5)
    c = gen_synthetic(seed=6)
    assert a == b
    assert a != c


def test_gen_shapes_and_fields():
    inst = gen_synthetic(seed=2, n_tasks=9, n_masters=3, n_days=2, n_skills=5,
                         penalty_range=(100, 150), travel_cap=80)
    assert len(inst.tasks) == 9
    assert len(inst.masters) == 3
    assert len(inst.skills) == 5
    assert inst.horizon_days == 2
    assert inst.travel_cap == 80
    assert inst.travel.n_locations == 9 + 3
    assert all(100 <= t.penalty <= 150 for t in inst.tasks)
    for m in inst.masters:
        assert all(0 <= s.day < 2 for s in m.shifts)
    # Every day is worked by someone.
    worked = {s.day for m in inst.masters for s in m.shifts}
    assert worked == {0, 1}


def test_gen_travel_is_metric():
    for seed in (0, 1, 2):
        inst = gen_synthetic(seed=seed, n_tasks=10)
        assert inst.travel.check_triangle() == 0
        assert (inst.travel.minutes == inst.travel.minutes.T).all()
        assert (np.diag(inst.travel.minutes) == 0).all()


def test_gen_window_styles():
    narrow = gen_synthetic(seed=4, window_style="narrow")
    wide = gen_synthetic(seed=4, window_style="wide")
    assert max(t.window.length for t in narrow.tasks) <= 180
    assert min(t.window.length for t in wide.tasks) >= 300


def test_gen_ensure_coverage():
    for seed in range(6):
        inst = gen_synthetic(seed=seed, n_tasks=10, n_masters=2)
        covered = set()
        for view in daily_techs(inst):
            covered.update(eligible(view, inst))
        assert covered == {t.id for t in inst.tasks}, seed


def test_gen_clustered_geometry():
    def mean_nearest(i):
        sub = i.travel.minutes[: len(i.tasks), : len(i.tasks)].astype(float)
        np.fill_diagonal(sub, np.inf)
        return sub.min(axis=1).mean()

    inst = gen_synthetic(seed=3, geometry="clustered", n_tasks=18)
    assert inst == gen_synthetic(seed=3, geometry="clustered", n_tasks=18)
    # Tasks in a clustered instance have a much closer nearest neighbor.
    for seed in range(4):
        clustered = gen_synthetic(seed=seed, geometry="clustered", n_tasks=18)
        uniform = gen_synthetic(seed=seed, geometry="uniform", n_tasks=18)
        assert mean_nearest(clustered) < mean_nearest(uniform), seed


def test_gen_rejects_unknown_styles():
    with pytest.raises(ValueError, match="geometry"):
        gen_synthetic(seed=0, geometry="ring")
    with pytest.raises(ValueError, match="window_style"):
        gen_synthetic(seed=0, window_style="open")


@pytest.mark.parametrize("kwargs", [
    dict(seed=0),
    dict(seed=1, geometry="clustered"),
    dict(seed=2, n_days=2, n_masters=4),
    dict(seed=3, window_style="wide", ensure_coverage=False),
])
def test_canonical_roundtrip(tmp_path, kwargs):
    inst = gen_synthetic(**kwargs)
    path = tmp_path / "inst.json"
    write_canonical(inst, str(path))
    # The canonical layout is real JSON.
    json.loads(path.read_text())
    assert parse_canonical(str(path)) == inst


def test_canonical_roundtrip_with_overrides(tmp_path):
    toy = make_toy()
    slow = toy.travel.minutes * 2
    inst = Instance(
        name=toy.name,
        horizon_days=toy.horizon_days,
        tasks=toy.tasks,
        masters=toy.masters,
        travel=TravelMatrix(toy.travel.minutes, overrides={"mB": slow}),
        skills=toy.skills,
        travel_cap=toy.travel_cap,
    )
    path = tmp_path / "toy.json"
    write_canonical(inst, str(path))
    back = parse_canonical(str(path))
    assert back == inst
    assert back.travel.time(0, 1, "mB") == 100


def test_parse_schema_errors(tmp_path):
    inst = gen_synthetic(seed=0, n_tasks=3, n_masters=1)
    path = tmp_path / "inst.json"
    write_canonical(inst, str(path))
    doc = json.loads(path.read_text())

    broken = json.loads(json.dumps(doc))
    del broken["tasks"][0]["duration"]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(broken))
    with pytest.raises(SchemaError, match=r"tasks\[0\].duration: missing"):
        parse_canonical(str(bad))

    broken = json.loads(json.dumps(doc))
    broken["tasks"][1]["window"] = [900, 600]
    bad.write_text(json.dumps(broken))
    with pytest.raises(SchemaError, match="start 900 after end 600"):
        parse_canonical(str(bad))

    bad.write_text("[]")
    with pytest.raises(SchemaError, match="top level"):
        parse_canonical(str(bad))

    bad.write_text("{nope")
    with pytest.raises(SchemaError, match="not valid JSON"):
        parse_canonical(str(bad))


def test_travel_from_xy_metric_and_errors(toy):
    inst = gen_synthetic(seed=1, n_tasks=6, n_masters=2)
    tm = travel_from_xy(inst.tasks, inst.masters)
    assert tm.check_triangle() == 0
    assert (tm.minutes == tm.minutes.T).all()
    # The toy instance carries no coordinates.
    with pytest.raises(SchemaError, match="no travel matrix and no xy"):
        travel_from_xy(toy.tasks, toy.masters)


MATHLOUTHI_SAMPLE = """\
# tiny hand-written benchmark file
TASK t1 10 20 60 300 1 560 700 SKILLS s1 TOOLS -
TASK t2 30 40 45 250 2 560 700 800 900 SKILLS s1,s2 TOOLS w1
TECH m1 5 5 SKILLS s1,s2 TOOLS w1
TRAVELTIME 3
0 10 20
10 0 15
20 15 0
TRAVELDIST 3
0 99 99
99 0 99
99 99 0
"""


def test_import_mathlouthi(tmp_path):
    path = tmp_path / "bench.txt"
    path.write_text(MATHLOUTHI_SAMPLE)
    inst = import_mathlouthi(str(path), name="bench")
    assert inst.name == "bench"
    # The two-window task splits; both copies share one location.
    assert [t.id for t in inst.tasks] == ["t1", "t2_w0", "t2_w1"]
    assert inst.tasks[1].location == inst.tasks[2].location == 1
    assert inst.tasks[1].window.start == 560 and inst.tasks[2].window.end == 900
    assert inst.tasks[0].skills == frozenset({"s1"})
    assert inst.tasks[1].skills == frozenset({"s1", "s2"})
    [m] = inst.masters
    assert m.depot == 2
    assert m.shifts[0].window.start == 540 and m.shifts[0].window.end == 1020
    # Travel times kept, distances dropped.
    assert inst.travel.time(0, 2) == 20
    assert inst.skills == ("s1", "s2")


def test_import_mathlouthi_xy_fallback(tmp_path):
    text = (
        "TASK t1 0 0 30 100 1 560 700 SKILLS - TOOLS -\n"
        "TECH m1 3 4 SKILLS - TOOLS -\n"
    )
    path = tmp_path / "noxy.txt"
    path.write_text(text)
    inst = import_mathlouthi(str(path))
    assert inst.travel.time(0, 1) == 5  # hypot(3, 4)


def test_import_mathlouthi_errors(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("FROB x\n")
    with pytest.raises(ValueError, match="unknown record type"):
        import_mathlouthi(str(path))

    path.write_text("TECH m1 0 0 SKILLS - TOOLS -\n")
    with pytest.raises(ValueError, match="no TASK records"):
        import_mathlouthi(str(path))

    path.write_text(
        "TASK t1 0 0 30 100 1 560 700 SKILLS - TOOLS -\n"
        "TECH m1 3 4 SKILLS - TOOLS -\n"
        "TRAVELTIME 2\n0 5\n"
    )
    with pytest.raises(ValueError, match="matrix truncated"):
        import_mathlouthi(str(path))

    path.write_text(
        "TASK t1 0 0 30 100 1 560 700 SKILLS - TOOLS -\n"
        "TECH m1 3 4 SKILLS - TOOLS -\n"
        "TRAVELTIME 3\n0 5 1\n5 0 1\n1 1 0\n"
    )
    with pytest.raises(ValueError, match="expected 2 locations"):
        import_mathlouthi(str(path))

"""Column generation: master structure, pricing audits, convergence."""

import math

import pytest

from techplan.backend import GE, LE, enumerate_tiny, solve_lp
from techplan.assign import build_assignment_invest
from techplan.catalog import InvestmentCatalog, SkillBundle, build_catalog
from techplan.colgen import (
    Column,
    ColgenConfig,
    Duals,
    build_master,
    estimate_cost,
    extract_duals,
    initial_columns,
    price,
    reduced_cost,
    run_colgen,
    select_technicians,
    warmstart_columns,
)
from techplan.core import MasterTechnician, Route, Shift, Solution, TimeWindow
from techplan.instances import gen_synthetic

from conftest import make_toy


def lean_catalog() -> InvestmentCatalog:
    return InvestmentCatalog(
        digitization={"t3": 100},
        bundles=(SkillBundle(frozenset({"s2"}), 50),),
    )


def test_estimate_cost_hand_value(toy):
    tech = toy.daily_by_id["mA#0"]
    # Depot legs 20 and 40, pair leg 30: worst leg 40, scale 5.
    assert estimate_cost(("t1", "t3"), tech, toy) == 200
    assert estimate_cost((), tech, toy) == 0


def test_column_identity_ignores_pricing_objective():
    a = Column("m#0", ("t1", "t2"), cost=5, pricing_objective=-1.0)
    b = Column("m#0", ("t1", "t2"), cost=5, pricing_objective=-9.0)
    assert a == b
    assert a.key() == b.key()
    assert a.key() != Column("m#0", ("t1",), cost=5).key()


def test_initial_columns_invariants():
    inst = gen_synthetic(seed=6, n_tasks=10, n_masters=3)
    cols = initial_columns(inst)
    keys = [c.key() for c in cols]
    assert len(keys) == len(set(keys))
    # One empty column per technician.
    empties = {c.technician_id for c in cols if not c.task_ids}
    assert empties == {t.id for t in inst.dailies}
    served = []
    for c in cols:
        assert c.task_ids == tuple(sorted(c.task_ids))
        assert not c.uses_overtime and not c.bundles
        served.extend(c.task_ids)
        tech = inst.daily_by_id[c.technician_id]
        load = sum(
            inst.task_by_id[tid].duration
            + inst.travel.time(tech.depot, inst.task_by_id[tid].location, tech.master_id)
            for tid in c.task_ids
        )
        assert load <= tech.capacity
        assert c.cost == estimate_cost(c.task_ids, tech, inst)
    assert len(served) == len(set(served))  # greedy serves each task once


def test_build_master_row_families(toy):
    cat = InvestmentCatalog(
        digitization={"t3": 100},
        bundles=(SkillBundle(frozenset({"s2"}), 50),),
        hire_candidates=(
            MasterTechnician(
                id="mB+new",
                depot=1,
                skills=frozenset({"s1"}),
                shifts=toy.masters[1].shifts,
                hire_candidate=True,
            ),
        ),
    )
    cols = [
        Column("mB+new#0", ()),
        Column("mB+new#0", ("t1",), cost=175),
        Column("mA#0", ("t1", "t2"), uses_overtime=True, bundles=(0,), cost=150),
    ]
    model, index = build_master(cols, toy, cat, relax_columns=True)
    rows = index["rows"]
    # Alpha for both techs with columns; none for column-less mB#0.
    assert set(rows["alpha"]) == {"mB+new#0", "mA#0"}
    # The empty column never forces a hire.
    beta = rows["beta"]["mB+new#0"]
    coeffs = model.row_coeffs[beta]
    assert index["x"][1] in coeffs and index["x"][0] not in coeffs
    assert coeffs[index["hire"]["mB+new"]] == -1.0
    # Overtime and bundle links exist exactly where columns use them.
    assert set(rows["gamma"]) == {"mA#0"}
    assert set(rows["mu"]) == {("mA#0", 0)}
    assert set(rows["nu"]) == {"t1", "t2", "t3"}
    assert model.senses[rows["nu"]["t1"]] == GE
    assert model.senses[rows["alpha"]["mA#0"]] == LE
    # Relaxed column variables are continuous and unbounded above.
    for v in index["x"]:
        assert not model.binary[v]
        assert math.isinf(model.ub[v])

    with pytest.raises(ValueError, match="unknown technician"):
        build_master([Column("ghost#0", ())], toy, cat)


def test_extract_duals_defaults_and_signs(toy):
    cat = lean_catalog()
    cols = initial_columns(toy)
    model, index = build_master(cols, toy, cat, relax_columns=True)
    lp = solve_lp(model)
    assert lp.optimal
    duals = extract_duals(lp, index)
    # Every technician reads an alpha value, including defaults.
    assert set(duals.alpha) == set(index["dailies"])
    assert all(v <= 1e-7 for v in duals.alpha.values())
    assert all(v >= -1e-7 for v in duals.nu.values())

    # A positive assignment dual is a sign error and must be caught.
    alpha_row = next(iter(index["rows"]["alpha"].values()))
    lp.duals[alpha_row] = 0.5
    with pytest.raises(AssertionError, match="alpha dual positive"):
        extract_duals(lp, index)


def test_reduced_cost_arithmetic():
    duals = Duals(
        alpha={"m#0": -3.0},
        beta={"m#0": -2.0},
        gamma={"m#0": -5.0},
        mu={("m#0", 1): -7.0},
        nu={"a": 40.0, "b": 10.0},
    )
    col = Column("m#0", ("a", "b"), uses_overtime=True, bundles=(1,), cost=30)
    # 30 - (-5) - (-7) - 50 - (-3 + -2) = 30 + 5 + 7 - 50 + 5 = -3
    assert reduced_cost(col, duals) == pytest.approx(-3.0)
    # Unknown technician: every dual reads zero.
    assert reduced_cost(Column("x#0", ("a",), cost=4), Duals(nu={"a": 1.0})) == pytest.approx(3.0)


def test_price_returns_none_without_incentive(toy):
    cat = lean_catalog()
    tech = toy.daily_by_id["mA#0"]
    assert price(tech, Duals(), toy, cat) is None


def test_price_finds_negative_column_and_audits(toy):
    cat = lean_catalog()
    tech = toy.daily_by_id["mB#0"]
    duals = Duals(nu={"t1": 1000.0})
    info = {}
    col = price(tech, duals, toy, cat, info=info)
    assert info["exact"] is True
    assert col is not None
    assert col.technician_id == "mB#0"
    assert "t1" in col.task_ids
    assert col.pricing_objective < -1e-6
    assert reduced_cost(col, duals) == pytest.approx(col.pricing_objective, abs=1e-6)
    # Serving t1 alone: est 5 * 35 = 175, minus the 1000 coverage dual.
    assert col.task_ids == ("t1",)
    assert col.cost == 175
    assert not col.uses_overtime and not col.bundles


def test_price_buys_bundle_when_it_pays(toy):
    cat = lean_catalog()
    tech = toy.daily_by_id["mB#0"]  # lacks s2
    duals = Duals(nu={"t2": 1000.0})
    col = price(tech, duals, toy, cat)
    assert col is not None
    assert col.task_ids == ("t2",)
    assert col.bundles == (0,)


def test_select_technicians_order():
    # The constant -(alpha + beta) is added to every reduced cost, so
    # technicians whose constant is closest to zero price first.
    duals = Duals(alpha={"a#0": -5.0, "b#0": 0.0, "c#0": -1.0}, beta={"b#0": -0.5})
    assert select_technicians(duals) == ["b#0", "c#0", "a#0"]
    assert select_technicians(duals, global_cap=2) == ["b#0", "c#0"]


def test_warmstart_columns_capacity_guard():
    toy = make_toy()
    sol = Solution(routes=[Route("mA#0", [("t1", 20), ("t2", 100)])], unserved={"t3"})
    [col] = warmstart_columns(sol, toy)
    assert col.task_ids == ("t1", "t2")
    assert not col.uses_overtime
    assert col.cost == estimate_cost(("t1", "t2"), toy.daily_by_id["mA#0"], toy)

    # Shrink mB's day so its surrogate load (60 + 35 = 95) overshoots.
    shrunk = make_toy()
    masters = (
        shrunk.masters[0],
        MasterTechnician(
            id="mB",
            depot=1,
            skills=frozenset({"s1"}),
            shifts=(Shift(0, TimeWindow(0, 90)),),
        ),
    )
    from dataclasses import replace

    tight = replace(shrunk, masters=masters)
    sol = Solution(routes=[Route("mB#0", [("t1", 35)])], unserved={"t2", "t3"})
    with_ot = warmstart_columns(sol, tight, lean_catalog())
    assert [c.uses_overtime for c in with_ot] == [True]
    assert warmstart_columns(sol, tight, catalog=None) == []


def test_run_colgen_toy_sandwich_and_determinism(toy):
    cat = lean_catalog()
    cfg = ColgenConfig(max_iters=20)
    res = run_colgen(toy, cat, cfg)
    assert res.mip.status == "optimal"
    assert res.cg_optimal

    # The master LP trace never increases.
    lp_values = [v for _, v, _, _ in res.trace]
    assert all(a >= b - 1e-9 for a, b in zip(lp_values, lp_values[1:]))

    # LP bound <= flat-model optimum <= restricted integer optimum.
    model, _ = build_assignment_invest(toy, cat)
    assert sum(model.binary) <= 22
    mono = enumerate_tiny(model)
    assert mono.optimal
    assert lp_values[-1] <= mono.objective + 1e-6
    assert mono.objective <= res.mip.objective + 1e-6

    again = run_colgen(toy, cat, cfg)
    assert [t[:3] for t in again.trace] == [t[:3] for t in res.trace]
    assert again.mip.objective == res.mip.objective
    assert [c.key() for c in again.columns] == [c.key() for c in res.columns]


def test_run_colgen_audits_negative_and_consistent():
    inst = gen_synthetic(seed=0, n_tasks=6, n_masters=2)
    cat = build_catalog(inst, n_bundles=2)
    res = run_colgen(inst, cat, ColgenConfig(max_iters=25))
    assert res.audits, "no pricing audits recorded"
    for col, duals in res.audits:
        assert col.pricing_objective < -1e-6
        assert abs(reduced_cost(col, duals) - col.pricing_objective) <= 1e-6


def test_config_validation_and_large_preset():
    with pytest.raises(ValueError):
        ColgenConfig(max_iters=0)
    with pytest.raises(ValueError):
        ColgenConfig(subproblem_time=0)
    with pytest.raises(ValueError):
        ColgenConfig(global_cap=-1)
    big = ColgenConfig.large()
    assert big.global_cap == 500
    assert big.master_lp_time == 120.0
    assert big.final_ip_time == 1200.0

import json

import numpy as np
import pytest
from conftest import random_instance

from skuqubo.audit_kpi import (
    capacity_audit,
    compute_kpis,
    selected_submatrix,
    tune_penalties,
    write_kpi_json,
    write_utilization_csv,
)
from skuqubo.qubo_builder import AllocationPlan


@pytest.fixture
def inst():
    base = random_instance(0, n=6, periods=2)
    return type(base)(**{
        **base.__dict__,
        "unit_margin": np.array([10.0, 8.0, 6.0, 4.0, 2.0, 1.0]),
        "demand": np.array([5.0, 4.0, 3.0, 2.0, 1.0, 6.0]),
        "similarity": np.array([
            [1.0, 0.9, 0.1, 0.0, 0.0, 0.0],
            [0.9, 1.0, 0.2, 0.0, 0.0, 0.0],
            [0.1, 0.2, 1.0, 0.5, 0.0, 0.0],
            [0.0, 0.0, 0.5, 1.0, 0.3, 0.0],
            [0.0, 0.0, 0.0, 0.3, 1.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
        ]),
        "capacity": 12.0,
        "sku_target": 2,
    })


def test_kpis_hand_computed(inst):
    plan = AllocationPlan(((0, 1, 2), (0, 1, 2, 3, 5)))
    cost = np.linspace(0, 1, 6)
    r = compute_kpis(plan, inst, cost, redundancy_threshold=0.15)
    assert r.period_demand == (12.0, 20.0)
    assert r.total_units == 32.0
    assert r.net_profit == 2 * (50 + 32 + 18) + 8 + 6
    assert r.total_cost == pytest.approx(2 * (0 * 5 + 0.2 * 4 + 0.4 * 3) + 0.6 * 2 + 1.0 * 6)
    assert (r.capacity_violations, r.capacity_excess) == (1, 8.0)
    assert r.distinct_skus == 5 and r.skus_per_period == (3, 5)
    # pairs at or above 0.15: (0,1),(1,2) in period 0; (0,1),(1,2),(2,3) in period 1
    assert r.redundant_pairs == 5
    # U*D = 50, 32, 18, 8, 2, 6 -> SKU 4 is the only one outside the top five
    assert set(inst.top5.tolist()) == {0, 1, 2, 3, 5}
    assert r.top5_present_all_periods is False


def test_redundancy_score(inst):
    plan = AllocationPlan(((0, 1),))
    one = type(inst)(**{**inst.__dict__, "periods": 1})
    z = (inst.unit_margin - inst.unit_margin.mean()) / inst.unit_margin.std()
    r = compute_kpis(plan, one, np.zeros(6))
    assert r.redundancy_score == pytest.approx(0.9 * (z[0] + z[1]) / 2)
    assert r.top5_present_all_periods is False


def test_capacity_audit_boundary(inst):
    assert capacity_audit(AllocationPlan(((0, 1, 2), (3,))), inst) == (0, 0.0)  # load == C is feasible


def test_plan_validation(inst):
    with pytest.raises(ValueError):
        compute_kpis(AllocationPlan(((0,),)), inst, np.zeros(6))
    with pytest.raises(ValueError):
        compute_kpis(AllocationPlan(((9,), ())), inst, np.zeros(6))


def test_tune_penalties_escalates_until_feasible(inst):
    seen = []

    def solver(instance):
        seen.append(instance.weights.capacity)
        big = instance.weights.capacity < 4 * inst.weights.capacity
        return AllocationPlan(((0, 1, 2, 3, 4, 5),) * 2 if big else ((0, 1),) * 2)

    out = tune_penalties(inst, solver, np.zeros(6))
    assert out.feasible and out.rounds == 3
    assert seen == [inst.weights.capacity * 2**k for k in range(3)]
    # two infeasible rounds with 6 SKUs > 1.2 K each double the cardinality weight
    assert out.instance.weights.cardinality == pytest.approx(4 * inst.weights.cardinality)


def test_tune_penalties_gives_up(inst):
    out = tune_penalties(inst.with_weights(capacity=0.0), lambda i: AllocationPlan(((5, 0, 1),) * 2), np.zeros(6),
                         max_rounds=3)
    assert not out.feasible and out.rounds == 3
    assert out.capacity_weights == (0.0, 1.0, 2.0)


def test_writers(tmp_path, inst):
    r = compute_kpis(AllocationPlan(((0,), (1,))), inst, np.zeros(6))
    write_kpi_json(r, tmp_path / "k.json", {"seed": 1})
    data = json.loads((tmp_path / "k.json").read_text())
    assert data["seed"] == 1 and data["table"]["Net Profit"] == r.net_profit
    write_utilization_csv(r, tmp_path / "u.csv", ["seed = 1"])
    lines = (tmp_path / "u.csv").read_text().splitlines()
    assert lines[0] == "# seed = 1" and lines[1] == "period,demand,capacity" and len(lines) == 4


def test_selected_submatrix(inst):
    ids, sub = selected_submatrix(AllocationPlan(((2, 0), (3,))), inst.similarity)
    assert ids == [0, 2, 3]
    np.testing.assert_array_equal(sub, inst.similarity[np.ix_(ids, ids)])

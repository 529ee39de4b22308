"""Feasibility audits, business KPIs and the penalty escalation loop."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from skuqubo.data_pipeline import zscore_normalize
from skuqubo.qubo_builder import AllocationPlan, ProblemInstance

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class KpiReport:
    total_units: float
    distinct_skus: int
    net_profit: float
    total_cost: float
    period_demand: tuple[float, ...]
    capacity: float
    capacity_violations: int
    capacity_excess: float
    top5_present_all_periods: bool
    redundant_pairs: int
    redundancy_score: float
    skus_per_period: tuple[int, ...]

    def to_dict(self) -> dict:
        return asdict(self)

    def table_row(self) -> dict:
        return {
            "Total SKUs Selected": self.distinct_skus,
            "Units Selected": self.total_units,
            "Net Profit": self.net_profit,
            "Total Cost": self.total_cost,
            "Cap. Violations": self.capacity_violations,
            "Cap. Excess": self.capacity_excess,
            "Redundant Pairs": self.redundant_pairs,
            "Avg. Redundancy": self.redundancy_score,
        }


def _check_plan(plan: AllocationPlan, instance: ProblemInstance) -> None:
    if plan.periods != instance.periods:
        raise ValueError(f"plan has {plan.periods} periods, instance has {instance.periods}")
    for sel in plan.selections:
        if any(not 0 <= i < instance.n_skus for i in sel):
            raise ValueError("plan references SKU indices outside the instance")


def capacity_audit(plan: AllocationPlan, instance: ProblemInstance) -> tuple[int, float]:
    """Number of periods over capacity and the summed overshoot."""
    loads = [float(instance.demand[list(sel)].sum()) for sel in plan.selections]
    over = [max(0.0, load - instance.capacity) for load in loads]
    return sum(o > 0 for o in over), float(sum(over))


def compute_kpis(
    plan: AllocationPlan,
    instance: ProblemInstance,
    norm_total_cost: Sequence[float],
    redundancy_threshold: float = 0.0,
) -> KpiReport:
    """Audit one allocation.

    Profit is ``sum U_i D_i`` over every (period, SKU) selection; cost uses
    the min-max normalized total cost times demand. Within each period every
    selected pair with ``S_ij >= redundancy_threshold`` counts as redundant,
    and the redundancy score averages ``S_ij * (z_i + z_j) / 2`` over all
    within-period selected pairs, with ``z`` the z-scored unit margin.
    """
    _check_plan(plan, instance)
    d = instance.demand
    profit = instance.profit
    cost = np.asarray(norm_total_cost, dtype=float) * d
    z_margin = zscore_normalize(instance.unit_margin)
    sim = instance.similarity

    units = net = total_cost = 0.0
    period_demand = []
    pair_count = 0
    redundancy = []
    for sel in plan.selections:
        idx = np.array(sorted(sel), dtype=np.int64)
        period_demand.append(float(d[idx].sum()))
        units += float(d[idx].sum())
        net += float(profit[idx].sum())
        total_cost += float(cost[idx].sum())
        if idx.size >= 2:
            iu, ju = np.triu_indices(idx.size, k=1)
            s = sim[idx[iu], idx[ju]]
            pair_count += int(np.count_nonzero(s >= redundancy_threshold))
            redundancy.append(s * (z_margin[idx[iu]] + z_margin[idx[ju]]) / 2.0)
    violations, excess = capacity_audit(plan, instance)
    top = set(instance.top5.tolist())
    all_scores = np.concatenate(redundancy) if redundancy else np.zeros(0)
    return KpiReport(
        total_units=units,
        distinct_skus=len(set().union(*map(set, plan.selections))) if plan.selections else 0,
        net_profit=net,
        total_cost=total_cost,
        period_demand=tuple(period_demand),
        capacity=float(instance.capacity),
        capacity_violations=violations,
        capacity_excess=excess,
        top5_present_all_periods=all(top <= set(sel) for sel in plan.selections),
        redundant_pairs=pair_count,
        redundancy_score=float(all_scores.mean()) if all_scores.size else 0.0,
        skus_per_period=tuple(len(sel) for sel in plan.selections),
    )


@dataclass(frozen=True)
class TuningOutcome:
    instance: ProblemInstance
    report: KpiReport
    rounds: int
    feasible: bool
    capacity_weights: tuple[float, ...]


def tune_penalties(
    instance: ProblemInstance,
    solver: Callable[[ProblemInstance], AllocationPlan],
    norm_total_cost: Sequence[float],
    max_rounds: int = 6,
) -> TuningOutcome:
    """Re-solve with escalating penalties until the plan is capacity-feasible.

    After an infeasible round the capacity weight doubles (a zero weight is
    lifted to 1), and the cardinality weight doubles as well when some
    period holds more than 1.2 K SKUs. Exhausting ``max_rounds`` returns the
    last result with ``feasible=False``.
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    history = []
    for rounds in range(1, max_rounds + 1):
        history.append(instance.weights.capacity)
        plan = solver(instance)
        report = compute_kpis(plan, instance, norm_total_cost)
        if report.capacity_violations == 0:
            return TuningOutcome(instance, report, rounds, True, tuple(history))
        if rounds == max_rounds:
            break
        w = instance.weights
        changes = {"capacity": 2.0 * w.capacity if w.capacity > 0 else 1.0}
        if max(report.skus_per_period) > 1.2 * instance.sku_target:
            changes["cardinality"] = 2.0 * w.cardinality if w.cardinality > 0 else 1.0
        logger.info("round %d infeasible (%d violations); escalating %s", rounds, report.capacity_violations, changes)
        instance = instance.with_weights(**changes)
    return TuningOutcome(instance, report, max_rounds, False, tuple(history))


def write_kpi_json(report: KpiReport, path: str | Path, extra: dict | None = None) -> None:
    payload = {"table": report.table_row(), "detail": report.to_dict()}
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_utilization_csv(report: KpiReport, path: str | Path, header_lines: Sequence[str] = ()) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["period", "demand", "capacity"])
        for t, load in enumerate(report.period_demand):
            writer.writerow([t, repr(load), repr(report.capacity)])


def selected_submatrix(plan: AllocationPlan, similarity: np.ndarray) -> tuple[list[int], np.ndarray]:
    """Similarity restricted to SKUs selected in any period."""
    chosen = sorted(set().union(*map(set, plan.selections))) if plan.selections else []
    return chosen, np.asarray(similarity)[np.ix_(chosen, chosen)]

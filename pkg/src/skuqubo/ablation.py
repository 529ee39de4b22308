"""Term-removal ablations with seeded repeats."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from skuqubo.audit_kpi import KpiReport, compute_kpis
from skuqubo.qubo_builder import ProblemInstance, build_qubo, decode
from skuqubo.solvers.anneal import AnnealConfig, solve_sa, solve_sqa

logger = logging.getLogger(__name__)

# weight overrides per variant; NoPCA swaps the similarity matrix instead
VARIANTS: dict[str, dict[str, float]] = {
    "Full": {},
    "NoCapacity": {"capacity": 0.0},
    "NoSimilarity": {"similarity": 0.0},
    "NoMarginWeight": {"margin": 0.0},
    "NoLegacyInvRisk": {"inventory": 0.0, "defect": 0.0, "risk": 0.0},
    "NoSkuLimit": {"cardinality": 0.0, "sku_limit": 0.0},
    "NoTop5": {"top5": 0.0},
    "NoPCA": {},
}

METRICS = (
    ("total_profit", "Total Profit", lambda r: r.net_profit),
    ("total_units", "Total Units", lambda r: r.total_units),
    ("distinct_skus", "Distinct SKUs", lambda r: r.distinct_skus),
    ("capacity_violations", "Cap. Violations", lambda r: r.capacity_violations),
    ("capacity_excess", "Cap. Excess", lambda r: r.capacity_excess),
    ("redundant_pairs", "Redundant Pairs", lambda r: r.redundant_pairs),
    ("avg_redundancy", "Avg. Redundancy", lambda r: r.redundancy_score),
)

SAMPLERS = {"sa": solve_sa, "sqa": solve_sqa}


@dataclass
class AblationCell:
    variant: str
    repeat: int
    seed: int
    report: KpiReport | None
    best_energy: float | None
    error: str | None = None


@dataclass
class AblationSummary:
    sampler: str
    repeats: int
    base_seed: int
    mean: dict[str, dict[str, float]] = field(default_factory=dict)
    std: dict[str, dict[str, float]] = field(default_factory=dict)
    cells: list[AblationCell] = field(default_factory=list)

    @property
    def variants(self) -> list[str]:
        return list(self.mean)

    def rows(self) -> list[list]:
        header = ["Experiment"]
        for key, _, _ in METRICS:
            header += [f"{key}_mean", f"{key}_std"]
        out = [header]
        for name in self.mean:
            row: list = [name]
            for key, _, _ in METRICS:
                row += [self.mean[name][key], self.std[name][key]]
            out.append(row)
        return out


def run_ablation(
    instance: ProblemInstance,
    norm_total_cost: Sequence[float],
    variants: Sequence[str] | None = None,
    repeats: int = 5,
    base_seed: int = 0,
    sampler: str = "sa",
    anneal: AnnealConfig = AnnealConfig(num_reads=100),
    no_pca_similarity: np.ndarray | None = None,
    solve: Callable | None = None,
) -> AblationSummary:
    """Solve and audit every (variant, repeat) cell; repeat ``r`` uses seed ``base_seed + r``.

    Means and sample standard deviations (ddof=1) are taken over the
    successful cells of each variant. ``NoPCA`` needs ``no_pca_similarity``,
    the kernel evaluated on the z-scored inputs directly.
    """
    if repeats < 2:
        raise ValueError("repeats must be >= 2")
    names = list(variants) if variants is not None else list(VARIANTS)
    unknown = [v for v in names if v not in VARIANTS]
    if unknown:
        raise ValueError(f"unknown ablation variants: {unknown}")
    if "NoPCA" in names and no_pca_similarity is None:
        raise ValueError("NoPCA needs the similarity computed without PCA")
    solve = solve or SAMPLERS[sampler]

    summary = AblationSummary(sampler=sampler, repeats=repeats, base_seed=base_seed)
    for name in names:
        inst = instance.with_weights(**VARIANTS[name]) if VARIANTS[name] else instance
        if name == "NoPCA":
            inst = ProblemInstance(**{**inst.__dict__, "similarity": no_pca_similarity})
        model = build_qubo(inst)
        reports = []
        for r in range(repeats):
            seed = base_seed + r
            try:
                samples = solve(model, _with_seed(anneal, seed))
                # audit against the unmodified instance so capacity and top-5 stay meaningful
                report = compute_kpis(decode(samples.best_bits, inst), _audit_view(instance, inst), norm_total_cost)
                summary.cells.append(AblationCell(name, r, seed, report, samples.best_energy))
                reports.append(report)
            except Exception as exc:  # recorded per cell
                logger.exception("ablation cell %s/%d failed", name, r)
                summary.cells.append(AblationCell(name, r, seed, None, None, repr(exc)))
        summary.mean[name], summary.std[name] = _aggregate(reports)
    return summary


def _with_seed(config: AnnealConfig, seed: int) -> AnnealConfig:
    return AnnealConfig(**{**config.to_dict(), "seed": seed})


def _audit_view(original: ProblemInstance, variant: ProblemInstance) -> ProblemInstance:
    # similarity for redundancy comes from the variant (NoPCA reports its own kernel)
    return ProblemInstance(**{**original.__dict__, "similarity": variant.similarity})


def _aggregate(reports: list[KpiReport]) -> tuple[dict[str, float], dict[str, float]]:
    mean, std = {}, {}
    for key, _, get in METRICS:
        vals = np.array([get(r) for r in reports], dtype=float)
        mean[key] = float(vals.mean()) if vals.size else float("nan")
        std[key] = float(vals.std(ddof=1)) if vals.size > 1 else float("nan")
    return mean, std


def write_summary_csv(summary: AblationSummary, path: str | Path, header_lines: Sequence[str] = ()) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        for row in summary.rows():
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def write_cells_json(summary: AblationSummary, path: str | Path, extra: dict | None = None) -> None:
    payload = {
        "sampler": summary.sampler,
        "repeats": summary.repeats,
        "base_seed": summary.base_seed,
        "cells": [
            {
                "variant": c.variant,
                "repeat": c.repeat,
                "seed": c.seed,
                "best_energy": c.best_energy,
                "kpis": c.report.to_dict() if c.report else None,
                "error": c.error,
            }
            for c in summary.cells
        ],
    }
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")

"""End-to-end assembly helpers: catalog -> features -> similarity -> instance."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from skuqubo.data_pipeline import (
    SkuFeatures,
    SkuRecord,
    SynthesisSpec,
    engineer_features,
    generate_base_catalog,
    pca_input_matrix,
    pca_reduce,
    synthesize_catalog,
)
from skuqubo.qubo_builder import ProblemInstance, Weights, instance_from_features
from skuqubo.quantum_kernel import SimilarityMatrix, similarity_matrix

PAPER_CAPACITY = 28392.0


def compute_similarity(
    features: list[SkuFeatures],
    method: str = "quantum_fidelity",
    use_pca: bool = True,
    angle_scale: float = 1.0,
    ratio: str = "margin_over_cost",
    dims: int = 5,
) -> SimilarityMatrix:
    """Similarity over PCA scores of the z-scored kernel inputs (or the z-scores themselves)."""
    z = pca_input_matrix(features, ratio)
    x = pca_reduce(z, dims).values if use_pca else z
    return similarity_matrix(x, method=method, angle_scale=angle_scale)


@dataclass(frozen=True)
class DeskScenario:
    features: list[SkuFeatures]
    instance: ProblemInstance
    similarity: SimilarityMatrix


def sample_records(records: Sequence[SkuRecord], n: int, seed: int) -> list[SkuRecord]:
    """``n`` rows drawn without replacement, kept in catalog order."""
    if not 0 < n <= len(records):
        raise ValueError(f"cannot sample {n} rows from {len(records)}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, n]))
    pick = np.sort(rng.choice(len(records), size=n, replace=False))
    return [records[k] for k in pick]


def desk_features(n_skus: int = 40, seed: int = 0) -> list[SkuFeatures]:
    """``n_skus`` rows sampled from a synthesized 500-SKU catalog."""
    base = generate_base_catalog(100, seed=seed)
    catalog = synthesize_catalog(base, SynthesisSpec(target_count=500, seed=seed))
    return engineer_features(sample_records(catalog, n_skus, seed))


def desk_scenario(
    n_skus: int = 40,
    periods: int = 8,
    sku_target: int = 12,
    capacity_scale: float = 0.2,
    seed: int = 0,
    method: str = "quantum_fidelity",
    use_pca: bool = True,
    weights: Weights = Weights(),
) -> DeskScenario:
    """Small instance with the reference capacity scaled by ``capacity_scale``.

    The default ``C = 0.2 * 28392`` holds roughly ten average SKUs, below the
    target ``K = 12``, so capacity binds as it does at full size. The slack
    register is sized so every residual in ``[0, C]`` is representable.
    """
    feats = desk_features(n_skus, seed)
    sim = compute_similarity(feats, method=method, use_pca=use_pca)
    capacity = float(round(PAPER_CAPACITY * capacity_scale))
    bits = max(1, math.ceil(math.log2(capacity + 1)))
    inst = instance_from_features(
        feats, sim, periods=periods, slack_bits=bits, capacity=capacity, sku_target=sku_target, weights=weights
    )
    return DeskScenario(feats, inst, sim)

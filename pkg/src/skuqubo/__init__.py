"""Multi-period SKU allocation as a QUBO.

The package chains catalog features, a fidelity (or cosine) similarity
kernel, a slack-bit QUBO, annealing and metaheuristic solvers, feasibility
audits and an ablation harness.
"""

from skuqubo.data_pipeline import (
    SkuFeatures,
    SkuRecord,
    SynthesisSpec,
    engineer_features,
    generate_base_catalog,
    ingest_catalog,
    minmax_normalize,
    pca_reduce,
    synthesize_catalog,
    zscore_normalize,
)
from skuqubo.qubo_builder import ProblemInstance, QuboModel, build_qubo, decode, energy

__version__ = "0.1.0"

__all__ = [
    "ProblemInstance",
    "QuboModel",
    "SkuFeatures",
    "SkuRecord",
    "SynthesisSpec",
    "build_qubo",
    "decode",
    "energy",
    "engineer_features",
    "generate_base_catalog",
    "ingest_catalog",
    "minmax_normalize",
    "pca_reduce",
    "synthesize_catalog",
    "zscore_normalize",
]

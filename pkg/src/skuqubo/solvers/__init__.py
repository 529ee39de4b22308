from skuqubo.solvers.anneal import AnnealConfig, SampleSet, solve_sa, solve_sqa
from skuqubo.solvers.exhaustive import ExhaustiveResult, all_energies, solve_exhaustive
from skuqubo.solvers.metaheuristics import (
    InfeasibleInstanceError,
    MetaheuristicConfig,
    MetaheuristicResult,
    classical_fitness,
    repair_capacity,
    solve_aco,
    solve_ga,
    solve_pso,
)

__all__ = [
    "AnnealConfig",
    "ExhaustiveResult",
    "InfeasibleInstanceError",
    "MetaheuristicConfig",
    "MetaheuristicResult",
    "SampleSet",
    "all_energies",
    "classical_fitness",
    "repair_capacity",
    "solve_aco",
    "solve_exhaustive",
    "solve_ga",
    "solve_pso",
    "solve_sa",
    "solve_sqa",
]

"""Binary PSO, genetic algorithm and ant colony search on the penalized allocation objective.

These solvers work on selection bits only (``T * N`` of them, period-major)
and score candidates with :func:`classical_fitness`: a 6th-order capacity
overshoot penalty replaces the slack encoding of the QUBO path. Every solver
forces the top-5 SKUs into every period.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from skuqubo.qubo_builder import AllocationPlan, ProblemInstance


class InfeasibleInstanceError(RuntimeError):
    """The top-5 SKUs alone exceed the per-period capacity."""


@dataclass(frozen=True)
class ClassicalWeights:
    similarity: float = 3.0
    margin: float = 0.02
    risk: float = 0.02
    inventory: float = 50.0
    defect: float = 50.0
    cardinality: float = 1000.0
    sku_excess: float = 5000.0
    capacity: float = 5000.0
    capacity_scale: float = 1e7
    top5: float | None = None


@dataclass(frozen=True)
class MetaheuristicConfig:
    pop_size: int = 50
    iterations: int = 100
    inertia: float = 0.7
    cognitive: float = 1.5
    social: float = 1.5
    crossover_rate: float = 0.8
    mutation_rate: float = 0.1
    alpha: float = 1.0
    beta: float = 2.0
    evaporation: float = 0.5
    deposit: float = 100.0
    pheromone_floor: float = 1e-6
    weights: ClassicalWeights = field(default_factory=ClassicalWeights)
    seed: int = 0

    def __post_init__(self):
        for name in ("crossover_rate", "mutation_rate", "evaporation"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.pop_size < 2 or self.iterations < 1:
            raise ValueError("pop_size >= 2 and iterations >= 1 are required")
        if self.deposit <= 0 or self.pheromone_floor <= 0:
            raise ValueError("deposit and pheromone_floor must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MetaheuristicResult:
    bits: np.ndarray  # (T * N,) int8
    fitness: float
    solver: str
    history: tuple[float, ...] = ()

    def plan(self, instance: ProblemInstance) -> AllocationPlan:
        return AllocationPlan.from_matrix(self.bits.reshape(instance.periods, instance.n_skus))


def _top5_weight(instance: ProblemInstance, weights: ClassicalWeights) -> float:
    if weights.top5 is not None:
        return weights.top5
    return 1e9 * float(np.max(np.abs(instance.profit)))


def classical_fitness(bits, instance: ProblemInstance, config: MetaheuristicConfig = MetaheuristicConfig(),
                      variant: str = "ga") -> float | np.ndarray:
    """Penalized allocation objective (lower is better).

    ``variant="ga"`` (also used by ACO) scores the SKU count as
    ``lam_k (n^2 - 2Kn) + lam_sku max(0, n-K)^2``, the capacity overshoot as
    ``lam_c * capacity_scale * max(0, load-C)^6`` and each missing top-5 slot
    with ``+lam_top5``. ``variant="pso"`` uses ``lam_k (n-K)^2``, an unscaled
    6th-order capacity term and a ``-lam_top5`` reward per selected top-5 slot.

    ``bits`` may be one vector of length ``T*N`` or a ``(P, T*N)`` batch.
    """
    if variant not in ("ga", "pso"):
        raise ValueError(f"unknown fitness variant {variant!r}")
    x = np.asarray(bits, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    t, n = instance.periods, instance.n_skus
    if x.shape[1] != t * n:
        raise ValueError(f"expected {t * n} selection bits, got {x.shape[1]}")
    x = x.reshape(-1, t, n)
    w = config.weights
    d = instance.demand
    k = float(instance.sku_target)
    s_off = instance.similarity - np.diag(np.diag(instance.similarity))

    linear = (
        -w.margin * instance.profit
        + w.risk * instance.unified_risk * d
        + w.inventory * instance.inventory_risk
        + w.defect * instance.defect_risk
    )
    total = np.einsum("ptn,n->p", x, linear)
    total += 0.5 * w.similarity * np.einsum("ptn,nm,ptm->p", x, s_off, x)
    count = x.sum(axis=2)
    excess = np.maximum(0.0, x @ d - instance.capacity)
    top_sel = x[:, :, instance.top5].sum(axis=(1, 2))
    lam_top5 = _top5_weight(instance, w)
    if variant == "ga":
        total += w.cardinality * (count**2 - 2.0 * k * count).sum(axis=1)
        total += w.sku_excess * (np.maximum(0.0, count - k) ** 2).sum(axis=1)
        total += w.capacity * w.capacity_scale * (excess**6).sum(axis=1)
        total += lam_top5 * (t * instance.top5.size - top_sel)
    else:
        total += w.cardinality * ((count - k) ** 2).sum(axis=1)
        total += w.capacity * (excess**6).sum(axis=1)
        total -= lam_top5 * top_sel
    return float(total[0]) if single else total


def _top_mask(instance: ProblemInstance) -> np.ndarray:
    mask = np.zeros((instance.periods, instance.n_skus), dtype=bool)
    mask[:, instance.top5] = True
    return mask.ravel()


def repair_capacity(bits, instance: ProblemInstance) -> np.ndarray:
    """Drop the highest-demand non-top-5 SKU of each overloaded period until it fits.

    Ties in demand go to the lower SKU index. Raises
    :class:`InfeasibleInstanceError` when only top-5 SKUs remain and the
    period is still over capacity.
    """
    t, n = instance.periods, instance.n_skus
    x = np.array(bits, dtype=np.int8).reshape(t, n)
    protected = np.zeros(n, dtype=bool)
    protected[instance.top5] = True
    d = instance.demand
    for p in range(t):
        load = float(d @ x[p])
        if load <= instance.capacity:
            continue
        removable = [i for i in np.flatnonzero(x[p]) if not protected[i]]
        removable.sort(key=lambda i: (-d[i], i))
        for i in removable:
            if load <= instance.capacity:
                break
            x[p, i] = 0
            load -= d[i]
        if load > instance.capacity:
            raise InfeasibleInstanceError(
                f"period {p}: protected SKUs need {load:g} units, capacity is {instance.capacity:g}"
            )
    return x.ravel()


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.asarray(z, dtype=float)))


def pso_velocity(v, x, pbest, gbest, inertia, cognitive, social, r1, r2):
    return inertia * v + cognitive * r1 * (pbest - x) + social * r2 * (gbest - x)


def solve_pso(instance: ProblemInstance, config: MetaheuristicConfig = MetaheuristicConfig()) -> MetaheuristicResult:
    """Sigmoid-binarized particle swarm.

    The clipped continuous position is tracked alongside the velocity but the
    bit itself is drawn as ``sigmoid(v) > u``. No capacity repair is applied.
    """
    rng = np.random.default_rng(config.seed)
    dim = instance.periods * instance.n_skus
    top = _top_mask(instance)
    fit = lambda pop: classical_fitness(pop, instance, config, variant="pso")  # noqa: E731

    x = rng.integers(0, 2, size=(config.pop_size, dim)).astype(float)
    x[:, top] = 1.0
    position = x.copy()
    v = np.zeros_like(x)
    f = fit(x)
    pbest, pbest_f = x.copy(), f.copy()
    g = int(np.argmin(f))
    gbest, gbest_f = x[g].copy(), float(f[g])
    history = [gbest_f]
    for _ in range(config.iterations):
        r1 = rng.random(x.shape)
        r2 = rng.random(x.shape)
        v = pso_velocity(v, x, pbest, gbest, config.inertia, config.cognitive, config.social, r1, r2)
        position = np.clip(position + v, 0.0, 1.0)
        x = (sigmoid(v) > rng.random(x.shape)).astype(float)
        x[:, top] = 1.0
        f = fit(x)
        better = f < pbest_f
        pbest[better], pbest_f[better] = x[better], f[better]
        g = int(np.argmin(pbest_f))
        if pbest_f[g] < gbest_f:
            gbest, gbest_f = pbest[g].copy(), float(pbest_f[g])
        history.append(gbest_f)
    bits = gbest.astype(np.int8)
    return MetaheuristicResult(bits, classical_fitness(bits, instance, config, "pso"), "pso", tuple(history))


def single_point_crossover(a: np.ndarray, b: np.ndarray, point: int) -> np.ndarray:
    return np.concatenate([a[:point], b[point:]])


def solve_ga(instance: ProblemInstance, config: MetaheuristicConfig = MetaheuristicConfig()) -> MetaheuristicResult:
    """Elitist GA: keep the best half, refill by single-point crossover and bit-flip mutation.

    Top-5 positions are reset after crossover and never mutate. The best
    individual is capacity-repaired at the end.
    """
    rng = np.random.default_rng(config.seed)
    dim = instance.periods * instance.n_skus
    top = _top_mask(instance)
    pop = rng.integers(0, 2, size=(config.pop_size, dim)).astype(np.int8)
    pop[:, top] = 1
    n_parents = config.pop_size // 2
    history = []
    for _ in range(config.iterations):
        f = classical_fitness(pop, instance, config)
        order = np.argsort(f, kind="stable")
        history.append(float(f[order[0]]))
        parents = pop[order[:n_parents]]
        children = np.empty((config.pop_size - n_parents, dim), dtype=np.int8)
        for c in range(children.shape[0]):
            a = parents[rng.integers(n_parents)]
            b = parents[rng.integers(n_parents)]
            if rng.random() < config.crossover_rate and dim > 1:
                child = single_point_crossover(a, b, int(rng.integers(1, dim)))
            else:
                child = a.copy()
            child[top] = 1
            flip = (rng.random(dim) < config.mutation_rate) & ~top
            child[flip] ^= 1
            children[c] = child
        pop = np.vstack([parents, children])
    f = classical_fitness(pop, instance, config)
    best = repair_capacity(pop[int(np.argmin(f))], instance)
    return MetaheuristicResult(best, classical_fitness(best, instance, config), "ga", tuple(history))


def selection_probability(tau0, tau1, eta, alpha, beta):
    num = tau1**alpha * eta**beta
    return num / (tau0**alpha + num)


def pheromone_update(tau: np.ndarray, best_bits: np.ndarray, best_fitness: float, rho: float, q: float,
                     floor: float = 1e-6) -> np.ndarray:
    """``tau <- (1 - rho) tau + q / (1 + F_best)`` on the choices of the iteration best."""
    out = (1.0 - rho) * tau
    out[np.arange(best_bits.size), best_bits.astype(np.int64)] += q / (1.0 + best_fitness)
    return np.maximum(out, floor)


def solve_aco(instance: ProblemInstance, config: MetaheuristicConfig = MetaheuristicConfig()) -> MetaheuristicResult:
    """Binary ant colony with a per-variable two-choice pheromone table.

    Heuristic desirability is ``U_i D_i / max(U D)`` clipped at zero. Each ant
    is capacity-repaired before scoring, and the iteration best deposits.
    """
    rng = np.random.default_rng(config.seed)
    dim = instance.periods * instance.n_skus
    top = _top_mask(instance)
    profit = instance.profit
    peak = profit.max()
    eta_sku = np.clip(profit / peak, 0.0, None) if peak > 0 else np.zeros_like(profit)
    eta = np.tile(eta_sku, instance.periods)
    tau = np.ones((dim, 2))
    best_bits, best_f = None, np.inf
    history = []
    for _ in range(config.iterations):
        p1 = selection_probability(tau[:, 0], tau[:, 1], eta, config.alpha, config.beta)
        ants = (rng.random((config.pop_size, dim)) < p1).astype(np.int8)
        ants[:, top] = 1
        ants = np.array([repair_capacity(a, instance) for a in ants])
        f = classical_fitness(ants, instance, config)
        k = int(np.argmin(f))
        tau = pheromone_update(tau, ants[k], float(f[k]), config.evaporation, config.deposit, config.pheromone_floor)
        if f[k] < best_f:
            best_bits, best_f = ants[k].copy(), float(f[k])
        history.append(best_f)
    best = repair_capacity(best_bits, instance)
    return MetaheuristicResult(best, classical_fitness(best, instance, config), "aco", tuple(history))

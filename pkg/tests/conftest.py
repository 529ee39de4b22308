import numpy as np
import pytest

from skuqubo.qubo_builder import ProblemInstance, Weights


def random_instance(seed: int, n: int = 8, periods: int = 2, slack_bits: int = 3, **kw) -> ProblemInstance:
    """Small instance with integer demands so slack residuals are exact."""
    rng = np.random.default_rng(seed)
    s = rng.random((n, n))
    s = (s + s.T) / 2
    np.fill_diagonal(s, 1.0)
    demand = rng.integers(1, 5, size=n).astype(float)
    defaults = dict(
        periods=periods,
        slack_bits=slack_bits,
        capacity=float(rng.integers(3, 2**slack_bits + 4)),
        sku_target=int(rng.integers(1, n)),
        weights=Weights(
            margin=rng.uniform(0, 1), similarity=rng.uniform(0, 2), risk=rng.uniform(0, 1),
            inventory=rng.uniform(0, 2), defect=rng.uniform(0, 2), capacity=rng.uniform(1, 5),
            cardinality=rng.uniform(0, 3), sku_limit=rng.uniform(0, 3), top5=rng.uniform(0, 10),
        ),
    )
    defaults.update(kw)
    return ProblemInstance(
        unit_margin=rng.uniform(-2, 10, size=n),
        demand=demand,
        unified_risk=rng.random(n),
        inventory_risk=rng.random(n),
        defect_risk=rng.random(n),
        similarity=s,
        **defaults,
    )


def independent_fitness(bits, inst, cfg, variant):
    """Loop-by-loop restatement of the classical fitness."""
    w = cfg.weights
    x = np.asarray(bits).reshape(inst.periods, inst.n_skus)
    lam5 = w.top5 if w.top5 is not None else 1e9 * max(abs(inst.unit_margin * inst.demand))
    top = set(inst.top5.tolist())
    total = 0.0
    for t in range(inst.periods):
        sel = [i for i in range(inst.n_skus) if x[t, i]]
        for i in sel:
            total += (-w.margin * inst.unit_margin[i] * inst.demand[i] + w.risk * inst.unified_risk[i] * inst.demand[i]
                      + w.inventory * inst.inventory_risk[i] + w.defect * inst.defect_risk[i])
        for a in range(len(sel)):
            for b in range(a + 1, len(sel)):
                total += w.similarity * inst.similarity[sel[a], sel[b]]
        n, k = len(sel), inst.sku_target
        excess = max(0.0, sum(inst.demand[i] for i in sel) - inst.capacity)
        chosen_top = len(top & set(sel))
        if variant == "ga":
            total += w.cardinality * (n * n - 2 * k * n) + w.sku_excess * max(0, n - k) ** 2
            total += w.capacity * w.capacity_scale * excess**6 + lam5 * (len(top) - chosen_top)
        else:
            total += w.cardinality * (n - k) ** 2 + w.capacity * excess**6 - lam5 * chosen_top
    return total


# acceptance results, printed in the terminal summary
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for key in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[key])


@pytest.fixture
def small_instance():
    return random_instance(0)


@pytest.fixture(scope="session")
def desk():
    from skuqubo.scenarios import desk_scenario

    return desk_scenario()

"""Simulated annealing and path-integral simulated quantum annealing for QUBOs.

Both samplers keep a local field per variable, ``h_u + sum_v q_uv z_v``, so a
single-bit-flip energy change costs O(1) and an accepted flip O(degree).
Every read draws from its own generator keyed by ``(seed, read_index)``;
reads can therefore be split across workers without changing the result.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from numba import njit

from skuqubo.qubo_builder import QuboModel, energies


@dataclass(frozen=True)
class AnnealConfig:
    num_reads: int = 500
    # full sweeps (n_vars flip attempts each); None -> 50 for SA, 20 for SQA
    num_sweeps: int | None = None
    # None -> auto_beta_range(model)
    beta_range: tuple[float, float] | None = None
    # SQA: ramp the classical inverse temperature like SA instead of fixing it
    sqa_anneal_beta: bool = True
    # fixed-beta SQA divides the model by this; None -> energy_scale(model)
    sqa_energy_unit: float | None = None
    sqa_beta: float = 10.0
    trotter_slices: int = 8
    gamma_range: tuple[float, float] = (3.0, 0.05)
    seed: int = 0

    def __post_init__(self):
        if self.num_reads < 1:
            raise ValueError("num_reads must be >= 1")
        if self.num_sweeps is not None and self.num_sweeps < 1:
            raise ValueError("num_sweeps must be >= 1")
        if self.beta_range is not None and not 0 < self.beta_range[0] < self.beta_range[1]:
            raise ValueError("beta_range must satisfy 0 < start < end")
        if self.sqa_energy_unit is not None and self.sqa_energy_unit <= 0:
            raise ValueError("sqa_energy_unit must be positive")
        g0, g1 = self.gamma_range
        if not g0 > g1 > 0:
            raise ValueError("gamma_range must satisfy start > end > 0")
        if self.trotter_slices < 1 or self.sqa_beta <= 0:
            raise ValueError("trotter_slices >= 1 and sqa_beta > 0 are required")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SampleSet:
    samples: np.ndarray  # (reads, n_vars) int8
    energies: np.ndarray  # (reads,)
    solver: str
    config: AnnealConfig

    @property
    def best_index(self) -> int:
        return int(np.argmin(self.energies))

    @property
    def best_bits(self) -> np.ndarray:
        return self.samples[self.best_index]

    @property
    def best_energy(self) -> float:
        return float(self.energies[self.best_index])

    def __len__(self) -> int:
        return self.energies.size


def adjacency(model: QuboModel) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Symmetric CSR of the off-diagonal couplings plus the linear vector."""
    off = model.rows != model.cols
    r = np.concatenate([model.rows[off], model.cols[off]])
    c = np.concatenate([model.cols[off], model.rows[off]])
    q = np.concatenate([model.values[off], model.values[off]])
    order = np.lexsort((c, r))
    r, c, q = r[order], c[order], q[order]
    indptr = np.zeros(model.n_vars + 1, dtype=np.int64)
    np.add.at(indptr, r + 1, 1)
    return np.cumsum(indptr), c.astype(np.int64), q, model.linear()


@njit(cache=True)
def _init_field(indptr, indices, data, h, x):
    n = x.size
    field = h.copy()
    for u in range(n):
        acc = 0.0
        for k in range(indptr[u], indptr[u + 1]):
            if x[indices[k]]:
                acc += data[k]
        field[u] += acc
    return field


@njit(cache=True)
def _sa_read(indptr, indices, data, h, x, betas, uniforms):
    n = x.size
    field = _init_field(indptr, indices, data, h, x)
    pos = 0
    for sweep in range(betas.size):
        beta = betas[sweep]
        for u in range(n):
            de = field[u] if x[u] == 0 else -field[u]
            accept = de <= 0.0
            if not accept:
                arg = beta * de
                accept = arg < 700.0 and uniforms[pos] < math.exp(-arg)
            pos += 1
            if accept:
                x[u] = 1 - x[u]
                sign = 1.0 if x[u] == 1 else -1.0
                for k in range(indptr[u], indptr[u + 1]):
                    field[indices[k]] += sign * data[k]
    return x


@njit(cache=True)
def _sqa_read(indptr, indices, data, h, xs, betas, couplings, uniforms):
    # betas: classical inverse temperature per sweep; couplings: beta * J_perp per sweep
    m, n = xs.shape
    fields = np.empty((m, n))
    for k in range(m):
        fields[k] = _init_field(indptr, indices, data, h, xs[k])
    pos = 0
    for sweep in range(betas.size):
        beta = betas[sweep]
        bj = couplings[sweep]
        for k in range(m):
            kp = (k + 1) % m
            km = (k - 1 + m) % m
            for u in range(n):
                de = fields[k, u] if xs[k, u] == 0 else -fields[k, u]
                sigma = 2.0 * xs[k, u] - 1.0
                neigh = (2.0 * xs[km, u] - 1.0) + (2.0 * xs[kp, u] - 1.0)
                arg = beta * de / m + 2.0 * bj * sigma * neigh
                accept = arg <= 0.0
                if not accept:
                    accept = arg < 700.0 and uniforms[pos] < math.exp(-arg)
                pos += 1
                if accept:
                    xs[k, u] = 1 - xs[k, u]
                    sign = 1.0 if xs[k, u] == 1 else -1.0
                    for e in range(indptr[u], indptr[u + 1]):
                        fields[k, indices[e]] += sign * data[e]
    return xs


def replica_coupling(beta: float, gamma: np.ndarray, slices: int) -> np.ndarray:
    """``J_perp(gamma) = -ln(tanh(beta * gamma / M)) / (2 * beta)``; zero for a single slice."""
    gamma = np.asarray(gamma, dtype=float)
    if slices == 1:
        return np.zeros_like(gamma)
    return -np.log(np.tanh(beta * gamma / slices)) / (2.0 * beta)


def energy_scale(model: QuboModel) -> float:
    """Median over variables of ``|h_u| + sum_v |q_uv|``, the typical size of a flip."""
    mag = np.abs(model.linear())
    off = model.rows != model.cols
    np.add.at(mag, model.rows[off], np.abs(model.values[off]))
    np.add.at(mag, model.cols[off], np.abs(model.values[off]))
    positive = mag[mag > 0]
    return float(np.median(positive)) if positive.size else 1.0


def auto_beta_range(model: QuboModel) -> tuple[float, float]:
    """Hot end accepts a typical flip half the time.

    The cold end is at least 50 and high enough to reject a flip of the
    smallest coefficient 99% of the time.
    """
    nonzero = np.abs(model.values[model.values != 0])
    smallest = float(nonzero.min()) if nonzero.size else 1.0
    end = max(50.0, math.log(100.0) / smallest)
    start = min(math.log(2.0) / energy_scale(model), end / 10.0)
    return start, end


def beta_schedule(model: QuboModel, config: AnnealConfig, sweeps: int) -> np.ndarray:
    return geometric(*(config.beta_range or auto_beta_range(model)), sweeps)


def read_rng(seed: int, read_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, read_index]))


def geometric(start: float, end: float, steps: int) -> np.ndarray:
    if steps == 1:
        return np.array([end], dtype=float)
    return start * (end / start) ** (np.arange(steps) / (steps - 1))


def solve_sa(model: QuboModel, config: AnnealConfig = AnnealConfig()) -> SampleSet:
    """Restarted single-bit-flip Metropolis over a geometric inverse-temperature ramp."""
    if model.n_vars == 0:
        raise ValueError("empty model")
    indptr, indices, data, h = adjacency(model)
    sweeps = config.num_sweeps or 50
    betas = beta_schedule(model, config, sweeps)
    n = model.n_vars
    out = np.empty((config.num_reads, n), dtype=np.int8)
    for r in range(config.num_reads):
        rng = read_rng(config.seed, r)
        x = rng.integers(0, 2, size=n).astype(np.int8)
        uniforms = rng.random(sweeps * n)
        out[r] = _sa_read(indptr, indices, data, h, x, betas, uniforms)
    return SampleSet(out, energies(model, out), "sa", config)


def solve_sqa(model: QuboModel, config: AnnealConfig = AnnealConfig()) -> SampleSet:
    """Path-integral Monte Carlo with ``trotter_slices`` replicas.

    Replicas share the classical energy (scaled by 1/M) and couple
    ferromagnetically along the imaginary-time ring with
    :func:`replica_coupling` at ``sqa_beta`` while ``gamma`` decays
    geometrically. With ``sqa_anneal_beta`` the classical part also follows
    the SA inverse-temperature ramp, which is what lets the sampler resolve
    energy scales many decades apart; otherwise it sits at ``sqa_beta`` on the
    model divided by ``sqa_energy_unit``. Each read returns its
    lowest-energy replica.
    """
    if model.n_vars == 0:
        raise ValueError("empty model")
    indptr, indices, data, h = adjacency(model)
    sweeps = config.num_sweeps or 20
    gammas = geometric(*config.gamma_range, sweeps)
    m, n = config.trotter_slices, model.n_vars
    couplings = config.sqa_beta * replica_coupling(config.sqa_beta, gammas, m)
    if config.sqa_anneal_beta:
        betas = beta_schedule(model, config, sweeps)
    else:
        unit = config.sqa_energy_unit or energy_scale(model)
        data, h = data / unit, h / unit
        betas = np.full(sweeps, config.sqa_beta)
    out = np.empty((config.num_reads, n), dtype=np.int8)
    for r in range(config.num_reads):
        rng = read_rng(config.seed, r)
        xs = rng.integers(0, 2, size=(m, n)).astype(np.int8)
        uniforms = rng.random(sweeps * m * n)
        xs = _sqa_read(indptr, indices, data, h, xs, betas, couplings, uniforms)
        out[r] = xs[int(np.argmin(energies(model, xs)))]
    return SampleSet(out, energies(model, out), "sqa", config)

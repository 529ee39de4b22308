"""Multi-period SKU allocation QUBO with slack-bit capacity encoding.

Variables are laid out period by period: ``z = [x(0), s(0), x(1), s(1), ...]``
where ``x(t)`` holds N selection bits and ``s(t)`` holds B slack bits. Per
period the energy is

    - lam_m * sum U_i D_i x_i + lam_r * sum r_i D_i x_i
    + lam_inv * sum inv_i x_i + lam_def * sum def_i x_i
    - lam_top5 * sum_{i in top5} x_i
    + lam_s * sum_{i<j} S_ij x_i x_j
    + lam_c * (sum D_i x_i - C + sum 2^b s_b)^2
    + lam_k * (sum x_i - K)^2 + (lam_sku_limit / K) * sum x_i

and periods do not interact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

ZERO_TOL = 1e-12


@dataclass(frozen=True)
class Weights:
    margin: float = 0.02
    similarity: float = 1.0
    risk: float = 0.02
    inventory: float = 50.0
    defect: float = 50.0
    capacity: float = 5000.0
    cardinality: float = 1000.0
    sku_limit: float = 5000.0
    # None -> 1e9 * max |U_i D_i|
    top5: float | None = None

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None and (not math.isfinite(v) or v < 0):
                raise ValueError(f"weight {f.name} must be finite and non-negative, got {v}")


def top5_indices(profit: np.ndarray, k: int = 5) -> np.ndarray:
    """Indices of the ``k`` largest ``U_i D_i``; ties go to the lower index."""
    order = np.lexsort((np.arange(profit.size), -profit))
    return np.sort(order[: min(k, profit.size)])


@dataclass(frozen=True)
class ProblemInstance:
    unit_margin: np.ndarray
    demand: np.ndarray
    unified_risk: np.ndarray
    inventory_risk: np.ndarray
    defect_risk: np.ndarray
    similarity: np.ndarray
    periods: int = 8
    slack_bits: int = 13
    capacity: float = 28392.0
    sku_target: int = 50
    weights: Weights = field(default_factory=Weights)
    sku_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        n = len(self.demand)
        for name in ("unit_margin", "unified_risk", "inventory_risk", "defect_risk"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise ValueError(f"{name} has shape {arr.shape}, expected ({n},)")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "demand", np.asarray(self.demand, dtype=float))
        sim = np.asarray(self.similarity, dtype=float)
        if sim.shape != (n, n):
            raise ValueError(f"similarity is {sim.shape}, expected ({n}, {n})")
        object.__setattr__(self, "similarity", sim)
        if self.periods < 1 or self.slack_bits < 0 or self.sku_target < 1:
            raise ValueError("periods >= 1, slack_bits >= 0 and sku_target >= 1 are required")
        if self.sku_ids is not None and len(self.sku_ids) != n:
            raise ValueError("sku_ids length does not match demand")

    @property
    def n_skus(self) -> int:
        return len(self.demand)

    @property
    def block(self) -> int:
        return self.n_skus + self.slack_bits

    @property
    def n_vars(self) -> int:
        return self.periods * self.block

    @property
    def profit(self) -> np.ndarray:
        return self.unit_margin * self.demand

    @property
    def top5(self) -> np.ndarray:
        return top5_indices(self.profit)

    @property
    def top5_weight(self) -> float:
        if self.weights.top5 is not None:
            return self.weights.top5
        return 1e9 * float(np.max(np.abs(self.profit))) if self.n_skus else 0.0

    def with_weights(self, **changes) -> "ProblemInstance":
        return replace(self, weights=replace(self.weights, **changes))

    def decision_index(self, t: int, i: int) -> int:
        return t * self.block + i

    def slack_index(self, t: int, b: int) -> int:
        return t * self.block + self.n_skus + b


def instance_from_features(features, similarity, **kwargs) -> ProblemInstance:
    """Instance using raw margin/demand and min-max normalized risk columns."""
    sim = getattr(similarity, "values", similarity)
    return ProblemInstance(
        unit_margin=np.array([f.unit_margin for f in features]),
        demand=np.array([f.demand for f in features]),
        unified_risk=np.array([f.unified_risk for f in features]),
        inventory_risk=np.array([f.norm_inventory_risk for f in features]),
        defect_risk=np.array([f.norm_defect_risk for f in features]),
        similarity=sim,
        sku_ids=tuple(f.sku_id for f in features),
        **kwargs,
    )


@dataclass(frozen=True)
class QuboModel:
    """Upper-triangular sparse QUBO in canonical (row, col)-sorted COO form."""

    n_vars: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        vals = np.asarray(self.values, dtype=float)
        if not (rows.shape == cols.shape == vals.shape):
            raise ValueError("rows, cols and values must align")
        if rows.size and (np.any(rows > cols) or cols.max() >= self.n_vars or rows.min() < 0):
            raise ValueError("keys must satisfy 0 <= u <= v < n_vars")
        if not np.all(np.isfinite(vals)) or not math.isfinite(self.offset):
            raise ValueError("QUBO contains non-finite values")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_dict(cls, coefficients: dict[tuple[int, int], float], n_vars: int | None = None, offset: float = 0.0) -> "QuboModel":
        acc: dict[tuple[int, int], float] = {}
        for (u, v), q in coefficients.items():
            key = (u, v) if u <= v else (v, u)
            acc[key] = acc.get(key, 0.0) + q
        keys = sorted(k for k, q in acc.items() if abs(q) > ZERO_TOL)
        if n_vars is None:
            n_vars = 1 + max((v for _, v in keys), default=-1)
        return cls(
            n_vars,
            np.array([k[0] for k in keys], dtype=np.int64),
            np.array([k[1] for k in keys], dtype=np.int64),
            np.array([acc[k] for k in keys], dtype=float),
            offset,
        )

    def to_dict(self) -> dict[tuple[int, int], float]:
        return {(int(u), int(v)): float(q) for u, v, q in zip(self.rows, self.cols, self.values)}

    def __len__(self) -> int:
        return self.values.size

    def dense(self) -> np.ndarray:
        q = np.zeros((self.n_vars, self.n_vars))
        q[self.rows, self.cols] = self.values
        return q

    def linear(self) -> np.ndarray:
        h = np.zeros(self.n_vars)
        diag = self.rows == self.cols
        h[self.rows[diag]] = self.values[diag]
        return h


def _period_block(inst: ProblemInstance) -> np.ndarray:
    """Upper-triangular (N+B) x (N+B) coefficients shared by every period."""
    n, nb = inst.n_skus, inst.slack_bits
    w = inst.weights
    d = inst.demand
    c = float(inst.capacity)
    k = float(inst.sku_target)
    pw = 2.0 ** np.arange(nb)

    q = np.zeros((n + nb, n + nb))
    diag = (
        -w.margin * inst.unit_margin * d
        + w.risk * inst.unified_risk * d
        + w.inventory * inst.inventory_risk
        + w.defect * inst.defect_risk
        + (w.cardinality + w.sku_limit / k - 2.0 * w.cardinality * k)
        + w.capacity * (d**2 - 2.0 * c * d)
    )
    diag[inst.top5] -= inst.top5_weight
    xx = w.similarity * inst.similarity + 2.0 * w.capacity * np.outer(d, d) + 2.0 * w.cardinality
    q[:n, :n] = np.triu(xx, 1)
    q[np.arange(n), np.arange(n)] = diag
    q[:n, n:] = 2.0 * w.capacity * np.outer(d, pw)
    q[n:, n:] = np.triu(2.0 * w.capacity * np.outer(pw, pw), 1)
    q[np.arange(n, n + nb), np.arange(n, n + nb)] = w.capacity * (pw**2 - 2.0 * c * pw)
    return q


def build_qubo(instance: ProblemInstance) -> QuboModel:
    """Assemble the full QUBO; the constant part lives in ``offset``."""
    block = _period_block(instance)
    r, c = np.nonzero(np.abs(np.triu(block)) > ZERO_TOL)
    vals = block[r, c]
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite QUBO coefficient; check instance inputs")
    size, periods = instance.block, instance.periods
    shift = (np.arange(periods, dtype=np.int64) * size)[:, None]
    rows = (r[None, :] + shift).ravel()
    cols = (c[None, :] + shift).ravel()
    values = np.tile(vals, periods)
    w = instance.weights
    offset = periods * (w.capacity * float(instance.capacity) ** 2 + w.cardinality * float(instance.sku_target) ** 2)
    return QuboModel(instance.n_vars, rows, cols, values, offset)


def energy(model: QuboModel, bits: Sequence[int]) -> float:
    """``sum_{u<=v} q_uv z_u z_v + offset``."""
    z = np.asarray(bits, dtype=float)
    if z.shape != (model.n_vars,):
        raise ValueError(f"expected {model.n_vars} bits, got shape {z.shape}")
    return float(np.dot(model.values, z[model.rows] * z[model.cols]) + model.offset)


def energies(model: QuboModel, samples: np.ndarray) -> np.ndarray:
    """Vectorized :func:`energy` over rows of ``samples``."""
    z = np.asarray(samples, dtype=float)
    if z.ndim != 2 or z.shape[1] != model.n_vars:
        raise ValueError(f"samples must be (S, {model.n_vars})")
    return (z[:, model.rows] * z[:, model.cols]) @ model.values + model.offset


@dataclass(frozen=True)
class AllocationPlan:
    selections: tuple[tuple[int, ...], ...]
    slack: tuple[int, ...] | None = None

    @property
    def periods(self) -> int:
        return len(self.selections)

    @classmethod
    def from_matrix(cls, x: np.ndarray, slack: Sequence[int] | None = None) -> "AllocationPlan":
        x = np.asarray(x)
        return cls(tuple(tuple(int(i) for i in np.flatnonzero(row)) for row in x), None if slack is None else tuple(slack))

    def matrix(self, n_skus: int) -> np.ndarray:
        x = np.zeros((self.periods, n_skus), dtype=np.int8)
        for t, sel in enumerate(self.selections):
            x[t, list(sel)] = 1
        return x


def decode(bits: Sequence[int], instance: ProblemInstance) -> AllocationPlan:
    z = np.asarray(bits, dtype=np.int64)
    if z.shape != (instance.n_vars,):
        raise ValueError(f"expected {instance.n_vars} bits, got shape {z.shape}")
    blocks = z.reshape(instance.periods, instance.block)
    x = blocks[:, : instance.n_skus]
    s = blocks[:, instance.n_skus :]
    slack = [int(np.dot(row, 2 ** np.arange(instance.slack_bits, dtype=np.int64))) for row in s]
    return AllocationPlan.from_matrix(x, slack)


def hamiltonian(instance: ProblemInstance, bits: np.ndarray) -> np.ndarray:
    """Term-by-term energy evaluated straight from the objective, no QUBO expansion.

    ``bits`` is ``(n_vars,)`` or ``(S, n_vars)``; returns one energy per row.
    """
    z = np.atleast_2d(np.asarray(bits, dtype=float))
    n, nb, w = instance.n_skus, instance.slack_bits, instance.weights
    d = instance.demand
    top = np.zeros(n)
    top[instance.top5] = 1.0
    linear = (
        -w.margin * instance.unit_margin * d
        + w.risk * instance.unified_risk * d
        + w.inventory * instance.inventory_risk
        + w.defect * instance.defect_risk
        - instance.top5_weight * top
        + w.sku_limit / instance.sku_target
    )
    upper = np.triu(instance.similarity, 1)
    total = np.zeros(z.shape[0])
    for t in range(instance.periods):
        x = z[:, t * instance.block : t * instance.block + n]
        s = z[:, t * instance.block + n : (t + 1) * instance.block]
        slack = s @ (2.0 ** np.arange(nb))
        total += x @ linear
        total += w.similarity * np.einsum("si,ij,sj->s", x, upper, x)
        total += w.capacity * (x @ d - instance.capacity + slack) ** 2
        total += w.cardinality * (x.sum(axis=1) - instance.sku_target) ** 2
    return total


def write_qubo(model: QuboModel, path: str | Path, periods: int, n_skus: int, slack_bits: int,
               header_lines: Sequence[str] = (), fold_offset: bool = False) -> None:
    """Text export: ``#vars T N B``, ``#offset v``, then ``u v q`` lines.

    ``fold_offset`` adds the constant to key (0, 0) and writes ``#offset 0``,
    reproducing the single-dictionary convention of some reference code.
    """
    coeffs = model.to_dict()
    offset = model.offset
    if fold_offset:
        coeffs[(0, 0)] = coeffs.get((0, 0), 0.0) + offset
        offset = 0.0
    with Path(path).open("w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(f"#vars {periods} {n_skus} {slack_bits}\n")
        fh.write(f"#offset {offset:.17g}\n")
        for (u, v), q in sorted(coeffs.items()):
            fh.write(f"{u} {v} {q:.17g}\n")


def read_qubo(path: str | Path) -> tuple[QuboModel, tuple[int, int, int]]:
    dims = None
    offset = 0.0
    rows, cols, vals = [], [], []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#vars"):
                dims = tuple(int(v) for v in line.split()[1:4])
            elif line.startswith("#offset"):
                offset = float(line.split()[1])
            elif line.startswith("#") or not line.strip():
                continue
            else:
                u, v, q = line.split()
                rows.append(int(u))
                cols.append(int(v))
                vals.append(float(q))
    if dims is None:
        raise ValueError("QUBO file lacks a '#vars T N B' header")
    t, n, b = dims
    return QuboModel(t * (n + b), np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64), np.array(vals), offset), dims

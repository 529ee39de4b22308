"""Exhaustive enumeration for small QUBOs (the brute-force oracle)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from skuqubo.qubo_builder import QuboModel

MAX_EXHAUSTIVE_VARS = 26


@njit(cache=True)
def _all_energies(rows, cols, vals, n, offset):
    total = 1 << n
    out = np.empty(total)
    for s in range(total):
        acc = offset
        for k in range(vals.size):
            if (s >> rows[k]) & 1 and (s >> cols[k]) & 1:
                acc += vals[k]
        out[s] = acc
    return out


def state_bits(states: np.ndarray, n: int) -> np.ndarray:
    """Integer states to ``(len(states), n)`` bit rows; variable ``u`` is bit ``u``."""
    states = np.asarray(states, dtype=np.int64)
    return ((states[:, None] >> np.arange(n)) & 1).astype(np.int8)


def all_energies(model: QuboModel) -> np.ndarray:
    """Energy of every assignment, indexed by the integer whose bit ``u`` is ``z_u``."""
    if model.n_vars > MAX_EXHAUSTIVE_VARS:
        raise ValueError(f"{model.n_vars} variables is too many to enumerate (max {MAX_EXHAUSTIVE_VARS})")
    return _all_energies(model.rows, model.cols, model.values, model.n_vars, model.offset)


@dataclass(frozen=True)
class ExhaustiveResult:
    energy: float
    states: np.ndarray  # integer states achieving the minimum

    def bits(self, n: int) -> np.ndarray:
        return state_bits(self.states, n)


def argmin_set(values: np.ndarray, rel_tol: float = 1e-9) -> ExhaustiveResult:
    """Minimum and every index within ``rel_tol * max(1, |min|)`` of it."""
    lo = float(values.min())
    tol = rel_tol * max(1.0, abs(lo))
    return ExhaustiveResult(lo, np.flatnonzero(values <= lo + tol))


def solve_exhaustive(model: QuboModel, rel_tol: float = 1e-9) -> ExhaustiveResult:
    return argmin_set(all_energies(model), rel_tol)

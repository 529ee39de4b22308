"""Pairwise SKU similarity from a simulated RX-embedding fidelity circuit, or cosine.

Each coordinate of a PCA embedding drives one qubit. For a pair ``(x1, x2)``
the circuit applies ``RX(x1[k])`` then ``RX(-x2[k])`` on wire ``k`` and reads
the probability of the all-zero outcome.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

N_QUBITS = 5
BINARY_MAGIC = b"SIMM"


@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    @classmethod
    def zero(cls, n_qubits: int = N_QUBITS) -> "StateVector":
        amp = np.zeros(2**n_qubits, dtype=complex)
        amp[0] = 1.0
        return cls(n_qubits, amp)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.sqrt(self.probabilities().sum()))


def rx_matrix(angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2.0), np.sin(angle / 2.0)
    return np.array([[c, -1j * s], [-1j * s, c]])


def apply_rx(state: StateVector, qubit: int, angle: float) -> StateVector:
    """Apply ``RX(angle)`` on ``qubit`` (wire 0 is the most significant bit)."""
    if not 0 <= qubit < state.n_qubits:
        raise ValueError(f"qubit {qubit} out of range for {state.n_qubits} qubits")
    psi = state.amplitudes.reshape((2,) * state.n_qubits)
    psi = np.moveaxis(np.tensordot(rx_matrix(angle), psi, axes=([1], [qubit])), 0, qubit)
    return StateVector(state.n_qubits, psi.reshape(-1))


def pair_fidelity(x1: Sequence[float], x2: Sequence[float], n_qubits: int = N_QUBITS) -> float:
    """All-zero probability after ``RX(x1_k) RX(-x2_k)`` on every wire."""
    a = np.asarray(x1, dtype=float)
    b = np.asarray(x2, dtype=float)
    if a.shape != (n_qubits,) or b.shape != (n_qubits,):
        raise ValueError(f"both vectors must have length {n_qubits}, got {a.shape} and {b.shape}")
    state = StateVector.zero(n_qubits)
    for k in range(n_qubits):
        state = apply_rx(state, k, a[k])
        state = apply_rx(state, k, -b[k])
    return float(np.abs(state.amplitudes[0]) ** 2)


def batch_fidelity(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Statevector fidelity for many pairs at once.

    ``x1`` and ``x2`` are ``(P, n)`` arrays; every pair carries its own
    ``2**n`` statevector and the same gate sequence as :func:`pair_fidelity`.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x1.shape != x2.shape or x1.ndim != 2:
        raise ValueError("x1 and x2 must be (P, n) arrays of equal shape")
    p, n = x1.shape
    psi = np.zeros((p,) + (2,) * n, dtype=complex)
    psi[(slice(None),) + (0,) * n] = 1.0
    for k in range(n):
        for angles in (x1[:, k], -x2[:, k]):
            c = np.cos(angles / 2.0)
            s = -1j * np.sin(angles / 2.0)
            gate = np.stack([np.stack([c, s], -1), np.stack([s, c], -1)], -2)  # (P, 2, 2)
            moved = np.moveaxis(psi, k + 1, 1)  # (P, 2, ...)
            flat = moved.reshape(p, 2, -1)
            flat = np.einsum("pab,pbr->par", gate, flat)
            psi = np.moveaxis(flat.reshape(moved.shape), 1, k + 1)
    return np.abs(psi[(slice(None),) + (0,) * n]) ** 2


def closed_form_fidelity(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    return np.prod(np.cos((np.asarray(x1) - np.asarray(x2)) / 2.0) ** 2, axis=-1)


@dataclass(frozen=True)
class SimilarityMatrix:
    values: np.ndarray
    method: str

    @property
    def n(self) -> int:
        return self.values.shape[0]


def _cosine_matrix(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = x / safe[:, None]
    sim = np.clip(unit @ unit.T, -1.0, 1.0)
    zero = norms == 0
    sim[zero, :] = 0.0
    sim[:, zero] = 0.0
    return sim


def similarity_matrix(
    embeddings: np.ndarray,
    method: str = "quantum_fidelity",
    angle_scale: float = 1.0,
    chunk: int = 20000,
) -> SimilarityMatrix:
    """Dense symmetric similarity with a unit diagonal.

    ``quantum_fidelity`` simulates one circuit per unordered pair, N(N-1)/2 in
    total. ``cosine`` uses normalized dot products; a zero-norm row scores 0
    against everything else.
    """
    x = np.asarray(getattr(embeddings, "values", embeddings), dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("embeddings must be a nonempty 2-D matrix")
    n = x.shape[0]
    if method == "quantum_fidelity":
        x = x * angle_scale
        sim = np.zeros((n, n))
        iu, ju = np.triu_indices(n, k=1)
        for start in range(0, iu.size, chunk):
            i, j = iu[start : start + chunk], ju[start : start + chunk]
            p = batch_fidelity(x[i], x[j])
            sim[i, j] = p
            sim[j, i] = p
    elif method == "cosine":
        sim = _cosine_matrix(x)
        sim = (sim + sim.T) / 2.0
    else:
        raise ValueError(f"unknown similarity method {method!r}")
    np.fill_diagonal(sim, 1.0)
    return SimilarityMatrix(sim, method)


def write_similarity_csv(sim: SimilarityMatrix | np.ndarray, path: str | Path, header_lines: Sequence[str] = ()) -> None:
    values = getattr(sim, "values", sim)
    with Path(path).open("w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        for row in values:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_similarity_csv(path: str | Path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", comments="#", ndmin=2)


def write_similarity_binary(sim: SimilarityMatrix | np.ndarray, path: str | Path) -> None:
    """Magic ``SIMM`` + little-endian uint32 N, then N*N row-major float64."""
    values = np.ascontiguousarray(getattr(sim, "values", sim), dtype="<f8")
    n = values.shape[0]
    with Path(path).open("wb") as fh:
        fh.write(BINARY_MAGIC + struct.pack("<I", n))
        fh.write(values.tobytes())


def read_similarity_binary(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != BINARY_MAGIC:
        raise ValueError("not a similarity matrix file")
    (n,) = struct.unpack("<I", raw[4:8])
    if len(raw) != 8 + 8 * n * n:
        raise ValueError("truncated similarity matrix file")
    return np.frombuffer(raw, dtype="<f8", offset=8).reshape(n, n).copy()

"""Dense linear algebra and Pauli algebra shared by every other module.

Conventions used throughout the package:

* Qubit order is (Qc1, Qt, Qc2): the first control, the target, the second
  control. Computational basis index = 4*c1 + 2*t + c2.
* Three-qubit Pauli strings are ordered lexicographically over (I, X, Y, Z)
  per qubit, giving index = 16*q(c1) + 4*q(t) + q(c2).
* Pauli transfer matrices use the normalized basis P/sqrt(d), so the PTM of
  a unitary channel is a real orthogonal matrix.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

UNITARY_ATOL = 1e-10
HERMITIAN_ATOL = 1e-10

PAULI_LABELS = "IXYZ"

PAULI_1Q = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def kron(factors: Sequence[np.ndarray]) -> np.ndarray:
    """Tensor product of a nonempty sequence of square matrices."""
    if len(factors) == 0:
        raise ValueError("no factors")
    out = np.asarray(factors[0], dtype=complex)
    if out.ndim != 2 or out.shape[0] != out.shape[1]:
        raise ValueError("factors must be square matrices")
    for f in factors[1:]:
        f = np.asarray(f, dtype=complex)
        if f.ndim != 2 or f.shape[0] != f.shape[1]:
            raise ValueError("factors must be square matrices")
        out = np.kron(out, f)
    return out


@dataclass(frozen=True)
class PauliString:
    """Three-qubit Pauli string in (Qc1, Qt, Qc2) order."""

    labels: tuple[str, str, str]

    def __post_init__(self):
        if len(self.labels) != 3 or any(l not in PAULI_LABELS for l in self.labels):
            raise ValueError(f"invalid Pauli labels {self.labels!r}")

    @classmethod
    def from_str(cls, s: str) -> "PauliString":
        return cls(tuple(s))  # type: ignore[arg-type]

    @classmethod
    def from_index(cls, i: int) -> "PauliString":
        if not 0 <= i < 64:
            raise ValueError("index out of range")
        digits = (i // 16, (i // 4) % 4, i % 4)
        return cls(tuple(PAULI_LABELS[d] for d in digits))  # type: ignore[arg-type]

    @property
    def index(self) -> int:
        d = [PAULI_LABELS.index(l) for l in self.labels]
        return 16 * d[0] + 4 * d[1] + d[2]

    @property
    def weight(self) -> int:
        return sum(l != "I" for l in self.labels)

    def matrix(self) -> np.ndarray:
        return kron([PAULI_1Q[l] for l in self.labels])

    def __str__(self) -> str:
        return "".join(self.labels)


def pauli_matrix(p: PauliString | str | tuple) -> np.ndarray:
    """Dense 8x8 matrix of a three-qubit Pauli string."""
    if isinstance(p, str):
        p = PauliString.from_str(p)
    elif isinstance(p, tuple):
        p = PauliString(p)
    return p.matrix()


@lru_cache(maxsize=None)
def pauli_basis(n_qubits: int = 3) -> tuple[np.ndarray, ...]:
    """All 4**n Pauli matrices, lexicographic over (I, X, Y, Z) per qubit."""
    mats_1q = [PAULI_1Q[l] for l in PAULI_LABELS]
    out = mats_1q
    for _ in range(n_qubits - 1):
        out = [np.kron(a, b) for a in out for b in mats_1q]
    for m in out:
        m.setflags(write=False)
    return tuple(out)


@lru_cache(maxsize=None)
def normalized_pauli_basis(n_qubits: int = 3) -> tuple[np.ndarray, ...]:
    d = 2**n_qubits
    out = tuple(p / np.sqrt(d) for p in pauli_basis(n_qubits))
    for m in out:
        m.setflags(write=False)
    return out


def require_hermitian(H: np.ndarray, atol: float = HERMITIAN_ATOL) -> np.ndarray:
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("expected a square matrix")
    dev = np.max(np.abs(H - H.conj().T))
    if dev > atol:
        raise ValueError(f"matrix is not Hermitian (max deviation {dev:.2e})")
    return H


def require_unitary(U: np.ndarray, atol: float = UNITARY_ATOL) -> np.ndarray:
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ValueError("expected a square matrix")
    dev = np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0])))
    if dev > atol:
        raise ValueError(f"matrix is not unitary (max deviation {dev:.2e})")
    return U


def require_density_matrix(rho: np.ndarray, atol: float = 1e-10) -> np.ndarray:
    rho = require_hermitian(rho, atol)
    if abs(np.trace(rho) - 1.0) > atol:
        raise ValueError("density matrix trace differs from 1")
    if np.linalg.eigvalsh(rho).min() < -1e-9:
        raise ValueError("density matrix has a significantly negative eigenvalue")
    return rho


def expm_hermitian(H: np.ndarray, t: float) -> np.ndarray:
    """exp(-i H t) through an eigendecomposition of Hermitian H.

    Exactly unitary up to roundoff, which matters for the long time-ordered
    products in the pulse simulator.
    """
    H = require_hermitian(H)
    w, V = np.linalg.eigh(H)
    return (V * np.exp(-1j * w * t)) @ V.conj().T


def entanglement_fidelity(V: np.ndarray, U: np.ndarray) -> float:
    """|Tr[V^dag U] / d|^2, invariant under a global phase of either argument."""
    V = np.asarray(V, dtype=complex)
    U = np.asarray(U, dtype=complex)
    if V.shape != U.shape:
        raise ValueError(f"dimension mismatch {V.shape} vs {U.shape}")
    d = V.shape[0]
    return float(abs(np.trace(V.conj().T @ U) / d) ** 2)


def random_haar_unitary(dim: int, seed: int | np.random.Generator | None = None) -> np.ndarray:
    """Haar-distributed unitary from a QR-corrected complex Ginibre matrix."""
    if dim < 2:
        raise ValueError("dim must be at least 2")
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r)
    return q * (ph / np.abs(ph))


def rz(theta: float) -> np.ndarray:
    """Single-qubit Z rotation exp(-i theta Z / 2)."""
    return np.diag([np.exp(-1j * theta / 2), np.exp(1j * theta / 2)])


def basis_state(index: int, dim: int = 8) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v

"""Quantum channels in the Pauli transfer matrix (PTM) representation.

A channel on n qubits is stored as the real matrix R with
R_ij = Tr[P_i E(P_j)] / d over the normalized Pauli basis P_i / sqrt(d),
so the PTM of a unitary channel is orthogonal and process fidelities reduce
to matrix traces.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import kron, normalized_pauli_basis, require_unitary

TRACE_PRESERVING_ATOL = 1e-9


@dataclass(frozen=True)
class QuantumChannel:
    """PTM-represented channel; dim is the PTM side (4 for one qubit, 64 for three)."""

    ptm: np.ndarray

    def __post_init__(self):
        ptm = np.asarray(self.ptm, dtype=float)
        if ptm.ndim != 2 or ptm.shape[0] != ptm.shape[1]:
            raise ValueError("ptm must be square")
        if ptm.shape[0] not in (4, 64):
            raise ValueError("only one- and three-qubit channels are supported")
        ptm.setflags(write=False)
        object.__setattr__(self, "ptm", ptm)

    @property
    def dim(self) -> int:
        return self.ptm.shape[0]

    @property
    def n_qubits(self) -> int:
        return 1 if self.dim == 4 else 3

    @property
    def hilbert_dim(self) -> int:
        return 2**self.n_qubits

    def compose(self, other: "QuantumChannel") -> "QuantumChannel":
        """Channel applying `other` first, then self."""
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        return QuantumChannel(self.ptm @ other.ptm)

    def __matmul__(self, other: "QuantumChannel") -> "QuantumChannel":
        return self.compose(other)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return pauli_vector_to_state(self.ptm @ state_to_pauli_vector(rho))

    def is_trace_preserving(self, atol: float = TRACE_PRESERVING_ATOL) -> bool:
        e0 = np.zeros(self.dim)
        e0[0] = 1.0
        return bool(np.max(np.abs(self.ptm[0] - e0)) <= atol)

    def choi_matrix(self) -> np.ndarray:
        return ptm_to_choi(self.ptm)

    def is_cptp(self, atol: float = 1e-9) -> bool:
        if not self.is_trace_preserving(atol):
            return False
        return bool(np.linalg.eigvalsh(self.choi_matrix()).min() >= -atol)


def identity_channel(dim: int = 64) -> QuantumChannel:
    return QuantumChannel(np.eye(dim))


def depolarizing_channel(lam: float, dim: int = 64) -> QuantumChannel:
    """Global depolarizing channel: every non-identity Pauli component shrinks by 1-lam."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must be in [0, 1]")
    d = np.full(dim, 1.0 - lam)
    d[0] = 1.0
    return QuantumChannel(np.diag(d))


def state_to_pauli_vector(rho: np.ndarray) -> np.ndarray:
    """Coefficients of rho over the normalized Pauli basis."""
    rho = np.asarray(rho, dtype=complex)
    n = rho.shape[0].bit_length() - 1
    basis = normalized_pauli_basis(n)
    return np.array([np.real(np.trace(p @ rho)) for p in basis])


def pauli_vector_to_state(vec: np.ndarray) -> np.ndarray:
    n = 1 if len(vec) == 4 else 3
    basis = normalized_pauli_basis(n)
    rho = np.zeros_like(basis[0])
    for c, p in zip(vec, basis):
        rho = rho + c * p
    return rho


def ptm_of_unitary(U: np.ndarray) -> QuantumChannel:
    """PTM of the unitary channel rho -> U rho U^dag."""
    U = require_unitary(U)
    n = U.shape[0].bit_length() - 1
    basis = normalized_pauli_basis(n)
    # R_ij = Tr[P_i U P_j U^dag]; evaluated as a Hilbert-Schmidt Gram matrix
    conj = [U @ p @ U.conj().T for p in basis]
    flat = np.array([p.conj().ravel() for p in basis])
    cflat = np.array([c.ravel() for c in conj])
    return QuantumChannel(np.real(flat @ cflat.T))


def ptm_process_fidelity(e_ideal: QuantumChannel, e_exp: QuantumChannel) -> float:
    """Tr[E_ideal^T E_exp] / d^2 for PTM-represented channels."""
    if e_ideal.dim != e_exp.dim:
        raise ValueError("dimension mismatch")
    return float(np.trace(e_ideal.ptm.T @ e_exp.ptm) / e_ideal.dim)


@lru_cache(maxsize=None)
def pauli_commutation_signs(n_qubits: int = 3) -> np.ndarray:
    """signs[i, j] = +1 if P_i and P_j commute, -1 if they anticommute.

    Row i of the table is also the PTM diagonal of conjugation by P_i.
    """
    # single-qubit table: I commutes with all; distinct non-identity letters anticommute
    s1 = np.ones((4, 4))
    for a in range(1, 4):
        for b in range(1, 4):
            if a != b:
                s1[a, b] = -1.0
    signs = s1
    for _ in range(n_qubits - 1):
        signs = np.kron(signs, s1)
    signs.setflags(write=False)
    return signs


def pauli_conjugation_channel(index: int, n_qubits: int = 3) -> QuantumChannel:
    """Channel rho -> P rho P for the Pauli string with the given index."""
    return QuantumChannel(np.diag(pauli_commutation_signs(n_qubits)[index]))


def twirl_channel(channel: QuantumChannel) -> QuantumChannel:
    """Average of P E P over all Pauli frames; equals diag(E) in the PTM picture."""
    signs = pauli_commutation_signs(channel.n_qubits)
    acc = np.zeros_like(channel.ptm)
    for i in range(channel.dim):
        s = signs[i]
        acc += (s[:, None] * channel.ptm) * s[None, :]
    return QuantumChannel(acc / channel.dim)


def ptm_to_choi(ptm: np.ndarray) -> np.ndarray:
    """Choi matrix (unit trace) of a PTM over the normalized Pauli basis."""
    dim = ptm.shape[0]
    n = 1 if dim == 4 else 3
    d = 2**n
    basis = normalized_pauli_basis(n)
    choi = np.zeros((d * d, d * d), dtype=complex)
    for i in range(dim):
        for j in range(dim):
            if ptm[i, j] != 0.0:
                choi += ptm[i, j] * np.kron(basis[i], basis[j].T)
    return choi / d


def choi_to_ptm(choi: np.ndarray) -> np.ndarray:
    dd = choi.shape[0]
    d = int(np.sqrt(dd))
    n = d.bit_length() - 1
    basis = normalized_pauli_basis(n)
    dim = 4**n
    ptm = np.empty((dim, dim))
    for i in range(dim):
        for j in range(dim):
            ptm[i, j] = d * np.real(np.trace(np.kron(basis[i], basis[j].T) @ choi))
    return ptm


def apply_channel_to_state_index(channel: QuantumChannel, index: int) -> np.ndarray:
    """Populations over the computational basis after sending |index><index| through."""
    d = channel.hilbert_dim
    rho = np.zeros((d, d), dtype=complex)
    rho[index, index] = 1.0
    out = channel.apply(rho)
    pops = np.clip(np.real(np.diag(out)), 0.0, None)
    return pops / np.sum(pops)


def channel_of_tensor(factors: list[QuantumChannel]) -> QuantumChannel:
    """Tensor product of single-qubit channels in (Qc1, Qt, Qc2) order.

    Valid because the three-qubit Pauli index factorizes the same way the
    basis does (lexicographic per qubit), so the joint PTM is the Kronecker
    product of the single-qubit PTMs.
    """
    if len(factors) != 3 or any(f.dim != 4 for f in factors):
        raise ValueError("expected three single-qubit channels")
    return QuantumChannel(kron([f.ptm for f in factors]).real)

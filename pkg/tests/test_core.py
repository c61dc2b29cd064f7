import itertools

import numpy as np
import pytest

from itofsim.core import (
    PauliString,
    entanglement_fidelity,
    expm_hermitian,
    kron,
    pauli_basis,
    pauli_matrix,
    random_haar_unitary,
    require_density_matrix,
    require_hermitian,
    require_unitary,
)

I2 = np.eye(2)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1.0, -1.0])


def test_kron_identity():
    np.testing.assert_allclose(kron([I2, I2]), np.eye(4))


def test_kron_basis_action():
    state = np.zeros(4)
    state[0] = 1.0  # |00>
    out = kron([X, I2]) @ state
    expected = np.zeros(4)
    expected[2] = 1.0  # |10>
    np.testing.assert_allclose(out, expected)


def test_kron_zz_diagonal():
    np.testing.assert_allclose(np.diag(kron([Z, Z])), [1, -1, -1, 1])


def test_kron_associative():
    rng = np.random.default_rng(0)
    a, b, c = (rng.normal(size=(2, 2)) for _ in range(3))
    np.testing.assert_allclose(kron([kron([a, b]), c]), kron([a, kron([b, c])]))


def test_kron_empty_rejected():
    with pytest.raises(ValueError, match="no factors"):
        kron([])


def test_pauli_matrix_identity():
    np.testing.assert_allclose(pauli_matrix("III"), np.eye(8))


def test_pauli_matrix_zxi_basis_action():
    m = pauli_matrix("ZXI")
    assert m[2, 0] == 1.0  # <010|ZXI|000>


def test_pauli_matrix_involution():
    m = pauli_matrix("ZXI")
    np.testing.assert_allclose(m @ m, np.eye(8), atol=1e-15)


def test_pauli_string_index_round_trip():
    for i in range(64):
        p = PauliString.from_index(i)
        assert p.index == i


def test_all_pauli_strings_hermitian_unitary_traceless():
    for i in range(64):
        m = PauliString.from_index(i).matrix()
        np.testing.assert_allclose(m, m.conj().T, atol=1e-15)
        np.testing.assert_allclose(m @ m.conj().T, np.eye(8), atol=1e-15)
        if i != 0:
            assert abs(np.trace(m)) < 1e-12


def test_paulis_commute_or_anticommute_exhaustively():
    basis = pauli_basis(3)
    for a, b in itertools.product(basis, repeat=2):
        comm = a @ b - b @ a
        anti = a @ b + b @ a
        assert min(np.max(np.abs(comm)), np.max(np.abs(anti))) < 1e-12


def test_expm_zero_is_identity():
    np.testing.assert_allclose(expm_hermitian(np.zeros((4, 4)), 5.0), np.eye(4))


def test_expm_half_period_rotation():
    # exp(-i (pi/2) X) = -i X
    U = expm_hermitian((np.pi / 2) * X, 1.0)
    np.testing.assert_allclose(U, -1j * X, atol=1e-12)


def test_expm_semigroup_property():
    rng = np.random.default_rng(1)
    for _ in range(20):
        h = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        h = (h + h.conj().T) / 2
        t1, t2 = rng.uniform(0.1, 3.0, size=2)
        lhs = expm_hermitian(h, t1) @ expm_hermitian(h, t2)
        np.testing.assert_allclose(lhs, expm_hermitian(h, t1 + t2), atol=1e-10)


def test_expm_rejects_non_hermitian():
    with pytest.raises(ValueError, match="Hermitian"):
        expm_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]), 1.0)


def test_expm_output_unitary():
    rng = np.random.default_rng(2)
    h = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    h = (h + h.conj().T) / 2
    require_unitary(expm_hermitian(h, 2.7))


def test_fidelity_self_is_one():
    U = random_haar_unitary(8, 3)
    assert entanglement_fidelity(U, U) == pytest.approx(1.0, abs=1e-12)


def test_fidelity_traceless_product_is_zero():
    assert entanglement_fidelity(np.eye(8), pauli_matrix("XII")) == pytest.approx(0.0, abs=1e-15)


def test_fidelity_small_rotation_cosine():
    theta = np.pi / 6
    U = expm_hermitian(theta * pauli_matrix("ZII"), 1.0)
    assert entanglement_fidelity(np.eye(8), U) == pytest.approx(np.cos(theta) ** 2, abs=1e-12)


def test_fidelity_global_phase_invariant_and_symmetric():
    rng = np.random.default_rng(4)
    for _ in range(10):
        u = random_haar_unitary(8, rng)
        v = random_haar_unitary(8, rng)
        f = entanglement_fidelity(v, u)
        assert entanglement_fidelity(u, v) == pytest.approx(f, abs=1e-12)
        phase = np.exp(1j * rng.uniform(0, 2 * np.pi))
        assert entanglement_fidelity(phase * v, u) == pytest.approx(f, abs=1e-12)


def test_fidelity_dimension_mismatch():
    with pytest.raises(ValueError, match="mismatch"):
        entanglement_fidelity(np.eye(4), np.eye(8))


def test_haar_deterministic_per_seed():
    np.testing.assert_array_equal(random_haar_unitary(8, 5), random_haar_unitary(8, 5))


def test_haar_unitarity():
    U = random_haar_unitary(8, 6)
    np.testing.assert_allclose(U.conj().T @ U, np.eye(8), atol=1e-10)


def test_haar_first_moment():
    # mean |<0|U|0>|^2 over Haar is 1/dim
    rng = np.random.default_rng(7)
    vals = [abs(random_haar_unitary(8, rng)[0, 0]) ** 2 for _ in range(10_000)]
    assert np.mean(vals) == pytest.approx(1.0 / 8.0, abs=0.01)


def test_haar_left_invariance():
    # fixed left multiplication leaves the |<0|U|0>|^2 statistic unchanged
    rng = np.random.default_rng(8)
    W = random_haar_unitary(8, 999)
    plain, rotated = [], []
    for _ in range(4000):
        U = random_haar_unitary(8, rng)
        plain.append(abs(U[0, 0]) ** 2)
        rotated.append(abs((W @ U)[0, 0]) ** 2)
    assert np.mean(plain) == pytest.approx(np.mean(rotated), abs=0.02)


def test_validators():
    require_hermitian(np.diag([1.0, 2.0]))
    with pytest.raises(ValueError):
        require_unitary(np.diag([1.0, 2.0]))
    rho = np.diag([0.5, 0.5])
    require_density_matrix(rho)
    with pytest.raises(ValueError):
        require_density_matrix(np.diag([0.7, 0.7]))

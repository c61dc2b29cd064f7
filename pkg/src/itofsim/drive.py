"""Driven three-qubit Hamiltonian, pulse evolution, and the ideal gate.

Hamiltonian coefficients are angular Rabi rates in rad/ns: a coefficient c on
a target Pauli makes the target's <Z> oscillate at angular frequency c. The
matrices returned by the builders carry the plain coefficients; the
propagator uses H/2 as its generator so that fitted conditional Rabi
frequencies coincide with coefficient-space norms and a gate of duration
tau = 2*pi/Omega completes one conditional Bloch rotation.

All drive and coupling terms act trivially (I or Z, or control projectors)
on the two control qubits, so every Hamiltonian here is block diagonal over
the four control states. Several routines exploit that to reduce the target
dynamics to 2x2 blocks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import expm_hermitian, kron, pauli_matrix, require_unitary, rz

I2 = np.eye(2, dtype=complex)

CONTROL_STATES = ((0, 0), (0, 1), (1, 0), (1, 1))

#: delta/alpha ratio that makes Omega_00 = 1.5 * Omega_other
ITOFFOLI_DELTA_RATIO = math.sqrt(27.0 / 5.0)

DEFAULT_DT = 0.1  # ns
DEFAULT_RAMP = 30.0  # ns


def control_block_indices(k: int, l: int) -> tuple[int, int]:
    """(target |0>, target |1>) basis indices for control state |k l> = |c1 c2>."""
    return 4 * k + l, 4 * k + l + 2


@dataclass(frozen=True)
class PulseSet:
    """Per-qubit drive amplitudes/phases plus the flat-top cosine-ramp envelope.

    Amplitudes are effective angular Rabi rates (rad/ns); the target drive is
    split into its X (phase 0) and Y (phase pi/2) quadratures.
    """

    a_c1: float
    a_c2: float
    a_t_x: float
    a_t_y: float
    phi_c1: float = 0.0
    phi_c2: float = 0.0
    ramp: float = DEFAULT_RAMP
    flat: float = 0.0

    def __post_init__(self):
        for name in ("a_c1", "a_c2", "a_t_x", "a_t_y"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.ramp < 0 or self.flat < 0:
            raise ValueError("durations must be nonnegative")

    @property
    def total_duration(self) -> float:
        return self.flat + 2.0 * self.ramp

    @property
    def effective_duration(self) -> float:
        """flat + ramp: the cosine ramp pair carries exactly one ramp of area."""
        return self.flat + self.ramp

    def with_flat(self, flat: float) -> "PulseSet":
        return replace(self, flat=flat)


@dataclass(frozen=True)
class DriveModel:
    """Coefficients of the driven Hamiltonian plus static ZZ couplings.

    zy_c1 and zy_c2 are the residual Zc1*Yt / Yt*Zc2 quadratures left by
    imperfect drive phases; the calibration loop nulls them. tilt_overrides,
    when set, replaces the ZZ-derived conditional Z shifts (Delta_00,
    Delta_01, Delta_10, Delta_11) with externally supplied values.
    """

    alpha: float
    beta: float
    gamma: float
    delta: float
    zy_c1: float = 0.0
    zy_c2: float = 0.0
    zz_c1t: float = 0.0
    zz_tc2: float = 0.0
    tilt_overrides: tuple[float, float, float, float] | None = None

    def conditional_tilts(self) -> dict[tuple[int, int], float]:
        """Delta^{kl}: conditional Zt coefficient per control state, zero for |00>."""
        if self.tilt_overrides is not None:
            return dict(zip(CONTROL_STATES, self.tilt_overrides))
        return {(k, l): k * self.zz_c1t + l * self.zz_tc2 for k, l in CONTROL_STATES}

    def is_itoffoli(self, rtol: float = 1e-6) -> bool:
        """alpha = beta = gamma and delta = sqrt(27/5) alpha, up to rtol."""
        a = self.alpha
        if a == 0.0:
            return False
        return (
            math.isclose(self.beta, a, rel_tol=rtol)
            and math.isclose(self.gamma, a, rel_tol=rtol)
            and math.isclose(self.delta, ITOFFOLI_DELTA_RATIO * a, rel_tol=rtol)
        )


@dataclass(frozen=True)
class EffectiveTargetSet:
    """Conditional 2x2 target Hamiltonians and tilt terms per control state."""

    hamiltonians: dict[tuple[int, int], np.ndarray]
    tilts: dict[tuple[int, int], float]

    def x_coefficients(self) -> dict[tuple[int, int], float]:
        return {kl: float(np.real(h[0, 1])) for kl, h in self.hamiltonians.items()}

    def y_coefficients(self) -> dict[tuple[int, int], float]:
        return {kl: float(-np.imag(h[0, 1])) for kl, h in self.hamiltonians.items()}


def hamiltonian_from_pulses(
    p: PulseSet, zz_c1t: float = 0.0, zz_tc2: float = 0.0
) -> DriveModel:
    """Recast pulse amplitudes/phases into Hamiltonian coefficients.

    The cosine quadratures of the control drives feed the ZX-type terms and
    the sine quadratures the (unwanted) ZY-type terms.
    """
    return DriveModel(
        alpha=p.a_c1 * math.cos(p.phi_c1),
        beta=p.a_c2 * math.cos(p.phi_c2),
        gamma=p.a_t_x,
        delta=p.a_t_y,
        zy_c1=p.a_c1 * math.sin(p.phi_c1),
        zy_c2=p.a_c2 * math.sin(p.phi_c2),
        zz_c1t=zz_c1t,
        zz_tc2=zz_tc2,
    )


def drive_hamiltonian(m: DriveModel) -> np.ndarray:
    """8x8 matrix of the drive terms only (what the pulse envelope scales)."""
    H = (
        m.alpha * pauli_matrix("ZXI")
        + m.beta * pauli_matrix("IXZ")
        + m.gamma * pauli_matrix("IXI")
        + m.delta * pauli_matrix("IYI")
    )
    if m.zy_c1 != 0.0:
        H = H + m.zy_c1 * pauli_matrix("ZYI")
    if m.zy_c2 != 0.0:
        H = H + m.zy_c2 * pauli_matrix("IYZ")
    return H


def zz_hamiltonian(m: DriveModel) -> np.ndarray:
    """Static conditional-shift terms: sum_kl Delta^{kl} |kl><kl|_c (x) Zt."""
    H = np.zeros((8, 8), dtype=complex)
    Zt = np.array([1.0, -1.0])
    for (k, l), delta_kl in m.conditional_tilts().items():
        if delta_kl == 0.0:
            continue
        i0, i1 = control_block_indices(k, l)
        H[i0, i0] += delta_kl * Zt[0]
        H[i1, i1] += delta_kl * Zt[1]
    return H


def build_hamiltonian(m: DriveModel, include_zz: bool = True) -> np.ndarray:
    """Full 8x8 Hamiltonian in plain coefficient form."""
    H = drive_hamiltonian(m)
    if include_zz:
        H = H + zz_hamiltonian(m)
    return H


def effective_target_hamiltonians(m: DriveModel) -> EffectiveTargetSet:
    """Project the Hamiltonian onto each control state |kl>.

    The control signs flip the contributions of the control drives:
    x^{kl} = (+-)alpha + (+-)beta + gamma and likewise for the Y quadratures.
    """
    tilts = m.conditional_tilts()
    hams = {}
    for k, l in CONTROL_STATES:
        sk, sl = 1 - 2 * k, 1 - 2 * l
        x = sk * m.alpha + sl * m.beta + m.gamma
        y = sk * m.zy_c1 + sl * m.zy_c2 + m.delta
        hams[(k, l)] = np.array([[0.0, x - 1j * y], [x + 1j * y, 0.0]])
    return EffectiveTargetSet(hamiltonians=hams, tilts=tilts)


def conditional_rabi_frequencies(m: DriveModel) -> dict[tuple[int, int], float]:
    """Omega^{kl} = sqrt(x^2 + y^2 + Delta^2): the <Z> oscillation rate per block."""
    eff = effective_target_hamiltonians(m)
    out = {}
    for kl, h in eff.hamiltonians.items():
        x = np.real(h[0, 1])
        y = -np.imag(h[0, 1])
        out[kl] = float(math.sqrt(x * x + y * y + eff.tilts[kl] ** 2))
    return out


def _ramp_area(t: float, ramp: float) -> float:
    """Integral of the cosine ramp s(t) = (1 - cos(pi t / ramp)) / 2 from 0 to t."""
    return 0.5 * (t - (ramp / math.pi) * math.sin(math.pi * t / ramp))


def _ramp_propagator(
    h_drive: np.ndarray, h_static: np.ndarray, ramp: float, dt: float, up: bool
) -> np.ndarray:
    """Time-ordered product over one cosine ramp.

    Each step uses the exact envelope area over the step, so with no static
    term the result is exact for any dt (all steps commute).
    """
    n = max(1, int(math.ceil(ramp / dt - 1e-12)))
    step = ramp / n
    U = np.eye(h_drive.shape[0], dtype=complex)
    for j in range(n):
        a0 = _ramp_area(j * step, ramp)
        a1 = _ramp_area((j + 1) * step, ramp)
        sbar = (a1 - a0) / step
        if not up:
            sbar = 1.0 - sbar
        H = 0.5 * (sbar * h_drive + h_static)
        U = expm_hermitian(H, step) @ U
    return U


class PulsePropagator:
    """Propagators for a family of pulses sharing ramps but varying flat tops.

    The ramp-up and ramp-down operators depend only on the envelope shape, so
    a duration sweep reuses them and pays one matrix exponential per point.
    """

    def __init__(self, m: DriveModel, p: PulseSet, dt: float = DEFAULT_DT,
                 include_zz: bool = True):
        if dt <= 0:
            raise ValueError("dt must be positive")
        if p.ramp > 0 and dt > p.ramp / 10 + 1e-12:
            raise ValueError("step too large: require dt <= ramp/10")
        self.model = m
        self.pulses = p
        self.dt = dt
        h_drive = drive_hamiltonian(m)
        h_static = zz_hamiltonian(m) if include_zz else np.zeros((8, 8), dtype=complex)
        self._h_flat = 0.5 * (h_drive + h_static)
        if p.ramp > 0:
            self._up = _ramp_propagator(h_drive, h_static, p.ramp, dt, up=True)
            self._down = _ramp_propagator(h_drive, h_static, p.ramp, dt, up=False)
        else:
            self._up = self._down = np.eye(8, dtype=complex)
        w, V = np.linalg.eigh(self._h_flat)
        self._flat_eigs = (w, V)

    def unitary(self, flat: float) -> np.ndarray:
        if flat < 0:
            raise ValueError("flat duration must be nonnegative")
        w, V = self._flat_eigs
        U_flat = (V * np.exp(-1j * w * flat)) @ V.conj().T
        return self._down @ U_flat @ self._up

    def unitary_for_effective_duration(self, tau_eff: float) -> np.ndarray:
        flat = tau_eff - self.pulses.ramp
        if flat < -1e-12:
            raise ValueError("effective duration shorter than the ramp")
        return self.unitary(max(flat, 0.0))


def evolve_pulse(m: DriveModel, p: PulseSet, dt: float = DEFAULT_DT,
                 include_zz: bool = True) -> np.ndarray:
    """Unitary of the full flat-top cosine-ramp pulse described by p."""
    return PulsePropagator(m, p, dt, include_zz).unitary(p.flat)


def ideal_itoffoli() -> np.ndarray:
    """i*X on the target for control state |00>, identity otherwise.

    The global phase exp(i pi) of the raw driven evolution is factored out.
    """
    U = np.eye(8, dtype=complex)
    i0, i1 = control_block_indices(0, 0)
    U[i0, i0] = U[i1, i1] = 0.0
    U[i0, i1] = U[i1, i0] = 1j
    return U


def toffoli() -> np.ndarray:
    """Plain Toffoli on the same qubit layout: X on the target for |00> controls."""
    U = np.eye(8, dtype=complex)
    i0, i1 = control_block_indices(0, 0)
    U[i0, i0] = U[i1, i1] = 0.0
    U[i0, i1] = U[i1, i0] = 1.0
    return U


def virtual_z_sandwich(U: np.ndarray, theta_pre: float, theta_post: float) -> np.ndarray:
    """Rz(theta_post)_t . U . Rz(theta_pre)_t with rotations on the target qubit."""
    U = require_unitary(U)
    pre = kron([I2, rz(theta_pre), I2])
    post = kron([I2, rz(theta_post), I2])
    return post @ U @ pre

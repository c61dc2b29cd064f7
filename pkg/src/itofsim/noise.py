"""Decoherence channels, geometric-phase error model, and readout errors.

The decoherence model is the Pauli-twirled single-qubit channel
diag(1, s, s, 1-g1) with s = sqrt(1-g1)sqrt(1-g2), g1 = 1-exp(-tau/T1) and
g2 = 1-exp(-2*Gamma2*tau), Gamma2 = 1/T2_echo - 1/(2*T1). Three-qubit noise
is its tensor product; crosstalk is not modeled.

The geometric-phase (GP) model assigns conditional phases exp(i*pi*(1 -+ r))
to the target states for each inactive control state, where r = Delta/Omega
is the rotation-axis tilt of that control block. With the gate's global
phase factored out this reduces to a pure-Z frame error per control state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channels import QuantumChannel, channel_of_tensor, ptm_of_unitary
from .core import entanglement_fidelity
from .drive import control_block_indices, ideal_itoffoli

QUBIT_ORDER = ("c1", "t", "c2")


@dataclass(frozen=True)
class UnderDriveEntry:
    """Measured coherence times at one relative drive amplitude."""

    relative_amplitude: float
    t1_us: tuple[float, float, float]
    t2_echo_us: tuple[float, float, float]


@dataclass(frozen=True)
class DeviceNoiseModel:
    """Per-qubit coherence, ZZ couplings, and readout fidelities.

    Tuples are ordered (Qc1, Qt, Qc2). ZZ strengths are the conditional
    frequency shifts zeta/2pi in kHz; frequencies and anharmonicities are
    informational only.
    """

    t1_us: tuple[float, float, float]
    t2_echo_us: tuple[float, float, float]
    zz_c1t_khz: float = 0.0
    zz_tc2_khz: float = 0.0
    readout_p00: tuple[float, float, float] = (1.0, 1.0, 1.0)
    readout_p11: tuple[float, float, float] = (1.0, 1.0, 1.0)
    frequency_ghz: tuple[float, float, float] | None = None
    anharmonicity_mhz: tuple[float, float, float] | None = None
    under_drive: tuple[UnderDriveEntry, ...] = ()

    def __post_init__(self):
        for t1, t2 in zip(self.t1_us, self.t2_echo_us):
            if t1 <= 0 or t2 <= 0:
                raise ValueError("coherence times must be positive")
            if t2 > 2.0 * t1 + 1e-9:
                raise ValueError("unphysical dephasing: T2_echo exceeds 2*T1")
        for p in (*self.readout_p00, *self.readout_p11):
            if not 0.0 <= p <= 1.0:
                raise ValueError("readout fidelities must be probabilities")
        object.__setattr__(self, "under_drive",
                           tuple(sorted(self.under_drive,
                                        key=lambda e: e.relative_amplitude)))

    @classmethod
    def default(cls) -> "DeviceNoiseModel":
        """Device parameters of the reference three-transmon chain."""
        return cls(
            t1_us=(70.0, 61.0, 57.0),
            t2_echo_us=(60.0, 73.0, 66.0),
            zz_c1t_khz=96.0,
            zz_tc2_khz=171.0,
            readout_p00=(0.998, 0.997, 0.996),
            readout_p11=(0.948, 0.982, 0.981),
            frequency_ghz=(5.254, 5.331, 5.491),
            anharmonicity_mhz=(-277.1, -272.1, -271.8),
        )

    def zz_angular(self) -> tuple[float, float]:
        """(zz_c1t, zz_tc2) as angular rates in rad/ns."""
        scale = 2.0 * math.pi * 1e-6
        return self.zz_c1t_khz * scale, self.zz_tc2_khz * scale

    def coherence_at(self, relative_amplitude: float | None = None
                     ) -> tuple[tuple[float, float, float], tuple[float, float, float]]:
        """(T1, T2_echo) triples, interpolating the under-drive table if used.

        With no table or no amplitude the bare values are returned. Outside
        the tabulated range the nearest entry is held constant.
        """
        if relative_amplitude is None or not self.under_drive:
            return self.t1_us, self.t2_echo_us
        amps = [e.relative_amplitude for e in self.under_drive]
        if relative_amplitude <= amps[0]:
            e = self.under_drive[0]
            return e.t1_us, e.t2_echo_us
        if relative_amplitude >= amps[-1]:
            e = self.under_drive[-1]
            return e.t1_us, e.t2_echo_us
        hi = next(i for i, a in enumerate(amps) if a >= relative_amplitude)
        lo = hi - 1
        w = (relative_amplitude - amps[lo]) / (amps[hi] - amps[lo])
        e0, e1 = self.under_drive[lo], self.under_drive[hi]
        t1 = tuple((1 - w) * a + w * b for a, b in zip(e0.t1_us, e1.t1_us))
        t2 = tuple((1 - w) * a + w * b for a, b in zip(e0.t2_echo_us, e1.t2_echo_us))
        return t1, t2  # type: ignore[return-value]

    def target_z_decay(self, tau_ns: float) -> float:
        """Z-component damping of the target under the twirled channel."""
        return math.exp(-tau_ns * 1e-3 / self.t1_us[1])


def decoherence_gammas(t1_us: float, t2_echo_us: float, tau_ns: float) -> tuple[float, float]:
    if t1_us <= 0:
        raise ValueError("T1 must be positive")
    if tau_ns < 0:
        raise ValueError("tau must be nonnegative")
    if t2_echo_us > 2.0 * t1_us + 1e-9:
        raise ValueError("unphysical dephasing: T2_echo exceeds 2*T1")
    tau_us = tau_ns * 1e-3
    gamma1 = 1.0 - math.exp(-tau_us / t1_us)
    gamma2_rate = 1.0 / t2_echo_us - 1.0 / (2.0 * t1_us)
    gamma2 = 1.0 - math.exp(-2.0 * gamma2_rate * tau_us)
    return gamma1, gamma2


def decoherence_ptm(t1_us: float, t2_echo_us: float, tau_ns: float) -> QuantumChannel:
    """Pauli-twirled single-qubit decoherence channel for a gate of length tau."""
    g1, g2 = decoherence_gammas(t1_us, t2_echo_us, tau_ns)
    s = math.sqrt(1.0 - g1) * math.sqrt(1.0 - g2)
    return QuantumChannel(np.diag([1.0, s, s, 1.0 - g1]))


def three_qubit_decoherence(noise: DeviceNoiseModel, tau_ns: float,
                            relative_amplitude: float | None = None) -> QuantumChannel:
    t1s, t2s = noise.coherence_at(relative_amplitude)
    return channel_of_tensor([decoherence_ptm(t1, t2, tau_ns) for t1, t2 in zip(t1s, t2s)])


def coherence_limit(noise: DeviceNoiseModel, tau_ns: float,
                    relative_amplitude: float | None = None) -> float:
    """Closed-form coherence-limited process fidelity.

    (1/d^2) * prod_q (2 + 2*sqrt(1-g1)sqrt(1-g2) - g1), identical to
    Tr[E_1 x E_2 x E_3]/d^2 for the twirled per-qubit channels.
    """
    t1s, t2s = noise.coherence_at(relative_amplitude)
    prod = 1.0
    for t1, t2 in zip(t1s, t2s):
        g1, g2 = decoherence_gammas(t1, t2, tau_ns)
        s = math.sqrt(1.0 - g1) * math.sqrt(1.0 - g2)
        prod *= 2.0 + 2.0 * s - g1
    return prod / 64.0


@dataclass(frozen=True)
class GpTiltSet:
    """Axis-tilt ratios r = Delta/Omega per inactive control state."""

    r01: float
    r10: float
    r11: float
    r00: float = 0.0

    def __post_init__(self):
        for name in ("r00", "r01", "r10", "r11"):
            if not abs(getattr(self, name)) < 1.0:
                raise ValueError(f"|{name}| must be below 1")

    @classmethod
    def zero(cls) -> "GpTiltSet":
        return cls(0.0, 0.0, 0.0)

    def as_dict(self) -> dict[tuple[int, int], float]:
        return {(0, 0): self.r00, (0, 1): self.r01, (1, 0): self.r10, (1, 1): self.r11}

    def max_abs(self) -> float:
        return max(abs(self.r01), abs(self.r10), abs(self.r11))


def gp_unitary(tilts: GpTiltSet) -> np.ndarray:
    """Conditional-phase gate error model, global phase already factored out.

    The |00> block keeps the ideal i*X flip (its tilt is zero in the drive
    frame); each other control block becomes the frame error
    diag(exp(-i pi r), exp(+i pi r)).
    """
    if tilts.r00 != 0.0:
        raise ValueError("nonzero r00 is outside the modeled drive frame")
    U = ideal_itoffoli()
    for (k, l), r in tilts.as_dict().items():
        if (k, l) == (0, 0):
            continue
        i0, i1 = control_block_indices(k, l)
        U[i0, i0] = np.exp(-1j * math.pi * r)
        U[i1, i1] = np.exp(1j * math.pi * r)
    return U


def gp_error(tilts: GpTiltSet) -> float:
    """1 - F(U_GP, U_ideal); grows quadratically in each tilt for small r."""
    return 1.0 - entanglement_fidelity(gp_unitary(tilts), ideal_itoffoli())


def tilt_from_amplitude(amplitude: float) -> float:
    """|Delta/Omega| from a conditional Rabi oscillation amplitude.

    A tilted rotation axis caps the oscillation at 1 - r^2.
    """
    if amplitude > 1.0 + 1e-9 or amplitude < 0.0:
        raise ValueError("amplitude must lie in [0, 1]")
    return math.sqrt(max(1.0 - amplitude, 0.0))


def tilts_from_unitary(U: np.ndarray) -> GpTiltSet:
    """Read effective tilts off a simulated gate's conditional phases.

    For each inactive control block the splitting between the two diagonal
    phases is 2*pi*r in the GP model; this inverts that relation.
    """
    rs = {}
    for k, l in ((0, 1), (1, 0), (1, 1)):
        i0, i1 = control_block_indices(k, l)
        d0, d1 = U[i0, i0], U[i1, i1]
        if abs(d0) < 0.5 or abs(d1) < 0.5:
            raise ValueError("control block is not phase-like; cannot extract a tilt")
        rs[(k, l)] = float(np.angle(d1 * np.conj(d0)) / (2.0 * math.pi))
    return GpTiltSet(r01=rs[(0, 1)], r10=rs[(1, 0)], r11=rs[(1, 1)])


def gp_adjusted_unitary(U: np.ndarray, tilts: GpTiltSet | None) -> np.ndarray:
    """Compose the GP frame error onto a unitary (identity when tilts is None)."""
    if tilts is None:
        return U
    return gp_unitary(tilts) @ ideal_itoffoli().conj().T @ U


def noisy_gate_channel(
    U: np.ndarray,
    noise: DeviceNoiseModel | None,
    tau_ns: float,
    tilts: GpTiltSet | None = None,
    relative_amplitude: float | None = None,
) -> QuantumChannel:
    """Decoherence applied after the (optionally GP-adjusted) unitary."""
    channel = ptm_of_unitary(gp_adjusted_unitary(U, tilts))
    if noise is not None:
        channel = three_qubit_decoherence(noise, tau_ns, relative_amplitude) @ channel
    return channel


def readout_confusion(noise: DeviceNoiseModel) -> np.ndarray:
    """Column-stochastic 8x8 matrix of P(measured | true) over (c1, t, c2)."""
    mats = []
    for p00, p11 in zip(noise.readout_p00, noise.readout_p11):
        if abs(p00 + p11 - 1.0) < 1e-12:
            raise ValueError("non-invertible readout")
        mats.append(np.array([[p00, 1.0 - p11], [1.0 - p00, p11]]))
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def correct_readout(counts: np.ndarray, confusion: np.ndarray) -> np.ndarray:
    """Invert the confusion matrix, clip negatives, and renormalize."""
    counts = np.asarray(counts, dtype=float)
    if np.any(counts < 0):
        raise ValueError("counts must be nonnegative")
    total = counts.sum()
    if total <= 0:
        raise ValueError("counts are empty")
    if abs(np.linalg.det(confusion)) < 1e-12:
        raise ValueError("non-invertible readout")
    raw = np.linalg.solve(confusion, counts / total)
    clipped = np.clip(raw, 0.0, None)
    return clipped / clipped.sum()


def sample_readout_counts(probs: np.ndarray, shots: int, rng: np.random.Generator,
                          confusion: np.ndarray | None = None) -> np.ndarray:
    """Multinomial counts of measured outcomes, with optional readout errors."""
    p = np.clip(np.asarray(probs, dtype=float), 0.0, None)
    p = p / p.sum()
    if confusion is not None:
        p = confusion @ p
        p = np.clip(p, 0.0, None)
        p = p / p.sum()
    return rng.multinomial(shots, p).astype(float)

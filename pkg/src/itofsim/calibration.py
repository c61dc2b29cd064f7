"""Five-step gate calibration against simulated conditional Rabi measurements.

The loop mirrors a hardware bring-up: every tuned parameter is adjusted by
scalar root finding on residuals built from *fitted* Rabi frequencies, never
from the model coefficients directly, so imperfections (ZZ tilts, shot noise)
propagate the same way they would in the lab.

Step summary, starting from a fixed first-control amplitude a_c1:
  1. fix a_c1, phi_c1 (sets the overall rate and hence the gate duration)
  2. tune a_c2 until Omega_01 = Omega_10
  3. sweep phi_c1 and phi_c2 by a common offset until the ZY quadratures
     vanish (checked by Hamiltonian tomography)
  4. tune the target X amplitude until Omega_11 = Omega_01
  5. tune the target Y amplitude until Omega_00 = 1.5 * Omega_01
Steps 2-5 repeat until the 1.5-ratio condition holds, then the duration is
set to one conditional rotation, tau = 2*pi/Omega_01, and virtual-Z angles
are fitted analytically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq, least_squares

from .core import basis_state, entanglement_fidelity
from .drive import (
    CONTROL_STATES,
    DEFAULT_DT,
    DEFAULT_RAMP,
    DriveModel,
    PulsePropagator,
    PulseSet,
    control_block_indices,
    conditional_rabi_frequencies,
    drive_hamiltonian,
    hamiltonian_from_pulses,
    ideal_itoffoli,
    virtual_z_sandwich,
)
from .noise import DeviceNoiseModel


class CalibrationError(RuntimeError):
    """Raised when a calibration step cannot converge; carries the step history."""

    def __init__(self, message: str, history: list | None = None):
        super().__init__(message)
        self.history = history or []


@dataclass(frozen=True)
class RabiTrace:
    """<Z_t> versus effective pulse duration for one control state."""

    durations: np.ndarray
    z_expectation: np.ndarray
    control_state: str

    def __post_init__(self):
        d = np.asarray(self.durations, dtype=float)
        z = np.asarray(self.z_expectation, dtype=float)
        if d.ndim != 1 or d.shape != z.shape:
            raise ValueError("durations and z_expectation must be equal-length 1D arrays")
        if np.any(np.diff(d) <= 0):
            raise ValueError("durations must be strictly increasing")
        object.__setattr__(self, "durations", d)
        object.__setattr__(self, "z_expectation", z)


@dataclass(frozen=True)
class RabiFit:
    omega: float
    amplitude: float
    offset: float
    phase0: float
    residual: float

    def __post_init__(self):
        if self.omega < 0:
            raise ValueError("omega must be nonnegative")
        if self.amplitude + abs(self.offset) > 1.0 + 1e-6:
            raise ValueError("amplitude plus |offset| exceeds 1")


@dataclass
class CalibrationStep:
    step: int
    parameter: str
    value: float
    iterations: int
    residual: float

    def as_dict(self) -> dict:
        return {
            "step": self.step,
            "parameter": self.parameter,
            "value": self.value,
            "iterations": self.iterations,
            "residual": self.residual,
        }


@dataclass(frozen=True)
class CalibratedGate:
    """Pulse parameters, duration, and virtual-Z frame of a calibrated gate."""

    pulses: PulseSet
    tau: float                 # effective duration, flat + ramp
    total_duration: float      # flat + 2*ramp
    vz_pre: float
    vz_post: float
    model: DriveModel
    fitted_omegas: dict[tuple[int, int], float]
    history: list[CalibrationStep] = field(default_factory=list)
    dt: float = DEFAULT_DT

    def unitary(self, include_zz: bool = True, sandwich: bool = True,
                dt: float | None = None) -> np.ndarray:
        prop = PulsePropagator(self.model, self.pulses, dt or self.dt, include_zz)
        U = prop.unitary_for_effective_duration(self.tau)
        if sandwich:
            U = virtual_z_sandwich(U, self.vz_pre, self.vz_post)
        return U

    def ratio_errors(self) -> dict[str, float]:
        om = self.fitted_omegas
        base = om[(0, 1)]
        return {
            "omega01_omega10": abs(om[(0, 1)] / om[(1, 0)] - 1.0),
            "omega11_omega01": abs(om[(1, 1)] / base - 1.0),
            "omega00_ratio": abs(om[(0, 0)] / (1.5 * base) - 1.0),
        }


def _control_label(control) -> tuple[int, int]:
    if isinstance(control, str):
        if len(control) != 2 or any(c not in "01" for c in control):
            raise ValueError(f"bad control state {control!r}")
        return int(control[0]), int(control[1])
    k, l = control
    return int(k), int(l)


def _zz_from_noise(noise: DeviceNoiseModel | None) -> tuple[float, float]:
    if noise is None:
        return 0.0, 0.0
    return noise.zz_angular()


def simulate_conditional_rabi(
    pulses: PulseSet,
    noise: DeviceNoiseModel | None = None,
    control: str | tuple[int, int] = "00",
    durations: Sequence[float] | None = None,
    shots: int | None = None,
    seed: int | np.random.Generator | None = None,
    dt: float = DEFAULT_DT,
) -> RabiTrace:
    """Evolve |control>|0>_t over a duration sweep and record <Z_t>.

    Durations are effective pulse lengths (flat + ramp). Without shots the
    exact expectation is returned; with shots each point is a binomial
    estimate. A noise model contributes its ZZ couplings to the Hamiltonian
    and damps <Z_t> by the target's Pauli-twirled relaxation factor.
    """
    k, l = _control_label(control)
    zz1, zz2 = _zz_from_noise(noise)
    model = hamiltonian_from_pulses(pulses, zz1, zz2)
    if durations is None:
        durations = default_rabi_durations(model, pulses.ramp)
    durations = np.asarray(durations, dtype=float)
    if durations.size == 0:
        raise ValueError("durations must be nonempty")

    prop = PulsePropagator(model, pulses, dt)
    i0, _ = control_block_indices(k, l)
    psi0 = basis_state(i0)
    zt = np.kron(np.kron(np.eye(2), np.diag([1.0, -1.0])), np.eye(2))

    zs = np.empty_like(durations)
    for j, tau in enumerate(durations):
        U = prop.unitary_for_effective_duration(tau)
        psi = U @ psi0
        z = float(np.real(psi.conj() @ (zt @ psi)))
        if noise is not None:
            total = tau + pulses.ramp
            z *= noise.target_z_decay(total)
        zs[j] = z

    if shots is not None:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        p_up = (1.0 + zs) / 2.0
        counts = rng.binomial(shots, np.clip(p_up, 0.0, 1.0))
        zs = 2.0 * counts / shots - 1.0

    return RabiTrace(durations, zs, f"{k}{l}")


def default_rabi_durations(model: DriveModel, ramp: float, n_points: int = 64) -> np.ndarray:
    """64 effective durations spanning two periods of the slowest oscillation."""
    omegas = conditional_rabi_frequencies(model)
    slowest = min(w for w in omegas.values() if w > 0) if any(omegas.values()) else None
    if slowest is None:
        raise ValueError("all drive amplitudes vanish; no oscillation to sample")
    span = 2.0 * (2.0 * math.pi / slowest)
    start = max(ramp, span / n_points)
    return np.linspace(start, start + span, n_points)


def fit_rabi(trace: RabiTrace) -> RabiFit:
    """Least-squares fit of offset + amplitude*cos(omega*tau + phase0).

    The frequency is initialized from the discrete spectrum of the trace; a
    flat trace (no spectral peak) raises 'no oscillation'.
    """
    tau = trace.durations
    z = trace.z_expectation
    if tau.size < 8:
        raise ValueError("need at least 8 points to fit")

    # FFT initialization on the (nearly) uniform grid
    dt_grid = float(np.mean(np.diff(tau)))
    centered = z - np.mean(z)
    spec = np.abs(np.fft.rfft(centered))
    freqs = 2.0 * math.pi * np.fft.rfftfreq(tau.size, d=dt_grid)
    spec[0] = 0.0
    peak = int(np.argmax(spec))
    # noise floor: an oscillation concentrates power in a few bins, so the
    # median of the rest is a leakage-robust floor estimate
    floor = float(np.median(spec[1:]))
    if spec[peak] < 6.0 * floor + 1e-9 or spec[peak] < 1e-6:
        raise ValueError("no oscillation")
    omega0 = freqs[peak]

    # phase/amplitude init by linear regression at fixed omega0
    c, s = np.cos(omega0 * tau), np.sin(omega0 * tau)
    design = np.column_stack([c, s, np.ones_like(tau)])
    (a_c, a_s, off0), *_ = np.linalg.lstsq(design, z, rcond=None)
    amp0 = math.hypot(a_c, a_s)
    phase0 = math.atan2(-a_s, a_c)

    def model(p):
        off, amp, om, ph = p
        return off + amp * np.cos(om * tau + ph)

    res = least_squares(lambda p: model(p) - z, x0=[off0, amp0, omega0, phase0],
                        method="lm", xtol=1e-14, ftol=1e-14)
    off, amp, om, ph = res.x
    if amp < 0:
        amp, ph = -amp, ph + math.pi
    if om < 0:
        om, ph = -om, -ph
    ph = math.remainder(ph, 2.0 * math.pi)
    if ph <= -math.pi:
        ph += 2.0 * math.pi
    rms = float(np.sqrt(np.mean((model([off, amp, om, ph]) - z) ** 2)))
    amp = min(amp, 1.0 - abs(off) + 1e-9)  # clamp against tiny overshoot from noise
    return RabiFit(omega=float(om), amplitude=float(amp), offset=float(off),
                   phase0=float(ph), residual=rms)


def hamiltonian_tomography(pulses: PulseSet, n_points: int = 64,
                           residual_threshold: float = 0.05) -> dict[str, float]:
    """Estimate drive coefficients from conditional target Bloch trajectories.

    For each control state the target Bloch vector is tracked under the
    square (full-amplitude) drive and fitted to a fixed-axis rotation
    v' = w x v; half-sums and half-differences across control states give the
    interaction coefficients.
    """
    model = hamiltonian_from_pulses(pulses)
    h = drive_hamiltonian(model)
    omegas = conditional_rabi_frequencies(model)
    fastest = max(omegas.values())
    if fastest == 0.0:
        raise ValueError("all drive amplitudes vanish")
    times = np.linspace(0.0, 2.0 * math.pi / fastest, n_points)

    w_half, V = np.linalg.eigh(0.5 * h)
    pauli_t = {
        "X": np.kron(np.kron(np.eye(2), np.array([[0, 1], [1, 0]])), np.eye(2)),
        "Y": np.kron(np.kron(np.eye(2), np.array([[0, -1j], [1j, 0]])), np.eye(2)),
        "Z": np.kron(np.kron(np.eye(2), np.diag([1.0, -1.0])), np.eye(2)),
    }

    omega_vecs = {}
    worst = 0.0
    for k, l in CONTROL_STATES:
        i0, _ = control_block_indices(k, l)
        psi0 = basis_state(i0)
        vecs = np.empty((n_points, 3))
        for j, t in enumerate(times):
            psi = (V * np.exp(-1j * w_half * t)) @ (V.conj().T @ psi0)
            vecs[j] = [float(np.real(psi.conj() @ (P @ psi))) for P in pauli_t.values()]
        # least squares for w in v' = w x v, using central differences
        dt_g = times[1] - times[0]
        vdot = (vecs[2:] - vecs[:-2]) / (2.0 * dt_g)
        vmid = vecs[1:-1]
        rows, rhs = [], []
        for v, dv in zip(vmid, vdot):
            # (w x v) = A(v) w with A built from the cross-product structure
            rows.append(np.array([[0.0, v[2], -v[1]],
                                  [-v[2], 0.0, v[0]],
                                  [v[1], -v[0], 0.0]]))
            rhs.append(dv)
        A = np.vstack(rows)
        b = np.concatenate(rhs)
        w_fit, res_sq, *_ = np.linalg.lstsq(A, b, rcond=None)
        scale = max(np.linalg.norm(b), 1e-12)
        rel = math.sqrt(float(res_sq[0])) / scale if res_sq.size else 0.0
        worst = max(worst, rel)
        omega_vecs[(k, l)] = w_fit

    if worst > residual_threshold:
        raise ValueError(f"non-rotational dynamics (residual {worst:.3f})")

    x = {kl: v[0] for kl, v in omega_vecs.items()}
    y = {kl: v[1] for kl, v in omega_vecs.items()}

    def combine(comp, s1, s2):
        return 0.25 * sum(s1[k] * s2[l] * comp[(k, l)] for k, l in CONTROL_STATES)

    plus = {0: 1.0, 1: 1.0}
    sign_c1 = {0: 1.0, 1: -1.0}
    sign_c2 = {0: 1.0, 1: -1.0}
    return {
        "ZX": combine(x, sign_c1, plus),
        "XZ": combine(x, plus, sign_c2),
        "IX": combine(x, plus, plus),
        "ZY": combine(y, sign_c1, plus),
        "YZ": combine(y, plus, sign_c2),
        "IY": combine(y, plus, plus),
    }


def gate_duration(omega_oth: float, ramp: float) -> float:
    """Total pulse duration for one conditional rotation at omega_oth.

    flat + ramp = 2*pi/omega_oth under the cosine-ramp area convention, so
    the total (flat + 2*ramp) exceeds the effective duration by one ramp.
    """
    if omega_oth <= 0:
        raise ValueError("omega_oth must be positive")
    tau_eff = 2.0 * math.pi / omega_oth
    if tau_eff < ramp:
        raise ValueError("pulse too short for ramps")
    return tau_eff + ramp


def fit_virtual_z(U: np.ndarray) -> tuple[float, float]:
    """Analytic virtual-Z angles aligning the |00>-block flip axis with +x.

    With the off-diagonal element B10 = <00,1|U|00,0> at angle psi past the
    ideal +i, the sandwich Rz(pi - psi) U Rz(pi + psi) reproduces i*X on the
    active block while the inactive blocks pick up a compensating -1 that
    joins the global phase.
    """
    i0, i1 = control_block_indices(0, 0)
    b10 = U[i1, i0]
    if abs(b10) < 1e-6:
        raise CalibrationError("gate does not flip the target for |00> controls")
    psi = float(np.angle(-1j * b10))
    return math.pi + psi, math.pi - psi


def _expand_bracket(f: Callable[[float], float], lo: float, hi: float,
                    max_expand: int = 40) -> tuple[float, float]:
    flo, fhi = f(lo), f(hi)
    for _ in range(max_expand):
        if flo == 0.0:
            return lo, lo
        if fhi == 0.0:
            return hi, hi
        if flo * fhi < 0:
            return lo, hi
        span = hi - lo
        lo = max(lo - 0.5 * span, 1e-9)
        hi = hi + 0.5 * span
        flo, fhi = f(lo), f(hi)
    raise CalibrationError("could not bracket a root while tuning")


def _root(f: Callable[[float], float], lo: float, hi: float) -> tuple[float, int]:
    lo, hi = _expand_bracket(f, lo, hi)
    if lo == hi:
        return lo, 1
    calls = 0

    def counted(xv):
        nonlocal calls
        calls += 1
        return f(xv)

    x = brentq(counted, lo, hi, xtol=1e-12, rtol=1e-13)
    return float(x), calls


def calibrate_itoffoli(
    a_c1: float,
    phi_c1: float = 0.0,
    noise: DeviceNoiseModel | None = None,
    seed: int | None = None,
    ramp: float = DEFAULT_RAMP,
    dt: float = DEFAULT_DT,
    shots: int | None = None,
    ratio_tol: float = 1e-3,
    max_iters: int = 10,
) -> CalibratedGate:
    """Run the five-step loop and return the calibrated gate.

    a_c1 sets the overall rate (the gate duration is inversely proportional
    to it). With a noise model, its ZZ couplings enter the simulated traces
    and the loop compensates them through the same fitted-frequency
    conditions used on hardware.
    """
    if a_c1 <= 0:
        raise ValueError("a_c1 must be positive")

    rng = np.random.default_rng(seed)
    history: list[CalibrationStep] = []

    # step 1: fix the first control drive; seed the rest at the ideal ratios
    alpha0 = a_c1 * math.cos(phi_c1)
    if alpha0 <= 0:
        raise ValueError("phi_c1 must leave a positive ZX component")
    pulses = PulseSet(
        a_c1=a_c1,
        a_c2=a_c1,
        a_t_x=alpha0,
        a_t_y=math.sqrt(27.0 / 5.0) * alpha0,
        phi_c1=phi_c1,
        phi_c2=phi_c1,
        ramp=ramp,
    )
    history.append(CalibrationStep(1, "a_c1", a_c1, 0, 0.0))

    def fitted_omega(p: PulseSet, control: tuple[int, int]) -> float:
        trace = simulate_conditional_rabi(
            p, noise=noise, control=control, shots=shots,
            seed=rng if shots else None, dt=dt,
        )
        return fit_rabi(trace).omega

    def all_omegas(p: PulseSet) -> dict[tuple[int, int], float]:
        return {kl: fitted_omega(p, kl) for kl in CONTROL_STATES}

    for outer in range(max_iters):
        # step 2: equalize the single-control-excited frequencies
        def resid2(a_c2, p=pulses):
            q = replace(p, a_c2=a_c2)
            return fitted_omega(q, (0, 1)) - fitted_omega(q, (1, 0))

        a_c2, it2 = _root(resid2, 0.5 * pulses.a_c2, 1.5 * pulses.a_c2)
        pulses = replace(pulses, a_c2=a_c2)
        history.append(CalibrationStep(2, "a_c2", a_c2, it2, abs(resid2(a_c2))))

        # step 3: common phase offset nulling the ZY quadratures
        base1, base2 = pulses.phi_c1, pulses.phi_c2

        def resid3(eta, p=pulses):
            q = replace(p, phi_c1=base1 + eta, phi_c2=base2 + eta)
            coeffs = hamiltonian_tomography(q)
            return coeffs["ZY"] + coeffs["YZ"]

        eta, it3 = _root(resid3, -0.2, 0.2)
        pulses = replace(pulses, phi_c1=base1 + eta, phi_c2=base2 + eta)
        history.append(CalibrationStep(3, "phase_offset", eta, it3, abs(resid3(0.0, pulses))))

        # step 4: target X amplitude
        def resid4(a_t_x, p=pulses):
            q = replace(p, a_t_x=a_t_x)
            return fitted_omega(q, (1, 1)) - fitted_omega(q, (0, 1))

        a_t_x, it4 = _root(resid4, 0.5 * pulses.a_t_x, 1.5 * pulses.a_t_x)
        pulses = replace(pulses, a_t_x=a_t_x)
        history.append(CalibrationStep(4, "a_t_x", a_t_x, it4, abs(resid4(a_t_x))))

        # step 5: target Y amplitude for the 1.5 ratio
        def resid5(a_t_y, p=pulses):
            q = replace(p, a_t_y=a_t_y)
            return fitted_omega(q, (0, 0)) - 1.5 * fitted_omega(q, (0, 1))

        a_t_y, it5 = _root(resid5, 0.5 * pulses.a_t_y, 1.5 * pulses.a_t_y)
        pulses = replace(pulses, a_t_y=a_t_y)
        history.append(CalibrationStep(5, "a_t_y", a_t_y, it5, abs(resid5(a_t_y))))

        omegas = all_omegas(pulses)
        base = omegas[(0, 1)]
        errs = [
            abs(omegas[(0, 1)] / omegas[(1, 0)] - 1.0),
            abs(omegas[(1, 1)] / base - 1.0),
            abs(omegas[(0, 0)] / (1.5 * base) - 1.0),
        ]
        history.append(CalibrationStep(0, "ratio_check", max(errs), outer + 1, max(errs)))
        if max(errs) < ratio_tol:
            break
    else:
        raise CalibrationError(
            f"calibration did not converge in {max_iters} loops", history)

    # gate duration from the fitted single-excited-control frequency
    omega_oth = omegas[(0, 1)]
    total = gate_duration(omega_oth, ramp)
    tau_eff = total - ramp
    pulses = pulses.with_flat(tau_eff - ramp)

    zz1, zz2 = _zz_from_noise(noise)
    model = hamiltonian_from_pulses(pulses, zz1, zz2)
    prop = PulsePropagator(model, pulses, dt)
    raw = prop.unitary_for_effective_duration(tau_eff)
    vz_pre, vz_post = fit_virtual_z(raw)
    history.append(CalibrationStep(6, "tau_eff", tau_eff, 1, 0.0))

    return CalibratedGate(
        pulses=pulses,
        tau=tau_eff,
        total_duration=total,
        vz_pre=vz_pre,
        vz_post=vz_post,
        model=model,
        fitted_omegas=omegas,
        history=history,
        dt=dt,
    )


def calibrated_gate_fidelity(gate: CalibratedGate, include_zz: bool = True) -> float:
    """Entanglement fidelity of the sandwiched gate against the ideal target."""
    return entanglement_fidelity(gate.unitary(include_zz=include_zz), ideal_itoffoli())

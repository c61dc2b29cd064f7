"""Gate characterization: truth table, cycle benchmarking, PTM tomography.

Cycle benchmarking composes, per three-qubit Pauli channel k, sequences of
depth m that alternate uniformly random Pauli twirls with the gate channel.
The ideal part of every cycle is undone in the estimation frame (the net
twirl is folded classically into the measured observable, the ideal gate
inverse is applied channel-side), so the per-cycle error is the twirled
composition of the actual channel with the ideal inverse. Expectations of
channel k then decay as A * p_k^m, and the mean of p_k over all 64 channels
estimates the process fidelity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .channels import (
    QuantumChannel,
    choi_to_ptm,
    pauli_commutation_signs,
    ptm_of_unitary,
    ptm_to_choi,
    apply_channel_to_state_index,
)
from .core import PauliString, kron, normalized_pauli_basis, rz
from .drive import ideal_itoffoli
from .noise import DeviceNoiseModel, correct_readout, readout_confusion, sample_readout_counts

# Bloch rows (normalized Pauli coefficients) of the single-qubit states used
# to prepare +1 eigenstates: |0> for I and Z, |+x>, |+y> for X, Y.
_EIGENSTATE_ROWS = {
    "I": np.array([1.0, 0.0, 0.0, 1.0]) / math.sqrt(2.0),
    "X": np.array([1.0, 1.0, 0.0, 0.0]) / math.sqrt(2.0),
    "Y": np.array([1.0, 0.0, 1.0, 0.0]) / math.sqrt(2.0),
    "Z": np.array([1.0, 0.0, 0.0, 1.0]) / math.sqrt(2.0),
}


@dataclass(frozen=True)
class CbConfig:
    depths: tuple[int, ...] = (2, 4, 16, 32)
    samples_per_depth: int = 30
    shots: int | None = None
    seed: int = 0

    def __post_init__(self):
        if len(self.depths) < 2:
            raise ValueError("need at least two depths")
        if any(m < 2 or m % 2 for m in self.depths):
            raise ValueError("depths must be even and at least 2")
        if self.samples_per_depth < 1:
            raise ValueError("samples_per_depth must be positive")


@dataclass(frozen=True)
class CbChannelFit:
    label: str
    a: float
    p: float
    stderr: float
    ok: bool


@dataclass(frozen=True)
class CbResult:
    fits: tuple[CbChannelFit, ...]
    aggregate: float
    stderr_fit: float
    stderr_samples: float
    n_flagged: int
    config: CbConfig

    def pauli_fidelities(self) -> dict[str, float]:
        return {f.label: f.p for f in self.fits}


@dataclass(frozen=True)
class TruthTable:
    """Column-stochastic matrix: probs[out, in] over computational states."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (8, 8):
            raise ValueError("truth table must be 8x8")
        if np.any(p < -1e-9) or np.max(np.abs(p.sum(axis=0) - 1.0)) > 1e-9:
            raise ValueError("columns must be probability distributions")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)


def ideal_truth_table() -> TruthTable:
    """Permutation table of the target flip on |00> controls."""
    p = np.eye(8)
    p[0, 0] = p[2, 2] = 0.0
    p[0, 2] = p[2, 0] = 1.0
    return TruthTable(p)


def truth_table(
    channel: QuantumChannel,
    shots: int | None = None,
    readout: DeviceNoiseModel | None = None,
    seed: int | np.random.Generator | None = None,
) -> TruthTable:
    """Computational-basis input/output populations of a three-qubit channel.

    With a readout model, measurement errors are applied and then corrected
    by constrained inversion, matching how experimental tables are produced.
    """
    if channel.dim != 64:
        raise ValueError("need a three-qubit channel")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    confusion = readout_confusion(readout) if readout is not None else None
    cols = []
    for j in range(8):
        pops = apply_channel_to_state_index(channel, j)
        if shots is None:
            measured = confusion @ pops if confusion is not None else pops
        else:
            measured = sample_readout_counts(pops, shots, rng, confusion)
        if confusion is not None:
            col = correct_readout(measured, confusion)
        else:
            col = np.clip(measured, 0.0, None)
            col = col / col.sum()
        cols.append(col)
    return TruthTable(np.column_stack(cols))


def truth_table_fidelity(tt: TruthTable, ideal: TruthTable | None = None) -> float:
    """Fidelity of elementwise square roots of the tables, |sum sqrt.sqrt / d|^2."""
    if ideal is None:
        ideal = ideal_truth_table()
    overlap = np.sum(np.sqrt(tt.probs) * np.sqrt(ideal.probs))
    return float((overlap / 8.0) ** 2)


def fit_exponential_decay(
    points: Sequence[tuple[float, float]],
    sigmas: Sequence[float] | None = None,
) -> tuple[float, float, float]:
    """Fit A * p^m to (m, value) pairs by least squares in the log domain.

    Returns (A, p, stderr_p). Nonpositive values are dropped; if none remain
    the fit fails. Supplied sigmas weight the fit; otherwise the parameter
    error comes from the residual scatter. p is clipped to [0, 1.05].
    """
    pts = [(float(m), float(v)) for m, v in points]
    if len({m for m, _ in pts}) < 3:
        raise ValueError("need at least 3 distinct depths")
    keep = [i for i, (_, v) in enumerate(pts) if v > 0]
    if not keep:
        raise ValueError("no positive decay values")
    if len(keep) < 2:
        raise ValueError("too few positive decay values to fit")
    ms = np.array([pts[i][0] for i in keep])
    vs = np.array([pts[i][1] for i in keep])
    ys = np.log(vs)
    if sigmas is not None:
        sig = np.array([max(float(sigmas[i]), 0.0) for i in keep])
        w = np.where(sig > 0, 1.0 / np.maximum(sig / vs, 1e-12), 1e12)
        w = np.minimum(w, 1e12)
    else:
        w = np.ones_like(ys)

    X = np.column_stack([np.ones_like(ms), ms])
    Xw = X * w[:, None]
    yw = ys * w
    coef, *_ = np.linalg.lstsq(Xw, yw, rcond=None)
    log_a, log_p = coef
    resid = ys - X @ coef
    dof = max(len(keep) - 2, 1)
    if sigmas is not None and np.any(np.array([sigmas[i] for i in keep]) > 0):
        cov = np.linalg.inv(Xw.T @ Xw)
    else:
        s2 = float(resid @ resid) / dof
        gram = np.linalg.inv(X.T @ X)
        cov = s2 * gram
    p = float(np.clip(math.exp(log_p), 0.0, 1.05))
    stderr_p = float(p * math.sqrt(max(cov[1, 1], 0.0)))
    return float(math.exp(log_a)), p, stderr_p


def _prep_vector(label: str) -> np.ndarray:
    """Normalized Pauli vector of the +1 eigenstate preparation for a channel."""
    rows = [_EIGENSTATE_ROWS[c] for c in label]
    v = rows[0]
    for r in rows[1:]:
        v = np.kron(v, r)
    return v


def cb_run(
    gate_channel: QuantumChannel | None,
    config: CbConfig,
    include_gate: bool = True,
    twirl_noise: QuantumChannel | None = None,
    ideal_gate: np.ndarray | None = None,
) -> CbResult:
    """Cycle benchmarking of a three-qubit channel (or of the twirl-only reference).

    For every Pauli channel k the +1 eigenstate of k is prepared, depth-m
    sequences alternate random Pauli twirls (optionally carrying their own
    noise) with the gate channel, and the expectation of k is read out in
    the net estimation frame. pass include_gate=False for the reference run.
    """
    if include_gate:
        if gate_channel is None or gate_channel.dim != 64:
            raise ValueError("need a three-qubit gate channel")
        r_gate = gate_channel.ptm
        ideal = ideal_itoffoli() if ideal_gate is None else ideal_gate
        r_ideal_inv = ptm_of_unitary(ideal).ptm.T
    else:
        r_gate = None
        r_ideal_inv = None
    r_twirl = twirl_noise.ptm if twirl_noise is not None else None

    signs = pauli_commutation_signs(3)
    rng = np.random.default_rng(config.seed)

    fits: list[CbChannelFit] = []
    n_flagged = 0
    sem_sq_sum = 0.0
    for k in range(64):
        label = str(PauliString.from_index(k))
        prep = _prep_vector(label)
        means, sems = [], []
        for m in config.depths:
            vals = np.empty(config.samples_per_depth)
            for s in range(config.samples_per_depth):
                v = prep.copy()
                twirls = rng.integers(0, 64, size=m)
                for t in twirls:
                    st = signs[t]
                    v *= st
                    if r_twirl is not None:
                        v = r_twirl @ v
                    if include_gate:
                        v = r_gate @ v
                        v = r_ideal_inv @ v
                    v *= st
                expval = float(v[k] * math.sqrt(8.0))
                if config.shots is not None:
                    p_up = np.clip((1.0 + expval) / 2.0, 0.0, 1.0)
                    hits = rng.binomial(config.shots, p_up)
                    expval = 2.0 * hits / config.shots - 1.0
                vals[s] = expval
            means.append(float(np.mean(vals)))
            sems.append(float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
                        if len(vals) > 1 else 0.0)
        try:
            a, p, stderr = fit_exponential_decay(list(zip(config.depths, means)))
            _, _, stderr_sem = fit_exponential_decay(
                list(zip(config.depths, means)), sigmas=sems)
            sem_sq_sum += stderr_sem**2
            fits.append(CbChannelFit(label=label, a=a, p=p, stderr=stderr, ok=True))
        except ValueError:
            fits.append(CbChannelFit(label=label, a=float("nan"), p=float("nan"),
                                     stderr=float("nan"), ok=False))
            n_flagged += 1

    good = [f for f in fits if f.ok]
    if not good:
        raise ValueError("every Pauli channel fit failed")
    aggregate = float(np.mean([f.p for f in good]))
    stderr_fit = float(math.sqrt(sum(f.stderr**2 for f in good)) / len(good))
    stderr_samples = float(math.sqrt(sem_sq_sum) / len(good))
    return CbResult(fits=tuple(fits), aggregate=aggregate, stderr_fit=stderr_fit,
                    stderr_samples=stderr_samples, n_flagged=n_flagged, config=config)


def cb_process_fidelity(itof: CbResult, ref: CbResult) -> tuple[float, float]:
    """SPAM- and twirl-error-free fidelity: mean over k of p_itof / p_ref."""
    ratios, variances = [], []
    for fi, fr in zip(itof.fits, ref.fits):
        if fi.label != fr.label:
            raise ValueError("channel sets differ")
        if not (fi.ok and fr.ok):
            continue
        if fr.p == 0.0:
            raise ValueError(f"reference fidelity vanishes for channel {fr.label}")
        r = fi.p / fr.p
        ratios.append(r)
        variances.append(r * r * ((fi.stderr / fi.p) ** 2 + (fr.stderr / fr.p) ** 2)
                         if fi.p > 0 else 0.0)
    if not ratios:
        raise ValueError("no overlapping valid channels")
    mean = float(np.mean(ratios))
    stderr = float(math.sqrt(sum(variances)) / len(ratios))
    return mean, stderr


# ---------------------------------------------------------------------------
# PTM tomography
# ---------------------------------------------------------------------------

_X90 = np.array([[1, -1j], [-1j, 1]], dtype=complex) / math.sqrt(2.0)
_X180 = np.array([[0, -1j], [-1j, 0]], dtype=complex)
_Y90 = np.array([[1, -1], [1, 1]], dtype=complex) / math.sqrt(2.0)
_PREP_OPS = (np.eye(2, dtype=complex), _X90, _X180, _Y90)

# measurement basis changes W with P = W diag(1,-1) W^dag
_MEAS_W = {
    "X": np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2.0),
    "Y": np.array([[1, 1], [1j, -1j]], dtype=complex) / math.sqrt(2.0),
    "Z": np.eye(2, dtype=complex),
}

_MEAS_SETTINGS = [(a, b, c) for a in "XYZ" for b in "XYZ" for c in "XYZ"]


def _prep_unitaries() -> list[np.ndarray]:
    out = []
    for i in range(64):
        sel = (i // 16, (i // 4) % 4, i % 4)
        out.append(kron([_PREP_OPS[s] for s in sel]))
    return out


def _parity_signs(support: tuple[bool, bool, bool]) -> np.ndarray:
    signs = np.ones(8)
    for z in range(8):
        bits = ((z >> 2) & 1, (z >> 1) & 1, z & 1)
        par = sum(b for b, s in zip(bits, support) if s) % 2
        signs[z] = -1.0 if par else 1.0
    return signs


def ptm_tomography(
    channel: QuantumChannel,
    shots: int | None = None,
    readout: DeviceNoiseModel | None = None,
    seed: int | np.random.Generator | None = None,
) -> QuantumChannel:
    """Reconstruct a three-qubit channel from 64 preparations and Pauli readout.

    Preparations apply {I, X90, X180, Y90} per qubit to |000>; outputs are
    measured in all 27 product Pauli bases (every compatible setting
    contributes to each Pauli expectation). The linear-inversion estimate is
    projected onto the CPTP set by alternating Choi-space projections.
    """
    if channel.dim != 64:
        raise ValueError("need a three-qubit channel")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    confusion = readout_confusion(readout) if readout is not None else None
    basis = normalized_pauli_basis(3)

    preps = _prep_unitaries()
    prep_vecs = np.empty((64, 64))
    zero = np.zeros((8, 8), dtype=complex)
    zero[0, 0] = 1.0
    for j, V in enumerate(preps):
        rho = V @ zero @ V.conj().T
        prep_vecs[:, j] = [np.real(np.trace(p @ rho)) for p in basis]
    cond = np.linalg.cond(prep_vecs)
    if cond > 1e6:
        raise ValueError("preparation set is rank deficient")

    # P(outcome z) for each (prep, measurement setting), exact or sampled
    labels = [str(PauliString.from_index(k)) for k in range(64)]
    supports = {lab: tuple(c != "I" for c in lab) for lab in labels}
    parity = {sup: _parity_signs(sup) for sup in {s for s in supports.values()}}

    est_sum = np.zeros((64, 64))
    est_cnt = np.zeros((64, 64))
    out_states = []
    for j in range(64):
        v_out = channel.ptm @ prep_vecs[:, j]
        rho = np.zeros((8, 8), dtype=complex)
        for c, p in zip(v_out, basis):
            rho += c * p
        out_states.append(rho)

    for setting in _MEAS_SETTINGS:
        W = kron([_MEAS_W[s] for s in setting])
        for j in range(64):
            probs = np.clip(np.real(np.diag(W.conj().T @ out_states[j] @ W)), 0.0, None)
            probs = probs / probs.sum()
            if shots is None:
                measured = confusion @ probs if confusion is not None else probs
            else:
                measured = sample_readout_counts(probs, shots, rng, confusion)
            freqs = correct_readout(measured, confusion) if confusion is not None \
                else measured / measured.sum()
            for k in range(1, 64):
                lab = labels[k]
                if any(c != "I" and c != s for c, s in zip(lab, setting)):
                    continue
                sup = supports[lab]
                est_sum[k, j] += float(parity[sup] @ freqs)
                est_cnt[k, j] += 1.0

    M = np.empty((64, 64))
    M[0, :] = 1.0 / math.sqrt(8.0)
    with np.errstate(invalid="ignore"):
        M[1:, :] = est_sum[1:, :] / est_cnt[1:, :] / math.sqrt(8.0)

    R, *_ = np.linalg.lstsq(prep_vecs.T, M.T, rcond=None)
    return cptp_project(QuantumChannel(R.T))


def _project_tp(choi: np.ndarray, d: int) -> np.ndarray:
    """Orthogonal projection onto the affine trace-preserving set."""
    tr_out = np.einsum("aiaj->ij", choi.reshape(d, d, d, d))
    return choi + np.kron(np.eye(d) / d, np.eye(d) / d - tr_out)


def _project_cp(choi: np.ndarray) -> np.ndarray:
    """Projection onto the positive-semidefinite cone (clip Choi eigenvalues)."""
    herm = (choi + choi.conj().T) / 2.0
    w, V = np.linalg.eigh(herm)
    if w[0] >= 0:
        return herm
    return (V * np.clip(w, 0.0, None)) @ V.conj().T


def cptp_project(channel: QuantumChannel, max_iters: int = 200,
                 tol: float = 1e-10) -> QuantumChannel:
    """Project a PTM onto the nearest CPTP channel (Frobenius distance).

    Dykstra's alternating projections in Choi space between the affine TP
    set and the PSD cone; the correction term is what makes the limit the
    nearest point of the intersection rather than an arbitrary one.
    """
    d = channel.hilbert_dim
    x = ptm_to_choi(channel.ptm)
    corr = np.zeros_like(x)
    prev = x
    for _ in range(max_iters):
        y = _project_tp(x, d)
        x = _project_cp(y + corr)
        corr = y + corr - x
        move = float(np.max(np.abs(x - prev)))
        prev = x
        if move < tol:
            break
    # land exactly on the TP set; the CP violation left behind is O(tol)
    return QuantumChannel(choi_to_ptm(_project_tp(x, d)))


def monte_carlo_uncertainty(
    estimator: Callable[[np.random.Generator], float],
    runs: int,
    seed: int = 0,
) -> tuple[float, float]:
    """Re-run an estimator with independent generators; report mean and std."""
    if runs < 2:
        raise ValueError("need at least 2 runs")
    seqs = np.random.SeedSequence(seed).spawn(runs)
    vals = np.array([float(estimator(np.random.default_rng(s))) for s in seqs])
    return float(np.mean(vals)), float(np.std(vals, ddof=1))

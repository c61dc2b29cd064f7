"""Simulation and analysis toolkit for cross-resonance three-qubit iToffoli gates."""

from .core import (
    PauliString,
    entanglement_fidelity,
    expm_hermitian,
    kron,
    pauli_matrix,
    random_haar_unitary,
)
from .channels import (
    QuantumChannel,
    depolarizing_channel,
    identity_channel,
    ptm_of_unitary,
    ptm_process_fidelity,
    twirl_channel,
)
from .drive import (
    DriveModel,
    EffectiveTargetSet,
    PulseSet,
    build_hamiltonian,
    conditional_rabi_frequencies,
    effective_target_hamiltonians,
    evolve_pulse,
    hamiltonian_from_pulses,
    ideal_itoffoli,
    toffoli,
    virtual_z_sandwich,
)
from .calibration import (
    CalibratedGate,
    CalibrationError,
    RabiFit,
    RabiTrace,
    calibrate_itoffoli,
    fit_rabi,
    gate_duration,
    hamiltonian_tomography,
    simulate_conditional_rabi,
)
from .noise import (
    DeviceNoiseModel,
    GpTiltSet,
    coherence_limit,
    correct_readout,
    decoherence_ptm,
    gp_error,
    gp_unitary,
    noisy_gate_channel,
    readout_confusion,
    tilt_from_amplitude,
    tilts_from_unitary,
)
from .benchmarking import (
    CbConfig,
    CbResult,
    TruthTable,
    cb_process_fidelity,
    cb_run,
    cptp_project,
    fit_exponential_decay,
    monte_carlo_uncertainty,
    ptm_tomography,
    truth_table,
    truth_table_fidelity,
)
from .synthesis import (
    AnsatzCircuit,
    SynthesisResult,
    ansatz_unitary,
    sample_clifford3,
    sweep_delta,
    synthesize,
    threshold_depth,
)

__version__ = "0.1.0"

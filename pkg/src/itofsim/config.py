"""Run configuration: one JSON file with one block per subsystem.

Defaults reproduce the reference device (coherence times, ZZ couplings,
readout fidelities) and the standard benchmarking settings, so a run with no
config file exercises the headline scenario.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .benchmarking import CbConfig
from .noise import DeviceNoiseModel, UnderDriveEntry


class ConfigError(ValueError):
    """Invalid configuration; the message carries the offending field path."""


@dataclass(frozen=True)
class PulseConfig:
    a_c1: float = 2.0 * math.pi / (353.0 * math.sqrt(32.0 / 5.0))
    phi_c1: float = 0.0
    ramp: float = 30.0

    def __post_init__(self):
        if self.a_c1 <= 0:
            raise ConfigError("pulse.a_c1: must be positive")
        if self.ramp < 0:
            raise ConfigError("pulse.ramp: must be nonnegative")


@dataclass(frozen=True)
class SimulationConfig:
    dt: float = 0.1
    shots: int | None = None
    seed: int = 0
    ratio_tol: float = 1e-3

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError("simulation.dt: must be positive")
        if self.shots is not None and self.shots < 1:
            raise ConfigError("simulation.shots: must be positive when set")


@dataclass(frozen=True)
class SynthesisConfig:
    n_targets: int = 50
    restarts: int = 20
    m_max: int = 12
    delta_grid: tuple[float, ...] = tuple(0.25 * i for i in range(13))

    def __post_init__(self):
        if self.n_targets < 1:
            raise ConfigError("synthesis.n_targets: must be positive")
        if self.restarts < 1:
            raise ConfigError("synthesis.restarts: must be positive")
        if self.m_max < 1:
            raise ConfigError("synthesis.m_max: must be positive")
        if any(v < 0 for v in self.delta_grid):
            raise ConfigError("synthesis.delta_grid: values must be nonnegative")


@dataclass(frozen=True)
class RunConfig:
    device: DeviceNoiseModel = field(default_factory=DeviceNoiseModel.default)
    pulse: PulseConfig = field(default_factory=PulseConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    cb: CbConfig = field(default_factory=CbConfig)
    synthesis: SynthesisConfig = field(default_factory=SynthesisConfig)
    error_budget_taus: tuple[float, ...] = (482.0, 353.0, 280.0, 243.0)
    output_dir: str = "results"
    # duration of the noisy single-qubit twirl gates in the CB reference cycle
    twirl_gate_ns: float = 30.0
    # drive amplitude corresponding to relative amplitude 1.0 in the
    # under-drive coherence table (default puts the reference gate at 0.3)
    amplitude_reference: float = PulseConfig().a_c1 / 0.3

    def relative_amplitude(self, a_c1: float) -> float:
        return a_c1 / self.amplitude_reference


def _require_mapping(obj, path: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object")
    return obj


def _triple(obj, path: str) -> tuple[float, float, float]:
    if not isinstance(obj, (list, tuple)) or len(obj) != 3:
        raise ConfigError(f"{path}: expected a list of three numbers (c1, t, c2)")
    try:
        return tuple(float(v) for v in obj)  # type: ignore[return-value]
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: expected numbers") from None


_DEVICE_FIELDS = {"t1_us", "t2_echo_us", "zz_c1t_khz", "zz_tc2_khz",
                  "readout_p00", "readout_p11", "under_drive",
                  "amplitude_reference"}


def _device_from_dict(block: dict) -> DeviceNoiseModel:
    extra = set(block) - _DEVICE_FIELDS
    if extra:
        raise ConfigError(f"device.{sorted(extra)[0]}: unknown field")
    defaults = DeviceNoiseModel.default()
    under = []
    for i, entry in enumerate(block.get("under_drive", [])):
        entry = _require_mapping(entry, f"device.under_drive[{i}]")
        try:
            under.append(UnderDriveEntry(
                relative_amplitude=float(entry["relative_amplitude"]),
                t1_us=_triple(entry["t1_us"], f"device.under_drive[{i}].t1_us"),
                t2_echo_us=_triple(entry["t2_echo_us"],
                                   f"device.under_drive[{i}].t2_echo_us"),
            ))
        except KeyError as exc:
            raise ConfigError(f"device.under_drive[{i}].{exc.args[0]}: missing") from None
    try:
        return DeviceNoiseModel(
            t1_us=_triple(block.get("t1_us", defaults.t1_us), "device.t1_us"),
            t2_echo_us=_triple(block.get("t2_echo_us", defaults.t2_echo_us),
                               "device.t2_echo_us"),
            zz_c1t_khz=float(block.get("zz_c1t_khz", defaults.zz_c1t_khz)),
            zz_tc2_khz=float(block.get("zz_tc2_khz", defaults.zz_tc2_khz)),
            readout_p00=_triple(block.get("readout_p00", defaults.readout_p00),
                                "device.readout_p00"),
            readout_p11=_triple(block.get("readout_p11", defaults.readout_p11),
                                "device.readout_p11"),
            frequency_ghz=defaults.frequency_ghz,
            anharmonicity_mhz=defaults.anharmonicity_mhz,
            under_drive=tuple(under),
        )
    except ValueError as exc:
        raise ConfigError(f"device: {exc}") from None


def config_from_dict(data: dict) -> RunConfig:
    data = _require_mapping(data, "config")
    known = {"device", "pulse", "simulation", "cb", "synthesis",
             "error_budget_taus", "output_dir"}
    for key in data:
        if key not in known:
            raise ConfigError(f"{key}: unknown configuration block")

    device = _device_from_dict(_require_mapping(data.get("device", {}), "device"))

    pb = _require_mapping(data.get("pulse", {}), "pulse")
    pulse = PulseConfig(**{k: float(v) for k, v in pb.items()
                           if k in ("a_c1", "phi_c1", "ramp")})
    extra = set(pb) - {"a_c1", "phi_c1", "ramp"}
    if extra:
        raise ConfigError(f"pulse.{sorted(extra)[0]}: unknown field")

    sb = _require_mapping(data.get("simulation", {}), "simulation")
    extra = set(sb) - {"dt", "shots", "seed", "ratio_tol"}
    if extra:
        raise ConfigError(f"simulation.{sorted(extra)[0]}: unknown field")
    simulation = SimulationConfig(
        dt=float(sb.get("dt", 0.1)),
        shots=None if sb.get("shots") in (None, 0) else int(sb["shots"]),
        seed=int(sb.get("seed", 0)),
        ratio_tol=float(sb.get("ratio_tol", 1e-3)),
    )

    cbb = _require_mapping(data.get("cb", {}), "cb")
    extra = set(cbb) - {"depths", "samples_per_depth", "shots", "seed", "twirl_gate_ns"}
    if extra:
        raise ConfigError(f"cb.{sorted(extra)[0]}: unknown field")
    try:
        cb = CbConfig(
            depths=tuple(int(m) for m in cbb.get("depths", (2, 4, 16, 32))),
            samples_per_depth=int(cbb.get("samples_per_depth", 30)),
            shots=None if cbb.get("shots") in (None, 0) else int(cbb["shots"]),
            seed=int(cbb.get("seed", 0)),
        )
    except ValueError as exc:
        raise ConfigError(f"cb: {exc}") from None
    twirl_gate_ns = float(cbb.get("twirl_gate_ns", 30.0))
    if twirl_gate_ns < 0:
        raise ConfigError("cb.twirl_gate_ns: must be nonnegative")

    yb = _require_mapping(data.get("synthesis", {}), "synthesis")
    extra = set(yb) - {"n_targets", "restarts", "m_max", "delta_grid"}
    if extra:
        raise ConfigError(f"synthesis.{sorted(extra)[0]}: unknown field")
    synthesis = SynthesisConfig(
        n_targets=int(yb.get("n_targets", 50)),
        restarts=int(yb.get("restarts", 20)),
        m_max=int(yb.get("m_max", 12)),
        delta_grid=tuple(float(v) for v in
                         yb.get("delta_grid", [0.25 * i for i in range(13)])),
    )

    taus = tuple(float(v) for v in data.get("error_budget_taus",
                                            (482.0, 353.0, 280.0, 243.0)))
    if any(t <= 0 for t in taus):
        raise ConfigError("error_budget_taus: durations must be positive")

    defaults = RunConfig()
    amp_ref = float(_require_mapping(data.get("device", {}), "device")
                    .get("amplitude_reference", defaults.amplitude_reference))
    if amp_ref <= 0:
        raise ConfigError("device.amplitude_reference: must be positive")

    return RunConfig(
        device=device,
        pulse=pulse,
        simulation=simulation,
        cb=cb,
        synthesis=synthesis,
        error_budget_taus=taus,
        output_dir=str(data.get("output_dir", "results")),
        twirl_gate_ns=twirl_gate_ns,
        amplitude_reference=amp_ref,
    )


def load_config(path: str | Path | None) -> RunConfig:
    """Parse a JSON config file; None loads the built-in defaults."""
    if path is None:
        return RunConfig()
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return config_from_dict(data)

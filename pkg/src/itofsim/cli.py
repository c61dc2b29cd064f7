"""Command-line orchestration of the simulation and analysis pipelines.

Subcommands: calibrate, rabi, benchmark, error-budget, synthesize. Every
command reads one JSON config (``--config`` or the ITOFSIM_CONFIG
environment variable; built-in defaults otherwise), writes CSV/JSON results
plus companion PNG figures into ``--out``, and is deterministic for a fixed
config and seed.

Exit codes: 0 success, 1 configuration error, 2 convergence failure,
3 missing dependency artifact.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .benchmarking import (
    CbConfig,
    cb_process_fidelity,
    cb_run,
    monte_carlo_uncertainty,
    ptm_tomography,
    truth_table,
    truth_table_fidelity,
)
from .calibration import (
    CalibratedGate,
    CalibrationError,
    calibrate_itoffoli,
    simulate_conditional_rabi,
)
from .channels import ptm_of_unitary, ptm_process_fidelity
from .config import ConfigError, RunConfig, load_config
from .core import entanglement_fidelity
from .drive import CONTROL_STATES, DriveModel, PulseSet, ideal_itoffoli, toffoli
from .noise import (
    coherence_limit,
    noisy_gate_channel,
    three_qubit_decoherence,
    tilts_from_unitary,
    gp_error,
)
from . import reporting
from .synthesis import sweep_delta, threshold_depth

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CONVERGENCE = 2
EXIT_MISSING_ARTIFACT = 3

GATE_ARTIFACT = "calibrated_gate.json"


def _complex_matrix_to_json(U: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in U]


def _gate_to_json(gate: CalibratedGate) -> dict:
    return {
        "pulses": dataclasses.asdict(gate.pulses),
        "tau_eff": gate.tau,
        "total_duration": gate.total_duration,
        "vz_pre": gate.vz_pre,
        "vz_post": gate.vz_post,
        "model": dataclasses.asdict(gate.model),
        "fitted_omegas": {f"{k}{l}": w for (k, l), w in gate.fitted_omegas.items()},
        "dt": gate.dt,
        "unitary": _complex_matrix_to_json(gate.unitary()),
    }


def _gate_from_json(payload: dict) -> CalibratedGate:
    model = dict(payload["model"])
    if model.get("tilt_overrides") is not None:
        model["tilt_overrides"] = tuple(model["tilt_overrides"])
    return CalibratedGate(
        pulses=PulseSet(**payload["pulses"]),
        tau=payload["tau_eff"],
        total_duration=payload["total_duration"],
        vz_pre=payload["vz_pre"],
        vz_post=payload["vz_post"],
        model=DriveModel(**model),
        fitted_omegas={(int(k[0]), int(k[1])): w
                       for k, w in payload["fitted_omegas"].items()},
        history=[],
        dt=payload["dt"],
    )


def _load_gate(out_dir: Path) -> CalibratedGate:
    path = out_dir / GATE_ARTIFACT
    if not path.exists():
        raise FileNotFoundError(
            f"missing calibrated gate artifact {path}; run 'itofsim calibrate' first")
    return _gate_from_json(json.loads(path.read_text()))


def _calibrate(cfg: RunConfig, seed: int) -> CalibratedGate:
    return calibrate_itoffoli(
        a_c1=cfg.pulse.a_c1,
        phi_c1=cfg.pulse.phi_c1,
        noise=cfg.device,
        seed=seed,
        ramp=cfg.pulse.ramp,
        dt=cfg.simulation.dt,
        shots=cfg.simulation.shots,
        ratio_tol=cfg.simulation.ratio_tol,
    )


def _gate_channel(cfg: RunConfig, gate: CalibratedGate):
    """Noisy channel of the calibrated gate: decoherence after the full unitary."""
    U = gate.unitary()
    return noisy_gate_channel(U, cfg.device, gate.total_duration)


def cmd_calibrate(cfg: RunConfig, out: Path, seed: int, plots: bool) -> int:
    try:
        gate = _calibrate(cfg, seed)
    except CalibrationError as exc:
        report = {"converged": False, "error": str(exc),
                  "history": [s.as_dict() for s in exc.history]}
        reporting.write_json(out / "calibration_report.json", report)
        print(f"calibration failed: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE

    fid_ideal = entanglement_fidelity(gate.unitary(include_zz=False), ideal_itoffoli())
    fid_zz = entanglement_fidelity(gate.unitary(include_zz=True), ideal_itoffoli())
    report = {
        "converged": True,
        "tau_eff_ns": gate.tau,
        "total_duration_ns": gate.total_duration,
        "vz_pre_rad": gate.vz_pre,
        "vz_post_rad": gate.vz_post,
        "fitted_omegas_rad_per_ns": {f"{k}{l}": w
                                     for (k, l), w in gate.fitted_omegas.items()},
        "ratio_errors": gate.ratio_errors(),
        "fidelity_vs_ideal_no_zz": fid_ideal,
        "fidelity_vs_ideal_with_zz": fid_zz,
        "history": [s.as_dict() for s in gate.history],
    }
    reporting.write_json(out / "calibration_report.json", report)
    reporting.write_json(out / GATE_ARTIFACT, _gate_to_json(gate))
    print(f"calibrated gate: tau_eff = {gate.tau:.2f} ns, "
          f"F(ideal, no ZZ) = {fid_ideal:.6f}")
    return EXIT_OK


def cmd_rabi(cfg: RunConfig, out: Path, seed: int, plots: bool,
             control: str | None) -> int:
    try:
        gate = _load_gate(out)
    except FileNotFoundError:
        try:
            gate = _calibrate(cfg, seed)
        except CalibrationError as exc:
            print(f"calibration failed: {exc}", file=sys.stderr)
            return EXIT_CONVERGENCE

    controls = [control] if control else [f"{k}{l}" for k, l in CONTROL_STATES]
    rows = []
    traces = {}
    for c in controls:
        trace = simulate_conditional_rabi(
            gate.pulses, noise=cfg.device, control=c,
            shots=cfg.simulation.shots, seed=seed, dt=cfg.simulation.dt)
        traces[c] = (trace.durations, trace.z_expectation)
        rows.extend((c, float(t), float(z))
                    for t, z in zip(trace.durations, trace.z_expectation))

    csv = reporting.write_csv(
        out / "rabi_traces.csv", ("control", "tau_ns", "z"), rows,
        meta={"seed": seed, "shots": cfg.simulation.shots or "exact"})
    if plots:
        reporting.plot_rabi_traces(traces, out / "rabi_traces.png", tau_gate=gate.tau)
    print(f"wrote {csv}")
    return EXIT_OK


def cmd_benchmark(cfg: RunConfig, out: Path, seed: int, plots: bool,
                  protocol: str) -> int:
    try:
        gate = _load_gate(out)
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_MISSING_ARTIFACT
    channel = _gate_channel(cfg, gate)
    ideal = ptm_of_unitary(ideal_itoffoli())
    exact_fidelity = ptm_process_fidelity(ideal, channel)

    if protocol == "truth-table":
        tt = truth_table(channel, shots=cfg.simulation.shots,
                         readout=cfg.device, seed=seed)
        fid = truth_table_fidelity(tt)
        rows = [[format(i, "03b")] + [float(v) for v in tt.probs[i]] for i in range(8)]
        reporting.write_csv(
            out / "truth_table.csv",
            ["output"] + [format(j, "03b") for j in range(8)], rows,
            meta={"seed": seed, "shots": cfg.simulation.shots or "exact"})
        summary = {"truth_table_fidelity": fid,
                   "exact_process_fidelity": exact_fidelity}
        if cfg.simulation.shots:
            mean, std = monte_carlo_uncertainty(
                lambda rng: truth_table_fidelity(truth_table(
                    channel, shots=cfg.simulation.shots, readout=cfg.device, seed=rng)),
                runs=200, seed=seed)
            summary["monte_carlo"] = {"mean": mean, "std": std, "runs": 200}
        reporting.write_json(out / "truth_table_summary.json", summary)
        if plots:
            reporting.plot_truth_table(tt.probs, out / "truth_table.png")
        print(f"truth-table fidelity = {fid:.4f}")

    elif protocol == "cb":
        twirl = three_qubit_decoherence(cfg.device, cfg.twirl_gate_ns) \
            if cfg.twirl_gate_ns > 0 else None
        cb_cfg = dataclasses.replace(cfg.cb, seed=seed)
        res_gate = cb_run(channel, cb_cfg, include_gate=True, twirl_noise=twirl)
        res_ref = cb_run(None, dataclasses.replace(cb_cfg, seed=seed + 1),
                         include_gate=False, twirl_noise=twirl)
        fid, err = cb_process_fidelity(res_gate, res_ref)
        rows = [(f.label, f.a, f.p, f.stderr, int(f.ok)) for f in res_gate.fits]
        reporting.write_csv(out / "cb_channels.csv",
                            ("pauli", "amplitude", "p", "stderr", "ok"), rows,
                            meta={"seed": seed, "role": "twirled gate"})
        rows = [(f.label, f.a, f.p, f.stderr, int(f.ok)) for f in res_ref.fits]
        reporting.write_csv(out / "cb_reference_channels.csv",
                            ("pauli", "amplitude", "p", "stderr", "ok"), rows,
                            meta={"seed": seed, "role": "reference"})
        reporting.write_json(out / "cb_summary.json", {
            "twirled_aggregate": res_gate.aggregate,
            "twirled_stderr_fit": res_gate.stderr_fit,
            "twirled_stderr_samples": res_gate.stderr_samples,
            "reference_aggregate": res_ref.aggregate,
            "reference_stderr_fit": res_ref.stderr_fit,
            "process_fidelity": fid,
            "process_fidelity_stderr": err,
            "exact_process_fidelity": exact_fidelity,
            "n_flagged": res_gate.n_flagged + res_ref.n_flagged,
        })
        if plots:
            reporting.plot_cb_histogram(
                [f.p for f in res_gate.fits if f.ok],
                [f.p for f in res_ref.fits if f.ok],
                out / "cb_histogram.png")
        print(f"CB process fidelity = {fid:.4f} +- {err:.4f} "
              f"(exact channel value {exact_fidelity:.4f})")

    elif protocol == "ptm":
        recon = ptm_tomography(channel, shots=cfg.simulation.shots,
                               readout=cfg.device, seed=seed)
        fid = ptm_process_fidelity(ideal, recon)
        rows = [[i] + [float(v) for v in recon.ptm[i]] for i in range(64)]
        reporting.write_csv(out / "ptm_reconstructed.csv",
                            ["row"] + [str(j) for j in range(64)], rows,
                            meta={"seed": seed, "shots": cfg.simulation.shots or "exact"})
        reporting.write_json(out / "ptm_summary.json", {
            "f_ptm": fid,
            "exact_process_fidelity": exact_fidelity,
            "max_abs_difference_from_ideal": float(np.max(np.abs(
                ideal.ptm - recon.ptm))),
        })
        if plots:
            reporting.plot_ptm(recon.ptm, out / "ptm_reconstructed.png",
                               title="reconstructed PTM")
        print(f"F_PTM = {fid:.4f} (exact channel value {exact_fidelity:.4f})")

    return EXIT_OK


def cmd_error_budget(cfg: RunConfig, out: Path, seed: int, plots: bool) -> int:
    ideal = ptm_of_unitary(ideal_itoffoli())
    rows = []
    for tau in cfg.error_budget_taus:
        a_c1 = 2.0 * math.pi / (tau * math.sqrt(32.0 / 5.0)) / math.cos(cfg.pulse.phi_c1)
        rel_amp = cfg.relative_amplitude(a_c1)
        row = {"tau": tau, "flagged": False}
        try:
            gate = calibrate_itoffoli(
                a_c1=a_c1, phi_c1=cfg.pulse.phi_c1, noise=cfg.device, seed=seed,
                ramp=cfg.pulse.ramp, dt=cfg.simulation.dt,
                ratio_tol=cfg.simulation.ratio_tol)
        except CalibrationError:
            row["flagged"] = True
            rows.append(row)
            continue
        U = gate.unitary()
        row["gp_error"] = 1.0 - entanglement_fidelity(U, ideal_itoffoli())
        row["gp_error_model"] = gp_error(tilts_from_unitary(U))
        row["f_coherence_bare"] = coherence_limit(cfg.device, gate.total_duration)
        row["f_coherence_drive"] = coherence_limit(cfg.device, gate.total_duration,
                                                   relative_amplitude=rel_amp)
        channel = noisy_gate_channel(U, cfg.device, gate.total_duration,
                                     relative_amplitude=rel_amp)
        twirl = three_qubit_decoherence(cfg.device, cfg.twirl_gate_ns,
                                        relative_amplitude=rel_amp) \
            if cfg.twirl_gate_ns > 0 else None
        res_gate = cb_run(channel, dataclasses.replace(cfg.cb, seed=seed),
                          include_gate=True, twirl_noise=twirl)
        res_ref = cb_run(None, dataclasses.replace(cfg.cb, seed=seed + 1),
                         include_gate=False, twirl_noise=twirl)
        row["f_cb_sim"], _ = cb_process_fidelity(res_gate, res_ref)
        row["exact_fidelity"] = ptm_process_fidelity(ideal, channel)
        rows.append(row)

    csv_rows = [
        (r["tau"], r.get("f_cb_sim"), r.get("f_coherence_bare"),
         r.get("f_coherence_drive"), r.get("gp_error"), int(r["flagged"]))
        for r in rows
    ]
    reporting.write_csv(
        out / "error_budget.csv",
        ("tau", "F_cb_sim", "F_coherence_bare", "F_coherence_drive",
         "GP_error", "flagged"),
        csv_rows, meta={"seed": seed})
    if plots and any(not r["flagged"] for r in rows):
        reporting.plot_error_budget(rows, out / "error_budget.png")
    for r in rows:
        if r["flagged"]:
            print(f"tau = {r['tau']:.0f} ns: calibration failed (row flagged)")
        else:
            print(f"tau = {r['tau']:.0f} ns: F_cb = {r['f_cb_sim']:.4f}, "
                  f"GP = {r['gp_error']:.2e}, "
                  f"coherence(bare) = {r['f_coherence_bare']:.4f}")
    return EXIT_OK


def cmd_synthesize(cfg: RunConfig, out: Path, seed: int, plots: bool,
                   mode: str, threads: int) -> int:
    syn = cfg.synthesis
    if mode == "thresholds":
        curves = {}
        summary = {}
        rows = []
        for gate_name, G in (("toffoli", toffoli()), ("itoffoli", ideal_itoffoli())):
            for kind in ("clifford", "haar"):
                m_star, curve, flagged = threshold_depth(
                    G, kind, n_targets=syn.n_targets, m_max=syn.m_max,
                    restarts=syn.restarts, seed=seed, threads=threads,
                    stop_at_first=False)
                key = f"{gate_name}/{kind}"
                curves[key] = curve
                summary[key] = {"threshold_depth": m_star, "flagged": flagged}
                rows.extend((gate_name, kind, m, rate) for m, rate in curve)
                print(f"{key}: m* = {m_star} "
                      f"({'flagged' if flagged else 'monotone'})")
        reporting.write_csv(out / "synthesis_thresholds.csv",
                            ("gate", "target_kind", "m", "success_rate"), rows,
                            meta={"seed": seed, "n_targets": syn.n_targets,
                                  "restarts": syn.restarts})
        reporting.write_json(out / "synthesis_summary.json", summary)
        if plots:
            reporting.plot_threshold_curves(curves, out / "synthesis_thresholds.png")
    else:
        results = sweep_delta(list(syn.delta_grid), n_targets=syn.n_targets,
                              restarts=syn.restarts, seed=seed,
                              m_max=syn.m_max, threads=threads)
        rows = []
        for r in results:
            for kind, curve in (("clifford", r["cliff_curve"]),
                                ("haar", r["haar_curve"])):
                rows.extend((r["delta_over_alpha"], m, kind, rate)
                            for m, rate in curve)
            print(f"delta/alpha = {r['delta_over_alpha']:.2f}: "
                  f"m_cliff = {r['m_cliff']}, m_haar = {r['m_haar']}")
        reporting.write_csv(out / "delta_sweep.csv",
                            ("delta_over_alpha", "m", "target_kind", "success_rate"),
                            rows, meta={"seed": seed, "n_targets": syn.n_targets})
        reporting.write_json(out / "delta_sweep_summary.json", [
            {"delta_over_alpha": r["delta_over_alpha"],
             "m_cliff": r["m_cliff"], "m_haar": r["m_haar"]}
            for r in results])
        if plots:
            reporting.plot_delta_sweep(results, out / "delta_sweep.png")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="itofsim",
        description="Simulate, calibrate, and characterize a cross-resonance "
                    "three-qubit iToffoli gate.")
    parser.add_argument("--config", default=None,
                        help="JSON config path (default: $ITOFSIM_CONFIG or built-ins)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--out", default=None,
                        help="output directory (default: config output_dir)")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for independent work items")
    parser.add_argument("--no-plots", action="store_true",
                        help="skip figure rendering")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("calibrate", help="run the five-step calibration loop")
    p_rabi = sub.add_parser("rabi", help="conditional Rabi traces")
    p_rabi.add_argument("--control", choices=["00", "01", "10", "11"], default=None)
    p_bench = sub.add_parser("benchmark", help="characterize the calibrated gate")
    p_bench.add_argument("--protocol", choices=["truth-table", "cb", "ptm"],
                         required=True)
    sub.add_parser("error-budget", help="error budget over gate durations")
    p_syn = sub.add_parser("synthesize", help="gate-synthesis studies")
    p_syn.add_argument("--mode", choices=["thresholds", "delta-sweep"],
                       required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config_path = args.config or os.environ.get("ITOFSIM_CONFIG")
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out) if args.out else Path(cfg.output_dir)
    seed = args.seed if args.seed is not None else cfg.simulation.seed
    plots = not args.no_plots

    if args.command == "calibrate":
        return cmd_calibrate(cfg, out, seed, plots)
    if args.command == "rabi":
        return cmd_rabi(cfg, out, seed, plots, args.control)
    if args.command == "benchmark":
        return cmd_benchmark(cfg, out, seed, plots, args.protocol)
    if args.command == "error-budget":
        return cmd_error_budget(cfg, out, seed, plots)
    if args.command == "synthesize":
        return cmd_synthesize(cfg, out, seed, plots, args.mode, args.threads)
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())

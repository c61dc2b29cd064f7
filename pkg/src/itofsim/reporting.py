"""Result emission: CSV tables, JSON summaries, and companion figures.

CSV bodies are deterministic for a fixed config and seed; timestamps only
ever appear in '#'-prefixed metadata comment lines. Files are written
atomically (temp file in the same directory, then rename). Every table
writer has a plotting counterpart that renders a PNG next to the data file.
"""
from __future__ import annotations

import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _meta_lines(meta: dict | None) -> list[str]:
    lines = [f"# generated: {datetime.now(timezone.utc).isoformat(timespec='seconds')}"]
    for k, v in (meta or {}).items():
        lines.append(f"# {k}: {v}")
    return lines


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence],
              meta: dict | None = None) -> Path:
    path = Path(path)
    lines = _meta_lines(meta)
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")
    return path


def write_json(path: str | Path, payload: dict) -> Path:
    path = Path(path)
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


# ---------------------------------------------------------------------------
# Figures
# ---------------------------------------------------------------------------


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def plot_rabi_traces(traces: dict[str, tuple[np.ndarray, np.ndarray]],
                     path: str | Path, tau_gate: float | None = None) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    for label, (durations, z) in sorted(traces.items()):
        ax.plot(durations, z, marker="o", ms=2.5, lw=1.0,
                label=rf"$|{label}\rangle_c$")
    if tau_gate is not None:
        ax.axvline(tau_gate, color="k", ls="--", lw=1.0)
    ax.set_xlabel("pulse duration (ns)")
    ax.set_ylabel(r"$\langle Z_t \rangle$")
    ax.set_ylim(-1.05, 1.05)
    ax.legend(ncol=2, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)
    return Path(path)


def plot_truth_table(probs: np.ndarray, path: str | Path) -> Path:
    plt = _pyplot()
    labels = [format(i, "03b") for i in range(8)]
    fig = plt.figure(figsize=(6.5, 5.0))
    ax = fig.add_subplot(111, projection="3d")
    xs, ys = np.meshgrid(np.arange(8), np.arange(8))
    xs, ys = xs.ravel(), ys.ravel()
    heights = probs.T.ravel()  # group bars by input state
    ax.bar3d(xs - 0.35, ys - 0.35, np.zeros_like(heights), 0.7, 0.7, heights,
             color="#c23b3b", alpha=0.85, shade=True)
    ax.set_xticks(range(8))
    ax.set_xticklabels(labels, fontsize=7)
    ax.set_yticks(range(8))
    ax.set_yticklabels(labels, fontsize=7)
    ax.set_xlabel("input")
    ax.set_ylabel("output")
    ax.set_zlabel("probability")
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)
    return Path(path)


def plot_cb_histogram(p_gate: Sequence[float], p_ref: Sequence[float],
                      path: str | Path) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    bins = np.linspace(min(min(p_gate), min(p_ref)) - 1e-4, 1.0, 40)
    ax.hist(p_gate, bins=bins, histtype="step", cumulative=True, lw=1.5,
            label="twirled gate", color="#c23b3b")
    ax.hist(p_ref, bins=bins, histtype="step", cumulative=True, lw=1.5,
            label="reference", color="#3b63c2")
    ax.axvline(float(np.mean(p_gate)), color="#c23b3b", ls="-", lw=1.0)
    ax.axvline(float(np.mean(p_ref)), color="#3b63c2", ls="-", lw=1.0)
    ax.set_xlabel("Pauli channel fidelity")
    ax.set_ylabel("cumulative count")
    ax.legend(loc="upper left", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)
    return Path(path)


def plot_ptm(ptm: np.ndarray, path: str | Path, title: str = "") -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.0, 5.0))
    im = ax.imshow(ptm, cmap="RdBu_r", vmin=-1.0, vmax=1.0)
    ax.set_xlabel("input Pauli index")
    ax.set_ylabel("output Pauli index")
    if title:
        ax.set_title(title, fontsize=10)
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)
    return Path(path)


def plot_error_budget(rows: list[dict], path: str | Path) -> Path:
    plt = _pyplot()
    ok = [r for r in rows if not r.get("flagged")]
    taus = [r["tau"] for r in ok]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(taus, [r["f_cb_sim"] for r in ok], "o-", color="#c23b3b",
            label="simulated CB fidelity")
    ax.plot(taus, [r["f_coherence_bare"] for r in ok], "-", color="#3ba05c",
            label="coherence limit (bare)")
    ax.plot(taus, [r["f_coherence_drive"] for r in ok], "s--", color="#8a5a2b",
            label="coherence limit (under drive)")
    ax.plot(taus, [1.0 - r["gp_error"] - (1.0 - r["f_coherence_drive"]) for r in ok],
            "^:", color="#3b63c2", label="coherence + GP budget")
    ax.set_xlabel("gate duration (ns)")
    ax.set_ylabel("process fidelity")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)
    return Path(path)


def plot_threshold_curves(curves: dict[str, list[tuple[int, float]]],
                          path: str | Path) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    width = 0.8 / max(len(curves), 1)
    for idx, (label, curve) in enumerate(sorted(curves.items())):
        ms = [m for m, _ in curve]
        rates = [r for _, r in curve]
        ax.bar(np.array(ms) + (idx - (len(curves) - 1) / 2) * width, rates,
               width=width, label=label)
    ax.set_xlabel("ansatz depth m")
    ax.set_ylabel("synthesis success rate")
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)
    return Path(path)


def plot_delta_sweep(rows: list[dict], path: str | Path) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    xs = [r["delta_over_alpha"] for r in rows]
    mc = [r["m_cliff"] if r["m_cliff"] is not None else np.nan for r in rows]
    mh = [r["m_haar"] if r["m_haar"] is not None else np.nan for r in rows]
    ax.plot(xs, mc, "o-", color="#8a5a2b", label=r"$m_\mathrm{Cliff}$")
    ax.plot(xs, mh, "s-", color="#3ba05c", label=r"$m_\mathrm{Haar}$")
    ax.axvline(np.sqrt(27.0 / 5.0), color="#c23b3b", lw=1.2,
               label=r"$\delta/\alpha=\sqrt{27/5}$")
    ax.set_xlabel(r"$\delta/\alpha$")
    ax.set_ylabel("threshold depth")
    ax.legend(fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)
    return Path(path)

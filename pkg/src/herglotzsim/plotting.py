"""Static figures of a finished run, written to image files."""

from __future__ import annotations

from pathlib import Path
from typing import List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .lagrangian import energy  # noqa: E402
from .simulator import HybridTrajectory, Scenario  # noqa: E402


def _dense(traj: HybridTrajectory, points: int = 200):
    for seg in traj.segments:
        if seg.t1 > seg.t0:
            tt = np.linspace(seg.t0, seg.t1, points)
            yield seg, tt, np.array([seg.state_at(t).pack() for t in tt])


def plot_energy(traj: HybridTrajectory, scn: Scenario, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    for seg, tt, ys in _dense(traj):
        E = [energy(scn.sys, seg.state_at(t)) for t in tt]
        ax.plot(tt, E, color="C0", lw=1.2)
    for ev in traj.events:
        ax.axvline(ev.t_event, color="C3", lw=0.6, alpha=0.5)
    ax.set_xlabel("t")
    ax.set_ylabel("E = T + V")
    ax.set_title(f"{scn.name}: energy (events marked)")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_states(traj: HybridTrajectory, scn: Scenario, path: Path) -> Path:
    nq, n = scn.sys.nq, scn.sys.n
    fig, (ax_q, ax_v) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    for seg, tt, ys in _dense(traj):
        for i in range(nq):
            ax_q.plot(tt, ys[:, i], color=f"C{i}", lw=1.0, label=f"q{i}" if seg.index == 0 else None)
        for i in range(n):
            ax_v.plot(tt, ys[:, nq + i], color=f"C{i}", lw=1.0, label=f"v{i}" if seg.index == 0 else None)
    ax_q.set_ylabel("q")
    ax_v.set_ylabel("v")
    ax_v.set_xlabel("t")
    ax_q.legend(loc="best", fontsize=8)
    ax_v.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_multipliers(traj: HybridTrajectory, scn: Scenario, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    labels = scn.cs.labels
    for seg in traj.segments:
        if not seg.rows:
            continue
        for j, row in enumerate(seg.rows):
            ax.plot(seg.t, seg.lam[:, j], color=f"C{row}", lw=1.0, label=labels[row])
    handles, names = ax.get_legend_handles_labels()
    unique = dict(zip(names, handles))
    if unique:
        ax.legend(unique.values(), unique.keys(), loc="best", fontsize=8)
    ax.set_xlabel("t")
    ax.set_ylabel("multiplier")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def write_figures(traj: HybridTrajectory, scn: Scenario, stem: Path) -> List[Path]:
    """Write energy, state and multiplier figures as ``<stem>_<kind>.png``."""
    stem = Path(stem)
    return [
        plot_energy(traj, scn, stem.with_name(stem.name + "_energy.png")),
        plot_states(traj, scn, stem.with_name(stem.name + "_states.png")),
        plot_multipliers(traj, scn, stem.with_name(stem.name + "_multipliers.png")),
    ]

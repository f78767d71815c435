"""PNG figures written next to the CSV outputs (matplotlib, Agg backend)."""

from __future__ import annotations

import math
from pathlib import Path


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=100, metadata={"Software": None})
    fig.clf()
    return path


def plot_series(records, path, title: str = "") -> Path:
    """Density and r_min against time for one microscopic run."""
    plt = _pyplot()
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(6, 5))
    t = [r.t for r in records]
    ax1.plot(t, [r.density for r in records], lw=0.8)
    ax1.set_ylabel("density d_t")
    ax2.plot(t, [math.nan if r.r_min is None else r.r_min for r in records], lw=0.8, color="C1")
    ax2.set_ylabel("r_min")
    ax2.set_xlabel("t")
    ax1.set_title(title)
    out = _save(fig, path)
    plt.close(fig)
    return out


def plot_coarse(series_by_label: dict, path, title: str = "") -> Path:
    """R and D of one or more CoarseSeries."""
    plt = _pyplot()
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(6, 5))
    for label, s in series_by_label.items():
        ax1.plot(s.times, s.D_values, marker=".", lw=0.8, label=label)
        ax2.plot(s.times, s.R_values, marker=".", lw=0.8, label=label)
    ax1.set_ylabel("D")
    ax2.set_ylabel("R")
    ax2.set_xlabel("t")
    ax1.legend(fontsize="small")
    ax1.set_title(title)
    out = _save(fig, path)
    plt.close(fig)
    return out


def plot_calibration(cal, path) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(cal.spacing, cal.r_min, marker="o")
    ax.set_xlabel("lattice spacing (fraction of circle)")
    ax.set_ylabel("measured r_min")
    out = _save(fig, path)
    plt.close(fig)
    return out


def plot_diagram(diagram, path) -> Path:
    """Fixed points against epsilon; filled = stable, open = unstable."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for e in diagram.epsilons:
        for fp in diagram.roots[e]:
            stable = fp.stability == "stable"
            ax.plot(e, fp.R_star, "o", color="C0" if stable else "C3",
                    mfc="C0" if stable else "none")
    if diagram.fold_interval:
        ax.axvspan(*diagram.fold_interval, color="0.85")
    ax.set_xlabel("epsilon")
    ax.set_ylabel("R*")
    out = _save(fig, path)
    plt.close(fig)
    return out

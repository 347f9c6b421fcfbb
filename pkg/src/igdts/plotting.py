"""Report figures written next to the CSV outputs of the command-line tools."""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 10,
    "legend.frameon": False,
}


def _save(fig, path) -> Path:
    # temp file + rename so a failed render never leaves a partial image
    path = Path(path)
    fd, tmp = tempfile.mkstemp(suffix=path.suffix, dir=path.parent)
    os.close(fd)
    try:
        fig.savefig(tmp, bbox_inches="tight")
        os.replace(tmp, path)
    finally:
        plt.close(fig)
        if os.path.exists(tmp):
            os.remove(tmp)
    return path


def plot_tracking_report(report, path, title: str = "") -> Path:
    """Per-frame CLE and overlap, with means as dashed lines."""
    frames = np.arange(1, len(report.cle) + 1)
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(6.4, 5.0))
        ax1.plot(frames, report.cle, color="C0", lw=1.2)
        ax1.axhline(report.mean_cle, color="C0", ls="--", lw=0.8, label=f"mean {report.mean_cle:.2f}")
        ax1.set_ylabel("center error (px)")
        ax1.legend(loc="upper right")
        ax2.plot(frames, report.overlap, color="C1", lw=1.2)
        ax2.axhline(report.mean_overlap, color="C1", ls="--", lw=0.8, label=f"mean {report.mean_overlap:.3f}")
        ax2.set_ylim(0, 1.05)
        ax2.set_ylabel("overlap")
        ax2.set_xlabel("frame")
        ax2.legend(loc="lower right")
        if title:
            ax1.set_title(title)
        return _save(fig, path)


def plot_regression_trace(solution, path) -> Path:
    """MSE and objective per iterate of a regression fit."""
    it = np.arange(len(solution.mse_trace))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(it, solution.mse_trace, marker="o", ms=3, label="MSE")
        ax.plot(it, solution.objective_trace, marker="s", ms=3, label="objective")
        if np.all(solution.mse_trace > 0) and np.all(solution.objective_trace > 0):
            ax.set_yscale("log")
        ax.axvline(solution.iterations, color="0.5", ls=":", lw=0.8)
        ax.set_xlabel("iterate")
        ax.legend()
        return _save(fig, path)


def plot_distance_table(names, table, path) -> Path:
    """Grouped bars: one group per candidate, one bar per distance measure.

    ``table`` maps a measure label to a sequence of per-candidate values.
    """
    labels = list(table)
    x = np.arange(len(names))
    width = 0.8 / max(len(labels), 1)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for i, lab in enumerate(labels):
            ax.bar(x + (i - (len(labels) - 1) / 2) * width, table[lab], width, label=lab)
        ax.set_xticks(x)
        ax.set_xticklabels(names, rotation=20, ha="right")
        ax.set_ylabel("distance")
        ax.legend(fontsize=8)
        return _save(fig, path)

"""Figure helpers for the report commands. All figures go straight to files."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def figsize(scale=1.0, ratio=None):
    width = 6.4 * scale
    ratio = ratio or (math.sqrt(5.0) - 1.0) / 2.0
    return width, width * ratio


def save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # Fixed metadata keeps PNG bytes stable across runs.
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_stage_series(series: Mapping[str, np.ndarray], path, ylabel="throughput (lots/min)", title=None):
    """One line per component, e.g. every stage plus the cascade aggregate."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=figsize())
        for name, values in series.items():
            lw = 1.8 if name == "cascade" else 0.9
            ax.plot(np.arange(len(values)), values, lw=lw, label=name)
        ax.set_xlabel("time (min)")
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend(ncol=3, frameon=False)
        return save(fig, path)


def plot_pca_loadings(scores, loadings, feature_names: Sequence[str], groups: Sequence[str], path, explained=None):
    """Score scatter on PC1/PC2 with loading arrows, one panel per group."""
    scores = np.asarray(scores)
    loadings = np.asarray(loadings)
    labels = list(dict.fromkeys(groups))
    groups = np.asarray(groups)
    ncols = min(2, len(labels))
    nrows = math.ceil(len(labels) / ncols)
    reach = np.abs(scores[:, :2]).max() or 1.0
    arrow_scale = reach / max(np.abs(loadings[:, :2]).max(), 1e-12)
    with plt.rc_context(RC):
        fig, axes = plt.subplots(nrows, ncols, figsize=(3.8 * ncols, 3.4 * nrows), squeeze=False, layout="constrained")
        for ax, label in zip(axes.flat, labels):
            pts = scores[groups == label]
            ax.scatter(pts[:, 0], pts[:, 1], s=8, alpha=0.6)
            for j, name in enumerate(feature_names):
                dx, dy = loadings[j, 0] * arrow_scale, loadings[j, 1] * arrow_scale
                ax.annotate("", xy=(dx, dy), xytext=(0, 0), arrowprops={"arrowstyle": "->", "color": "C3"})
                ax.text(dx * 1.08, dy * 1.08, name, fontsize=6, color="C3", ha="center", clip_on=True)
            ax.set_xlim(-1.25 * reach, 1.25 * reach)
            ax.set_ylim(-1.25 * reach, 1.25 * reach)
            ax.axhline(0, lw=0.4, color="0.6")
            ax.axvline(0, lw=0.4, color="0.6")
            ax.set_title(label)
            if explained is not None:
                ax.set_xlabel(f"PC1 ({explained[0]:.0%})")
                ax.set_ylabel(f"PC2 ({explained[1]:.0%})")
        for ax in list(axes.flat)[len(labels):]:
            ax.set_visible(False)
        return save(fig, path)


def plot_forecast(time, actual, predicted, path, title=None):
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=figsize())
        ax.plot(time, actual, lw=1.2, label="actual")
        ax.plot(time, predicted, lw=0.9, ls="--", label="predicted")
        ax.set_xlabel("time (min)")
        if title:
            ax.set_title(title)
        ax.legend(frameon=False)
        return save(fig, path)

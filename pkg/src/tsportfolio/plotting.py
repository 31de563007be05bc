"""Matplotlib figures written next to the CSV reports.

Figures are always rendered off-screen with the Agg backend.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def leaderboard_figure(board, path, metric="relative_wql"):
    """Horizontal bars of the aggregated relative error per model."""
    names, values = [], []
    for name in board.model_names:
        try:
            values.append(board.aggregate(name, metric))
        except KeyError:
            continue
        names.append(name)
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(6, 0.35 * len(names) + 1.2))
        order = np.argsort(values)[::-1]
        ax.barh([names[i] for i in order], [values[i] for i in order], color="0.55")
        ax.axvline(1.0, color="k", lw=0.8, ls="--")
        ax.set_xlabel(f"{metric.replace('_', ' ')} (geometric mean)")
        return _save(fig, path)


def weight_heatmap_figure(matrix, path, title=None):
    with plt.rc_context(RC):
        n_rows, n_cols = matrix.values.shape
        fig, ax = plt.subplots(figsize=(0.6 * n_cols + 2.5, 0.35 * n_rows + 1.5))
        im = ax.imshow(matrix.values, cmap="Blues", vmin=0.0, vmax=1.0, aspect="auto")
        ax.set_xticks(range(n_cols), matrix.column_labels, rotation=45, ha="right")
        ax.set_yticks(range(n_rows), matrix.row_labels)
        ax.set_xlabel("member")
        fig.colorbar(im, ax=ax, label="weight")
        if title:
            ax.set_title(title)
        return _save(fig, path)


def scaling_fit_figure(fits, path):
    """Log-log scatter with one fitted line per group; ``fits`` maps group -> (points, fit)."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        for group, (pts, fit) in fits.items():
            pts = np.asarray(pts, dtype=float)
            line = ax.loglog(pts[:, 0], pts[:, 1], "o", ms=4)[0]
            grid = np.geomspace(pts[:, 0].min(), pts[:, 0].max(), 50)
            star = "*" if fit.significant() else ""
            ax.loglog(grid, fit.predict(grid), "-", color=line.get_color(),
                      label=f"{group}: alpha={fit.alpha:.3f}{star}")
        ax.set_xlabel("scale")
        ax.set_ylabel("error")
        ax.legend(frameon=False)
        return _save(fig, path)


def bias_variance_figure(report, path):
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(3.5, 3.0))
        ax.bar(["bias", "variance"], [report.aggregate_bias, report.aggregate_variance], color=["0.3", "0.7"])
        ax.set_ylabel("mean over inputs")
        return _save(fig, path)

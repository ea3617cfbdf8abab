"""Figures for ablation reports. Uses the non-interactive Agg backend."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}


def plot_ablation(rows, path):
    """Accuracy ratios and error counts for each tracker variant."""
    names = [n for n, _ in rows]
    x = np.arange(len(names))
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7.0, 2.8))
        width = 0.38
        ax1.bar(x - width / 2, [100 * r.MOTA for _, r in rows], width, label="MOTA")
        ax1.bar(x + width / 2, [100 * r.IDF1 for _, r in rows], width, label="IDF1")
        ax1.set_xticks(x, names)
        ax1.set_ylabel("%")
        ax1.legend(frameon=False)

        width = 0.26
        for k, key in enumerate(("FP", "FN", "IDSW")):
            ax2.bar(x + (k - 1) * width, [getattr(r, key) for _, r in rows], width, label=key)
        ax2.set_xticks(x, names)
        ax2.set_ylabel("count")
        ax2.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def plot_compensation(stats, path):
    """Lost vs compensated objects, and output boxes as a share of ground truth."""
    names = [s.name for s in stats]
    x = np.arange(len(names))
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7.0, 2.8))
        ax1.bar(x - 0.2, [s.lost_events for s in stats], 0.4, label="lost")
        ax1.bar(x + 0.2, [s.compensated for s in stats], 0.4, label="compensated")
        ax1.set_xticks(x, names)
        ax1.set_ylabel("objects")
        ax1.legend(frameon=False)

        ratios = [100 * (s.output_ratio or 0.0) for s in stats]
        ax2.bar(x, ratios, 0.5, color="0.6")
        ax2.set_xticks(x, names)
        ax2.set_ylabel("output / GT (%)")
        base = ratios[0] if ratios and ratios[0] > 0 else None
        if base is not None:
            twin = ax2.twinx()
            twin.plot(x, [100 * (r - base) / base for r in ratios], "o-", color="C3")
            twin.set_ylabel("growth vs first (%)", color="C3")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)

"""Figure rendering for results tables and importance weights.

Uses the Agg backend unconditionally: rendering happens in batch runs and
must not depend on a display. Figures are written to files; nothing is ever
shown interactively.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_results_figure", "render_weights_figure"]

_METHOD_LABELS = {
    "single": "single",
    "pool": "pool",
    "sg": "SG",
    "sg_cs": "SG+CS",
}


def render_results_figure(table, path, dpi=150):
    """Grouped accuracy bars, one group per subject plus the mean.

    The dashed line marks chance (0.5). Missing cells simply have no bar.
    """
    methods = [m for m in table.COLUMNS if m in table.methods]
    groups = [str(s) for s in table.subject_ids] + ["mean"]
    mean = table.mean_row()
    n_g, n_m = len(groups), len(methods)
    width = 0.8 / max(n_m, 1)
    xs = np.arange(n_g, dtype=float)

    fig, ax = plt.subplots(figsize=(max(6.0, 0.9 * n_g), 4.0))
    for j, m in enumerate(methods):
        heights = []
        for sid in table.subject_ids:
            heights.append(table.cells[sid].get(m, np.nan))
        heights.append(mean.get(m, np.nan))
        offs = xs + (j - (n_m - 1) / 2.0) * width
        ax.bar(offs, heights, width=width, label=_METHOD_LABELS.get(m, m))
    ax.axhline(0.5, color="gray", linestyle="--", linewidth=1.0, zorder=0)
    ax.set_xticks(xs)
    ax.set_xticklabels(groups)
    ax.set_ylim(0.0, 1.05)
    ax.set_xlabel("subject")
    ax.set_ylabel("accuracy")
    ax.legend(loc="lower right", ncol=min(n_m, 4), frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)


def render_weights_figure(weights, path, bins=40, dpi=150):
    """Histogram of importance weights with the clip bounds marked."""
    w = np.asarray(weights.weights)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.hist(w, bins=bins, color="#4878a8", edgecolor="white")
    for bound in (weights.clip_lo, weights.clip_hi):
        ax.axvline(bound, color="firebrick", linestyle=":", linewidth=1.2)
    ax.axvline(1.0, color="gray", linestyle="--", linewidth=1.0)
    ax.set_xlabel("normalized weight")
    ax.set_ylabel("count")
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)

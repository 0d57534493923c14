"""Matplotlib figures written next to the CSV reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .harness import heatmap_pixels, success_threshold  # noqa: E402


def plot_sweep(summary, path, title=None):
    """Success rate and mean unique evaluations against population size."""
    rows = summary.rows
    sizes = np.array([r.popsize for r in rows])
    rate = np.array([r.successes / r.runs for r in rows])
    mean = np.array([np.nan if r.mean_unique_evals is None else r.mean_unique_evals for r in rows])
    std = np.array([0.0 if r.std_unique_evals is None else r.std_unique_evals for r in rows])

    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
    ax1.plot(sizes, rate, "o-", color="k")
    for frac, style in ((0.5, "--"), (0.9, ":")):
        level = success_threshold(summary.runs_per_size, frac) / summary.runs_per_size
        ax1.axhline(level, ls=style, color="gray", lw=1, label=f"{int(frac * 100)}% threshold")
    ax1.set_ylabel("success rate")
    ax1.set_ylim(-0.05, 1.05)
    ax1.legend(loc="lower right", frameon=False)

    ax2.errorbar(sizes, mean, yerr=std, fmt="s-", color="k", capsize=3)
    ax2.set_xlabel("population size")
    ax2.set_ylabel("unique evaluations\n(successful runs)")
    if title:
        ax1.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_weights(W1, path, title=None):
    """Grayscale W1 image with the same mapping as the PGM export."""
    pix = heatmap_pixels(W1)
    h, w = pix.shape
    fig, ax = plt.subplots(figsize=(max(3, w / 6), max(3, h / 6)))
    ax.imshow(pix, cmap="gray", vmin=0, vmax=255, interpolation="nearest")
    ax.set_xlabel("visible variable")
    ax.set_ylabel("hidden-1 neuron")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)

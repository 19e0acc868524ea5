"""Figure rendering for the report paths.

Renders the exploratory statistics and cross-validation results to PNG
files next to their CSV counterparts.  All computation happens in
scorecast.eda / scorecast.evaluate; this module only draws.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .eda import CorrelationMatrix, GradientMap, Histogram
from .evaluate import CvReport


def render_histograms(hists: list[Histogram], path: str | Path) -> Path:
    """One panel per feature, bar heights from the precomputed bins."""
    cols = 3
    rows = max(1, (len(hists) + cols - 1) // cols)
    fig, axes = plt.subplots(rows, cols, figsize=(4 * cols, 3 * rows), squeeze=False)
    for ax in axes.ravel():
        ax.set_axis_off()
    for hist, ax in zip(hists, axes.ravel()):
        ax.set_axis_on()
        widths = np.diff(hist.edges)
        widths[widths == 0] = 1.0
        ax.bar(hist.edges[:-1], hist.counts, width=widths, align="edge",
               color="#4878a8", edgecolor="white")
        ax.set_title(hist.name)
        ax.set_ylabel("students")
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=110)
    plt.close(fig)
    return out


def render_correlation(corr: CorrelationMatrix, path: str | Path) -> Path:
    k = len(corr.labels)
    fig, ax = plt.subplots(figsize=(1.1 * k + 2, 1.1 * k + 1.5))
    image = ax.imshow(corr.values, vmin=-1.0, vmax=1.0, cmap="RdYlGn")
    ax.set_xticks(range(k), corr.labels)
    ax.set_yticks(range(k), corr.labels)
    for i in range(k):
        for j in range(k):
            ax.text(j, i, f"{corr.values[i, j]:.2f}",
                    ha="center", va="center", fontsize=9)
    fig.colorbar(image, ax=ax, shrink=0.8)
    ax.set_title("feature correlations")
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=110)
    plt.close(fig)
    return out


def render_gradient_maps(gmaps: list[GradientMap], path: str | Path) -> Path:
    fig, axes = plt.subplots(1, max(len(gmaps), 1),
                             figsize=(5 * max(len(gmaps), 1), 4), squeeze=False)
    for gmap, ax in zip(gmaps, axes[0]):
        masked = np.ma.masked_invalid(gmap.means)
        mesh = ax.pcolormesh(gmap.x_edges, gmap.y_edges, masked, cmap="viridis")
        ax.set_xlabel(gmap.x_name)
        ax.set_ylabel(gmap.y_name)
        fig.colorbar(mesh, ax=ax, label="mean total")
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=110)
    plt.close(fig)
    return out


def render_results(reports: list[CvReport], path: str | Path) -> Path:
    """Grouped bars of mean r2 per pipeline with fold-std error bars."""
    views = sorted({r.view for r in reports})
    fig, axes = plt.subplots(1, len(views), figsize=(1.2 + 4.5 * len(views), 4),
                             squeeze=False, sharey=True)
    for view, ax in zip(views, axes[0]):
        rows = [r for r in reports if r.view == view]
        names = [r.pipeline for r in rows]
        means = [r.stat("r2").mean for r in rows]
        stds = [r.stat("r2").std for r in rows]
        ax.bar(range(len(rows)), means, yerr=stds, capsize=3, color="#4878a8")
        ax.set_xticks(range(len(rows)), names, rotation=45, ha="right")
        ax.set_title(view)
        ax.set_ylabel("mean r2 (5-fold)")
        ax.axhline(0.0, color="black", linewidth=0.8)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=110)
    plt.close(fig)
    return out

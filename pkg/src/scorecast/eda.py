"""Exploratory statistics: histograms, correlations, gradient maps.

This module computes and serializes the numbers only; figure rendering
lives in scorecast.plots so these outputs stay machine-checkable.

Binning convention (shared by histograms and gradient maps): bins are
equal-width over the observed min..max with right-closed intervals
(a, b], except the first bin which also includes its left edge.  Counts
therefore always sum to the number of values.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import UsageError, ZeroVarianceError


@dataclass
class Histogram:
    name: str
    edges: np.ndarray  # (bins + 1,)
    counts: np.ndarray  # (bins,) int

    @property
    def n_bins(self) -> int:
        return len(self.counts)


@dataclass
class CorrelationMatrix:
    labels: tuple[str, ...]
    values: np.ndarray  # (k, k)

    def get(self, a: str, b: str) -> float:
        return float(self.values[self.labels.index(a), self.labels.index(b)])


@dataclass
class GradientMap:
    """Mean outcome over a 2-d grid of two features, plus cell occupancy."""

    x_name: str
    y_name: str
    x_edges: np.ndarray
    y_edges: np.ndarray
    counts: np.ndarray  # (bins_y, bins_x) int
    means: np.ndarray   # (bins_y, bins_x), NaN where a cell is empty


def _bin_indices(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(edges, values, side="left") - 1
    return np.clip(idx, 0, len(edges) - 2)


def histogram(values, bins: int, name: str = "") -> Histogram:
    """Equal-width histogram over the observed range of values."""
    if bins < 1:
        raise UsageError(f"bins must be >= 1, got {bins}")
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise UsageError("cannot bin an empty vector")
    if not np.all(np.isfinite(arr)):
        raise UsageError("histogram input contains non-finite values")
    edges = np.linspace(arr.min(), arr.max(), bins + 1)
    counts = np.bincount(_bin_indices(arr, edges), minlength=bins)
    return Histogram(name, edges, counts)


def pearson(x, y) -> float:
    """Sample Pearson correlation of two equal-length vectors."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape != y.shape:
        raise UsageError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    if x.size < 2:
        raise UsageError("pearson needs at least two points")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(np.sqrt(np.sum(dx * dx)))
    sy = float(np.sqrt(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        raise ZeroVarianceError("correlation is undefined for a constant input")
    return float(np.sum(dx * dy) / (sx * sy))


def correlation_matrix(matrix: np.ndarray, labels: tuple[str, ...]) -> CorrelationMatrix:
    """Pairwise Pearson correlations of the columns of matrix."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    if matrix.shape[1] != len(labels):
        raise UsageError(f"matrix has {matrix.shape[1]} columns but {len(labels)} labels")
    k = len(labels)
    values = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            values[i, j] = values[j, i] = pearson(matrix[:, i], matrix[:, j])
    return CorrelationMatrix(tuple(labels), values)


def gradient_map(x, y, outcome, bins: int = 10,
                 x_name: str = "x", y_name: str = "y") -> GradientMap:
    """Bin (x, y) points onto a grid and average the outcome per cell."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    outcome = np.asarray(outcome, dtype=np.float64).reshape(-1)
    if not (x.shape == y.shape == outcome.shape):
        raise UsageError("x, y and outcome must have equal lengths")
    if x.size == 0:
        raise UsageError("cannot map an empty vector")
    if bins < 1:
        raise UsageError(f"bins must be >= 1, got {bins}")
    x_edges = np.linspace(x.min(), x.max(), bins + 1)
    y_edges = np.linspace(y.min(), y.max(), bins + 1)
    xi = _bin_indices(x, x_edges)
    yi = _bin_indices(y, y_edges)
    counts = np.zeros((bins, bins), dtype=np.int64)
    sums = np.zeros((bins, bins))
    np.add.at(counts, (yi, xi), 1)
    np.add.at(sums, (yi, xi), outcome)
    with np.errstate(invalid="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return GradientMap(x_name, y_name, x_edges, y_edges, counts, means)


def occupancy_trend(gmap: GradientMap) -> float:
    """Correlation between x-bin index and occupied-cell mean outcome.

    A crude monotonicity score: higher means the outcome climbs along x.
    """
    xs: list[float] = []
    ms: list[float] = []
    for yi in range(gmap.counts.shape[0]):
        for xi in range(gmap.counts.shape[1]):
            if gmap.counts[yi, xi] > 0:
                xs.append(float(xi))
                ms.append(float(gmap.means[yi, xi]))
    return pearson(xs, ms)


def _fmt(value: float) -> str:
    return repr(float(value))


def write_histograms(hists: list[Histogram], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["feature", "bin_left", "bin_right", "count"])
        for hist in hists:
            for i in range(hist.n_bins):
                writer.writerow([hist.name, _fmt(hist.edges[i]),
                                 _fmt(hist.edges[i + 1]), int(hist.counts[i])])


def write_correlation(corr: CorrelationMatrix, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["feature", *corr.labels])
        for i, label in enumerate(corr.labels):
            writer.writerow([label, *(_fmt(v) for v in corr.values[i])])


def write_gradient_maps(gmaps: list[GradientMap], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["x_feature", "y_feature", "x_left", "x_right",
                         "y_left", "y_right", "count", "mean_total"])
        for gmap in gmaps:
            bins_y, bins_x = gmap.counts.shape
            for yi in range(bins_y):
                for xi in range(bins_x):
                    count = int(gmap.counts[yi, xi])
                    mean = "" if count == 0 else _fmt(gmap.means[yi, xi])
                    writer.writerow([
                        gmap.x_name, gmap.y_name,
                        _fmt(gmap.x_edges[xi]), _fmt(gmap.x_edges[xi + 1]),
                        _fmt(gmap.y_edges[yi]), _fmt(gmap.y_edges[yi + 1]),
                        count, mean,
                    ])

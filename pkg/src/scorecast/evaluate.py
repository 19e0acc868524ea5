"""Metrics and the shuffle-split cross-validation harness.

Metric definitions over K held-out points:

    r2   = 1 - sum (y - yhat)^2 / sum (y - ybar)^2
    mae  = 1/K * sum |y - yhat|
    mse  = 1/K * sum (y - yhat)^2
    rmse = sqrt(mse)

Each of the n_folds folds reshuffles all rows with its own seed
(seed + fold_index) and holds out the first ceil(test_fraction * n) of
the permutation.  Pipelines are fit on the remaining rows only; fold
statistics are aggregated as the mean and the population standard
deviation (denominator n_folds).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import Settings
from .errors import ScorecastError, UsageError
from .nn.core import TrainConfig
from .pipelines import VIEW_PIPELINE_SETS, fit_pipeline
from .records import AssessmentRecord, DatasetView, build_view

METRIC_NAMES = ("r2", "mae", "mse", "rmse")

RESULTS_HEADER = ("pipeline", "view",
                  "r2_mean", "r2_std", "mae_mean", "mae_std",
                  "mse_mean", "mse_std", "rmse_mean", "rmse_std")


@dataclass
class Metrics:
    """One evaluation's scores.  r2 is None when y_true is constant."""

    r2: float | None
    mae: float
    mse: float
    rmse: float

    def as_tuple(self) -> tuple:
        return (self.r2, self.mae, self.mse, self.rmse)


def compute_metrics(y_true, y_pred) -> Metrics:
    y_true = np.asarray(y_true, dtype=np.float64).reshape(-1)
    y_pred = np.asarray(y_pred, dtype=np.float64).reshape(-1)
    if y_true.shape != y_pred.shape:
        raise UsageError(f"length mismatch: {y_true.shape[0]} vs {y_pred.shape[0]}")
    if y_true.size == 0:
        raise UsageError("cannot score zero points")
    diff = y_true - y_pred
    mse = float(np.mean(diff * diff))
    mae = float(np.mean(np.abs(diff)))
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    r2 = None if ss_tot == 0.0 else 1.0 - float(np.sum(diff * diff)) / ss_tot
    return Metrics(r2, mae, mse, math.sqrt(mse))


@dataclass
class MetricStat:
    per_fold: list[float]
    mean: float
    std: float


@dataclass
class CvReport:
    pipeline: str
    view: str
    n_folds: int
    seed: int
    stats: dict[str, MetricStat] = field(default_factory=dict)

    def stat(self, metric: str) -> MetricStat:
        return self.stats[metric]


def split_indices(n: int, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """One shuffle split: (train_idx, test_idx) over range(n).

    The seeded permutation's first ceil(test_fraction * n) rows are held
    out.
    """
    if n < 2:
        raise UsageError(f"need at least 2 rows to split, got {n}")
    if not (0.0 < test_fraction < 1.0):
        raise UsageError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n_test = int(math.ceil(test_fraction * n))
    if n_test >= n:
        raise UsageError(f"test_fraction {test_fraction} leaves no training rows for n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return perm[n_test:], perm[:n_test]


def _subview(view: DatasetView, rows: np.ndarray) -> DatasetView:
    return DatasetView(
        name=view.name,
        feature_names=view.feature_names,
        matrix=view.matrix[rows],
        targets=view.targets[rows],
        student_ids=tuple(view.student_ids[i] for i in rows) if view.student_ids else (),
        n_excluded=0,
    )


def _aggregate(values: list[float]) -> MetricStat:
    arr = np.asarray(values, dtype=np.float64)
    return MetricStat(list(values), float(arr.mean()), float(arr.std()))


def shuffle_split_cv(view: DatasetView, pipeline: str,
                     n_folds: int = 5, test_fraction: float = 0.2, seed: int = 0,
                     settings: Settings | None = None,
                     train_config: TrainConfig | None = None,
                     fold_seeds: list[int] | None = None) -> CvReport:
    """Cross-validate one pipeline on one view.

    fold_seeds overrides the per-fold shuffle seeds (seed + fold_index by
    default); metric aggregation is unchanged.
    """
    if n_folds < 1:
        raise UsageError(f"n_folds must be >= 1, got {n_folds}")
    if fold_seeds is not None and len(fold_seeds) != n_folds:
        raise UsageError("fold_seeds must supply one seed per fold")
    per_metric: dict[str, list[float]] = {name: [] for name in METRIC_NAMES}
    for fold in range(n_folds):
        fold_seed = fold_seeds[fold] if fold_seeds is not None else seed + fold
        train_idx, test_idx = split_indices(view.n_rows, test_fraction, fold_seed)
        fitted = fit_pipeline(pipeline, _subview(view, train_idx),
                              settings=settings, seed=fold_seed,
                              train_config=train_config)
        metrics = compute_metrics(view.targets[test_idx],
                                  fitted.predict(view.matrix[test_idx]))
        if metrics.r2 is None:
            raise UsageError("test fold targets are constant; r2 is undefined")
        for name, value in zip(METRIC_NAMES, metrics.as_tuple()):
            per_metric[name].append(float(value))
    report = CvReport(pipeline, view.name, n_folds, seed)
    report.stats = {name: _aggregate(values) for name, values in per_metric.items()}
    return report


@dataclass
class CellFailure:
    pipeline: str
    view: str
    error: str


def run_experiment_matrix(records: list[AssessmentRecord],
                          view_names: list[str] | None = None,
                          pipelines: dict[str, list[str]] | None = None,
                          n_folds: int = 5, test_fraction: float = 0.2, seed: int = 0,
                          settings: Settings | None = None,
                          train_config: TrainConfig | None = None,
                          ) -> tuple[list[CvReport], list[CellFailure]]:
    """Cross-validate every (view, pipeline) cell.

    pipelines maps view name to the pipeline list to run there (the
    standard comparison sets by default).  A failing cell is recorded and
    skipped rather than aborting the rest of the matrix.
    """
    view_names = view_names or list(VIEW_PIPELINE_SETS)
    reports: list[CvReport] = []
    failures: list[CellFailure] = []
    for view_name in view_names:
        view = build_view(records, view_name)
        names = (pipelines or VIEW_PIPELINE_SETS)[view_name]
        for pipeline in names:
            try:
                reports.append(shuffle_split_cv(
                    view, pipeline, n_folds=n_folds, test_fraction=test_fraction,
                    seed=seed, settings=settings, train_config=train_config))
            except ScorecastError as exc:
                failures.append(CellFailure(pipeline, view_name, str(exc)))
    return reports, failures


def best_by_r2(reports: list[CvReport], view: str) -> CvReport:
    candidates = [r for r in reports if r.view == view]
    if not candidates:
        raise UsageError(f"no reports for view {view!r}")
    return max(candidates, key=lambda r: r.stat("r2").mean)


def write_results_csv(reports: list[CvReport], path: str | Path) -> None:
    """Write one row per (pipeline, view) with metric means and stds."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(RESULTS_HEADER)
        for report in reports:
            row: list[str] = [report.pipeline, report.view]
            for metric in METRIC_NAMES:
                stat = report.stat(metric)
                row += [repr(stat.mean), repr(stat.std)]
            writer.writerow(row)


def format_report_lines(reports: list[CvReport]) -> list[str]:
    """Human-readable `metric mean +- std` lines for terminal output."""
    lines = []
    for report in reports:
        parts = [f"{metric}={report.stat(metric).mean:.3f}+-{report.stat(metric).std:.3f}"
                 for metric in METRIC_NAMES]
        lines.append(f"{report.view:7s} {report.pipeline:8s} " + "  ".join(parts))
    return lines

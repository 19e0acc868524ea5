"""Core data model: assessment records, weights, and dataset views.

A student's course outcome is modelled as a weighted composite of the
assessment components

    total = sum_i w_i * x_i

over the feature list (t1, t2, cw, mte, ete): two term tests, classwork,
the mid-term exam, and the end-term exam.  All scores live on a 0..max
point scale (100 by default) and any feature may be missing on a given
record.  Views select the feature subsets the estimators consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, MissingFeatureError, UsageError

FEATURES: tuple[str, ...] = ("t1", "t2", "cw", "mte", "ete")

DEFAULT_WEIGHTS: dict[str, float] = {
    "t1": 0.15,
    "t2": 0.15,
    "cw": 0.20,
    "mte": 0.20,
    "ete": 0.30,
}

DEFAULT_MAXIMA: dict[str, float] = {name: 100.0 for name in FEATURES}

# Feature subsets per view, in the column order estimators receive them.
VIEW_FEATURES: dict[str, tuple[str, ...]] = {
    "D1": ("t1", "t2", "cw"),
    "D2-MTE": ("mte", "cw"),
    "D2-ETE": ("ete", "cw"),
}

# Term order of the assessments, used when a view is fed to a sequence
# model one timestep per feature.  Classwork accrues before either exam.
CHRONOLOGICAL_ORDER: dict[str, tuple[str, ...]] = {
    "D1": ("t1", "t2", "cw"),
    "D2-MTE": ("cw", "mte"),
    "D2-ETE": ("cw", "ete"),
}

_WEIGHT_SUM_TOL = 1e-9


@dataclass(frozen=True)
class AssessmentRecord:
    """One student's assessment scores.  A feature value of None is missing.

    total is the observed final score when known; prediction-time records
    may leave it as None.
    """

    t1: float | None = None
    t2: float | None = None
    cw: float | None = None
    mte: float | None = None
    ete: float | None = None
    total: float | None = None
    student_id: str = ""

    def get(self, feature: str) -> float | None:
        if feature == "total":
            return self.total
        if feature not in FEATURES:
            raise UsageError(f"unknown feature {feature!r}")
        return getattr(self, feature)

    def has(self, *features: str) -> bool:
        return all(self.get(name) is not None for name in features)

    def validate(self, maxima: dict[str, float] | None = None) -> None:
        """Check that every present score is finite and within [0, max]."""
        caps = maxima or DEFAULT_MAXIMA
        for name in FEATURES:
            value = self.get(name)
            if value is None:
                continue
            cap = caps.get(name, 100.0)
            if not math.isfinite(value):
                raise DataError(f"{name} is not finite on record {self.student_id!r}")
            if not (0.0 <= value <= cap):
                raise DataError(
                    f"{name} out of range on record {self.student_id!r}: "
                    f"{value!r} not in [0, {cap}]"
                )
        if self.total is not None:
            if not math.isfinite(self.total):
                raise DataError(f"total is not finite on record {self.student_id!r}")
            if not (0.0 <= self.total <= 100.0):
                raise DataError(
                    f"total out of range on record {self.student_id!r}: "
                    f"{self.total!r} not in [0, 100]"
                )


@dataclass(frozen=True)
class WeightVector:
    """Ordered weights for a feature list.  Must be non-negative, sum to 1."""

    features: tuple[str, ...]
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.features) != len(self.values):
            raise UsageError(
                f"weight count {len(self.values)} does not match "
                f"feature count {len(self.features)}"
            )
        if not self.features:
            raise UsageError("weight vector needs at least one feature")
        for name, w in zip(self.features, self.values):
            if not math.isfinite(w) or w < 0.0:
                raise UsageError(f"weight for {name!r} must be finite and >= 0, got {w!r}")
        if abs(sum(self.values) - 1.0) > _WEIGHT_SUM_TOL:
            raise UsageError(f"weights must sum to 1, got {sum(self.values)!r}")

    @classmethod
    def from_mapping(
        cls, mapping: dict[str, float], features: tuple[str, ...] = FEATURES
    ) -> "WeightVector":
        missing = [name for name in features if name not in mapping]
        if missing:
            raise UsageError(f"no weight given for {missing}")
        return cls(features, tuple(float(mapping[name]) for name in features))


def default_weights() -> WeightVector:
    return WeightVector.from_mapping(DEFAULT_WEIGHTS)


def composite_score(record: AssessmentRecord, weights: WeightVector) -> float:
    """Weighted composite sum w_i * x_i over the weight vector's features.

    Every feature named by the weights must be present on the record;
    there is no imputation anywhere in the pipeline.
    """
    acc = 0.0
    for name, w in zip(weights.features, weights.values):
        value = record.get(name)
        if value is None:
            raise MissingFeatureError(
                f"feature {name!r} is missing on record {record.student_id!r}"
            )
        acc += w * value
    return acc


@dataclass(frozen=True)
class DatasetView:
    """A complete-case design matrix for one feature subset plus targets."""

    name: str
    feature_names: tuple[str, ...]
    matrix: np.ndarray  # (n, d) float64
    targets: np.ndarray  # (n,) float64
    student_ids: tuple[str, ...] = field(default=(), repr=False)
    n_excluded: int = 0

    @property
    def n_rows(self) -> int:
        return int(self.matrix.shape[0])


def view_feature_names(view_name: str) -> tuple[str, ...]:
    try:
        return VIEW_FEATURES[view_name]
    except KeyError:
        raise UsageError(
            f"unknown view {view_name!r}; expected one of {sorted(VIEW_FEATURES)}"
        ) from None


def feature_matrix(
    records: list[AssessmentRecord],
    features: tuple[str, ...],
    require_total: bool = False,
) -> tuple[np.ndarray, np.ndarray, tuple[str, ...], int]:
    """Stack complete rows for the given features into a float64 matrix.

    Rows missing any requested feature (or the total, when required) are
    excluded, not imputed.  Returns (matrix, totals, student_ids, n_excluded);
    totals holds NaN where a kept row has no observed total.
    """
    rows: list[list[float]] = []
    totals: list[float] = []
    ids: list[str] = []
    n_excluded = 0
    for record in records:
        if not record.has(*features) or (require_total and record.total is None):
            n_excluded += 1
            continue
        rows.append([float(record.get(name)) for name in features])
        totals.append(float("nan") if record.total is None else float(record.total))
        ids.append(record.student_id)
    matrix = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(features))
    return matrix, np.asarray(totals, dtype=np.float64), tuple(ids), n_excluded


def build_view(records: list[AssessmentRecord], view_name: str) -> DatasetView:
    """Assemble the named view from complete rows with observed totals."""
    features = view_feature_names(view_name)
    matrix, totals, ids, n_excluded = feature_matrix(records, features, require_total=True)
    return DatasetView(
        name=view_name,
        feature_names=features,
        matrix=matrix,
        targets=totals,
        student_ids=ids,
        n_excluded=n_excluded,
    )

"""Cohort file I/O and synthetic cohort generation.

The on-disk format is a plain CSV with the exact header

    student_id,t1,t2,cw,mte,ete,total

decimal-point numbers and newline-terminated lines.  An empty cell is a
missing value.  Malformed rows are rejected individually with their line
number; a malformed header rejects the whole file.

Synthetic cohorts come from a single latent "ability" factor per student
plus independent per-feature noise:

    x_i = mean_i + sd_i * (loading_i * a + sqrt(1 - loading_i^2) * e_i)

with a, e_i standard normal.  Loadings are solved numerically so each
feature's correlation with the composite total hits its target.  The
total is the weighted composite of the generated features plus zero-mean
noise, clipped to [0, 100].  All randomness comes from numpy's
default_rng (the PCG64 generator), so a seed pins the cohort bit for bit.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CsvFormatError, DataError, InfeasibleCorrelationError, UsageError
from .records import (
    DEFAULT_MAXIMA,
    FEATURES,
    AssessmentRecord,
    WeightVector,
    composite_score,
    default_weights,
)

CSV_HEADER = ("student_id", "t1", "t2", "cw", "mte", "ete", "total")

DEFAULT_CORRELATIONS = {"t1": 0.69, "t2": 0.64, "mte": 0.88, "ete": 0.96}
DEFAULT_SD_FRACTIONS = {"t1": 0.10, "t2": 0.10, "cw": 0.08, "mte": 0.14, "ete": 0.20}
DEFAULT_MEAN_FRACTION = 0.58
DEFAULT_LOADING = 0.5

_SOLVER_TOL = 1e-6
_SOLVER_ITERS = 5000


@dataclass
class Rejection:
    line_no: int
    reason: str


@dataclass
class CohortFile:
    """Parsed cohort: accepted records plus line-numbered rejections."""

    records: list[AssessmentRecord]
    rejections: list[Rejection] = field(default_factory=list)

    @property
    def n_accepted(self) -> int:
        return len(self.records)


def _parse_cell(raw: str, column: str, maximum: float) -> float | None:
    text = raw.strip()
    if text == "":
        return None
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"{column} is not a number: {raw!r}") from None
    if not math.isfinite(value):
        raise DataError(f"{column} is not finite: {raw!r}")
    if not (0.0 <= value <= maximum):
        raise DataError(f"{column} out of range: {value!r} not in [0, {maximum}]")
    return value


def parse_cohort(source: str | Path | io.TextIOBase,
                 maxima: dict[str, float] | None = None) -> CohortFile:
    """Parse a cohort CSV, keeping valid rows and recording rejections."""
    caps = dict(DEFAULT_MAXIMA)
    if maxima:
        caps.update(maxima)
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as handle:
            return parse_cohort(handle, maxima=caps)

    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise CsvFormatError("file is empty, expected a header row") from None
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise CsvFormatError(
            f"bad header {header!r}; expected {','.join(CSV_HEADER)}")

    records: list[AssessmentRecord] = []
    rejections: list[Rejection] = []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(cell.strip() == "" for cell in row):
            continue
        if len(row) != len(CSV_HEADER):
            rejections.append(Rejection(line_no, f"expected {len(CSV_HEADER)} cells, got {len(row)}"))
            continue
        try:
            values = {
                name: _parse_cell(row[i + 1], name, caps[name])
                for i, name in enumerate(FEATURES)
            }
            total = _parse_cell(row[6], "total", 100.0)
        except DataError as exc:
            rejections.append(Rejection(line_no, str(exc)))
            continue
        records.append(AssessmentRecord(student_id=row[0].strip(), total=total, **values))
    return CohortFile(records, rejections)


def _format_cell(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def write_cohort(records: list[AssessmentRecord], destination: str | Path) -> None:
    """Write records in the documented CSV schema.

    Values are written with repr so parse_cohort(write_cohort(r)) gives
    back bit-identical floats.
    """
    path = Path(destination)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(",".join(CSV_HEADER) + "\n")
        for record in records:
            cells = [record.student_id]
            cells += [_format_cell(record.get(name)) for name in FEATURES]
            cells.append(_format_cell(record.total))
            handle.write(",".join(cells) + "\n")


@dataclass
class SynthSpec:
    """Parameters of the synthetic cohort generator."""

    n_students: int = 1000
    seed: int = 7
    target_correlations: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_CORRELATIONS))
    weights: WeightVector | None = None
    noise_sd: float = 1.5
    maxima: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_MAXIMA))
    mean_fraction: float = DEFAULT_MEAN_FRACTION
    sd_fractions: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_SD_FRACTIONS))
    default_loading: float = DEFAULT_LOADING

    def validate(self) -> None:
        if self.n_students < 1:
            raise UsageError(f"n_students must be >= 1, got {self.n_students}")
        if self.noise_sd < 0:
            raise UsageError(f"noise_sd must be >= 0, got {self.noise_sd}")
        for name, r in self.target_correlations.items():
            if name not in FEATURES:
                raise UsageError(f"unknown feature in correlation targets: {name!r}")
            if not (-1.0 <= r <= 1.0):
                raise UsageError(f"invalid correlation for {name!r}: {r!r} not in [-1, 1]")
        if not (0.0 < self.mean_fraction < 1.0):
            raise UsageError("mean_fraction must be in (0, 1)")


def solve_loadings(spec: SynthSpec) -> np.ndarray:
    """Factor loadings hitting the target feature-total correlations.

    Under the one-factor model, with ws_i = weight_i * sd_i and
    S = sum_j ws_j * loading_j, the implied correlation of feature i with
    the composite is

        corr_i = (ws_i * (1 - loading_i^2) + loading_i * S) / sqrt(V)
        V      = sum_j ws_j^2 (1 - loading_j^2) + S^2 + noise_sd^2

    which a damped fixed-point iteration inverts for the targeted
    features.  Raises InfeasibleCorrelationError when no loadings in
    (-1, 1) reproduce the targets.
    """
    spec.validate()
    weights = spec.weights or default_weights()
    w = np.array([weights.values[weights.features.index(f)] for f in FEATURES])
    sd = np.array([spec.sd_fractions.get(f, 0.1) * spec.maxima[f] for f in FEATURES])
    ws = w * sd
    targeted = [i for i, f in enumerate(FEATURES) if f in spec.target_correlations]
    targets = {i: spec.target_correlations[FEATURES[i]] for i in targeted}

    loadings = np.full(len(FEATURES), spec.default_loading)
    if not targets:
        return loadings
    for i, r in targets.items():
        loadings[i] = np.clip(r, -0.9, 0.9)

    def implied(rho: np.ndarray) -> np.ndarray:
        s = float(ws @ rho)
        v = float(np.sum(ws ** 2 * (1.0 - rho ** 2)) + s * s + spec.noise_sd ** 2)
        return (ws * (1.0 - rho ** 2) + rho * s) / np.sqrt(v)

    for _ in range(_SOLVER_ITERS):
        current = implied(loadings)
        worst = max(abs(current[i] - r) for i, r in targets.items())
        if worst <= _SOLVER_TOL:
            return loadings
        for i, r in targets.items():
            loadings[i] = float(np.clip(loadings[i] + 0.5 * (r - current[i]),
                                        -0.999999, 0.999999))
    achieved = implied(loadings)
    gaps = {FEATURES[i]: round(float(achieved[i] - r), 4) for i, r in targets.items()}
    raise InfeasibleCorrelationError(
        f"correlation targets are infeasible under the one-factor model; "
        f"residual gaps {gaps}")


def generate_synthetic(spec: SynthSpec) -> list[AssessmentRecord]:
    """Draw a cohort from the one-factor model described in the module doc."""
    spec.validate()
    weights = spec.weights or default_weights()
    loadings = solve_loadings(spec)
    sd = np.array([spec.sd_fractions.get(f, 0.1) * spec.maxima[f] for f in FEATURES])
    mean = np.array([spec.mean_fraction * spec.maxima[f] for f in FEATURES])
    caps = np.array([spec.maxima[f] for f in FEATURES])

    rng = np.random.default_rng(spec.seed)
    ability = rng.standard_normal(spec.n_students)
    noise = rng.standard_normal((spec.n_students, len(FEATURES)))
    raw = mean + sd * (loadings * ability[:, None]
                       + np.sqrt(1.0 - loadings ** 2) * noise)
    features = np.clip(raw, 0.0, caps)
    total_noise = spec.noise_sd * rng.standard_normal(spec.n_students)

    records: list[AssessmentRecord] = []
    width = len(str(spec.n_students))
    for row_idx in range(spec.n_students):
        values = {name: float(features[row_idx, i]) for i, name in enumerate(FEATURES)}
        partial = AssessmentRecord(student_id=f"s{row_idx + 1:0{width}d}", **values)
        total = composite_score(partial, weights) + float(total_noise[row_idx])
        record = AssessmentRecord(
            student_id=partial.student_id,
            total=float(np.clip(total, 0.0, 100.0)),
            **values,
        )
        record.validate(spec.maxima)
        records.append(record)
    return records

"""Normalization of raw KPI values to [0, 1] scores.

Six scoring shapes cover the registry: a yes/no identity, benchmark
ratios with clamping (used both for percentage targets and minimum
quantity targets), a descending five-band ladder for pollutant limits, a
cohort-quartile ladder for per-capita waste, a cohort min-max rescale for
targets without a numeric benchmark, and a linear ladder for ordinal
levels. Cohort-relative shapes need `CohortStats`, which a scorer fits
once per cohort and can then apply to new records.

Missing values never reach the scoring shapes: they score 0 and are
flagged per municipality, keeping the index defined for every record.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .model import (
    KpiDefinition,
    MunicipalityDataset,
    Registry,
    default_registry,
    registry_codes,
)


@dataclass(frozen=True)
class CohortStats:
    """Cohort summary a relative scoring shape is evaluated against."""

    count: int
    min: float
    max: float
    q1: float
    q2: float
    q3: float


def compute_cohort_stats(values: Iterable[float]) -> CohortStats:
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise ValueError("cannot compute cohort stats of an empty cohort")
    q1, q2, q3 = np.percentile(arr, [25.0, 50.0, 75.0])
    return CohortStats(
        count=int(arr.size),
        min=float(arr.min()),
        max=float(arr.max()),
        q1=float(q1),
        q2=float(q2),
        q3=float(q3),
    )


# ---- 1) Scoring shapes -------------------------------------------------------


def _check_finite(value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"value must be finite, got {value!r}")
    return value


def score_binary(value: float) -> float:
    """Identity on {0, 1}; anything else is a data error, not a 0."""
    value = _check_finite(value)
    if value == 0.0:
        return 0.0
    if value == 1.0:
        return 1.0
    raise ValueError(f"binary KPI value must be 0 or 1, got {value!r}")


def score_percentage(
    value: float,
    bench: float,
    orientation: str = "higher_is_better",
    stats: CohortStats | None = None,
) -> float:
    """Ratio against a positive benchmark, clamped at 1; with a zero
    benchmark the shape degrades to a cohort min-max rescale (inverted for
    lower_is_better). Values above the benchmark count as full attainment,
    which keeps over-performing municipalities at score 1 instead of
    penalizing the rest of the cohort."""
    value = _check_finite(value)
    if value < 0:
        raise ValueError(f"percentage-scored value must be >= 0, got {value}")
    if bench < 0:
        raise ValueError(f"benchmark must be >= 0, got {bench}")
    if bench > 0:
        return min(value / bench, 1.0)
    if stats is None:
        raise ValueError("cohort stats required when benchmark is 0")
    if stats.max == stats.min:
        return 1.0
    ratio = (value - stats.min) / (stats.max - stats.min)
    ratio = min(max(ratio, 0.0), 1.0)
    return 1.0 - ratio if orientation == "lower_is_better" else ratio


def score_threshold_down(value: float, bench: float) -> float:
    """Descending five-band ladder against an upper limit.

    Bands (value relative to bench b): [0, b/2] -> 1.0, (b/2, b] -> 0.75,
    (b, 3b/2] -> 0.5, (3b/2, 2b] -> 0.25, above 2b -> 0.0. Negative
    readings are rejected rather than scored.
    """
    value = _check_finite(value)
    if bench <= 0:
        raise ValueError(f"benchmark must be > 0, got {bench}")
    if value < 0:
        raise ValueError(f"value must be >= 0, got {value}")
    if value <= 0.5 * bench:
        raw = 4
    elif value <= bench:
        raw = 3
    elif value <= 1.5 * bench:
        raw = 2
    elif value <= 2.0 * bench:
        raw = 1
    else:
        raw = 0
    return raw / 4.0


def score_threshold_up(value: float, bench: float) -> float:
    """Ratio toward a minimum quantity target, clamped at 1."""
    value = _check_finite(value)
    if bench <= 0:
        raise ValueError(f"benchmark must be > 0, got {bench}")
    if value < 0:
        raise ValueError(f"value must be >= 0, got {value}")
    return min(value / bench, 1.0)


def score_quartile_down(value: float, stats: CohortStats | None) -> float:
    """Cohort-quartile ladder where lower raw values are better.

    Raw scores by quartile are 4 / 3 / 1 / 0 (the third band deliberately
    skips 2), normalized by 4. Boundary ties land in the better class.
    """
    value = _check_finite(value)
    if stats is None:
        raise ValueError("cohort stats required for quartile scoring")
    if value <= stats.q1:
        raw = 4
    elif value <= stats.q2:
        raw = 3
    elif value <= stats.q3:
        raw = 1
    else:
        raw = 0
    return raw / 4.0


def score_levels(value: float, max_level: int) -> float:
    """Linear ladder over integer levels 0..max_level."""
    value = _check_finite(value)
    if max_level < 1:
        raise ValueError(f"max_level must be >= 1, got {max_level}")
    if value != int(value) or not 0 <= value <= max_level:
        raise ValueError(f"level must be an integer in 0..{max_level}, got {value!r}")
    return int(value) / max_level


def score_kpi(kpi: KpiDefinition, value: float, stats: CohortStats | None) -> float:
    """Apply a KPI's configured scoring shape to one raw value."""
    fn = kpi.scoring_function
    if fn == "binary":
        return score_binary(value)
    if fn == "percentage":
        return score_percentage(value, float(kpi.benchmark), kpi.orientation, stats)
    if fn == "threshold_down":
        return score_threshold_down(value, float(kpi.benchmark))
    if fn == "threshold_up":
        return score_threshold_up(value, float(kpi.benchmark))
    if fn == "quartile_down":
        return score_quartile_down(value, stats)
    if fn == "levels_linear":
        return score_levels(value, int(kpi.max_level))
    raise ValueError(f"unknown scoring function {fn!r}")  # pragma: no cover


# ---- 2) Dataset scoring ------------------------------------------------------


@dataclass(frozen=True)
class ScoreTable:
    """Per-municipality KPI scores plus the cohort stats they used."""

    municipality_ids: tuple[str, ...]
    scores: Mapping[str, Mapping[str, float]]
    cohort_stats: Mapping[str, CohortStats | None]
    missing: Mapping[str, tuple[str, ...]]
    registry: Registry


def fit_cohort_stats(ds: MunicipalityDataset) -> dict[str, CohortStats | None]:
    """Cohort stats per KPI over the non-missing values of the dataset."""
    stats: dict[str, CohortStats | None] = {}
    for kpi in ds.registry:
        values = [
            rec.kpi_values[kpi.code]
            for rec in ds.records
            if rec.kpi_values.get(kpi.code) is not None
        ]
        stats[kpi.code] = compute_cohort_stats(values) if values else None
    return stats


def score_with_stats(
    ds: MunicipalityDataset, cohort_stats: Mapping[str, CohortStats | None]
) -> ScoreTable:
    scores: dict[str, dict[str, float]] = {}
    missing: dict[str, tuple[str, ...]] = {}
    for rec in ds.records:
        row: dict[str, float] = {}
        absent: list[str] = []
        for kpi in ds.registry:
            value = rec.kpi_values.get(kpi.code)
            if value is None:
                row[kpi.code] = 0.0
                absent.append(kpi.code)
            else:
                row[kpi.code] = score_kpi(kpi, value, cohort_stats.get(kpi.code))
        scores[rec.municipality_id] = row
        missing[rec.municipality_id] = tuple(absent)
    return ScoreTable(
        municipality_ids=ds.ids(),
        scores=scores,
        cohort_stats=dict(cohort_stats),
        missing=missing,
        registry=ds.registry,
    )


def score_dataset(ds: MunicipalityDataset, registry: Registry | None = None) -> ScoreTable:
    """Score a dataset against its own cohort statistics."""
    if registry is not None and registry_codes(registry) != registry_codes(ds.registry):
        raise ValueError("registry does not match the dataset registry")
    return score_with_stats(ds, fit_cohort_stats(ds))


class KpiScorer(BaseEstimator, TransformerMixin):
    """Estimator wrapper: fit learns cohort statistics, transform scores.

    Fitting on one cohort and transforming another scores the new records
    against the fitted cohort's quartiles and min-max ranges, which is the
    right behavior for scoring late-arriving municipalities.
    """

    def __init__(self, registry: Registry | None = None):
        self.registry = registry

    def _resolved_registry(self, ds: MunicipalityDataset) -> Registry:
        return self.registry if self.registry is not None else ds.registry

    def fit(self, X: MunicipalityDataset, y=None) -> "KpiScorer":
        registry = self._resolved_registry(X)
        if registry_codes(registry) != registry_codes(X.registry):
            raise ValueError("registry does not match the dataset registry")
        self.registry_ = registry
        self.cohort_stats_ = fit_cohort_stats(X)
        return self

    def transform(self, X: MunicipalityDataset) -> ScoreTable:
        if not hasattr(self, "cohort_stats_"):
            raise NotFittedError("KpiScorer must be fitted before transform")
        if registry_codes(X.registry) != registry_codes(self.registry_):
            raise ValueError("registry does not match the fitted registry")
        return score_with_stats(X, self.cohort_stats_)


def default_scorer() -> KpiScorer:
    return KpiScorer(registry=default_registry().kpis)

"""Weighted aggregation: KPI scores -> area sub-scores -> composite index.

All weighted sums run on exact rationals (weights are decimal-parsed
Fractions, scores are lifted exactly from their float values), so an
all-ones score vector aggregates to exactly 100 and equal area weights
reduce exactly to the arithmetic mean of the sub-scores. Floats appear
only in the returned objects.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from sklearn.base import BaseEstimator, TransformerMixin

from .model import (
    AREA_ORDER,
    IndexResult,
    WeightConfig,
    as_weight,
    default_registry,
    kpis_of_area,
    validate_weight_config,
)
from .scoring import ScoreTable

#: default per-household electrical demand used by the self-sufficiency ratio, kW
DEFAULT_PER_HOUSEHOLD_KW = 3.3

WEIGHT_SUM_TOL = Fraction(1, 10**9)


@dataclass(frozen=True)
class EnergyCapacityRecord:
    """Installed residential renewable capacity for one municipality."""

    municipality_id: str
    renewable_capacity_kw: float
    households: int | None

    def __post_init__(self) -> None:
        if self.renewable_capacity_kw < 0:
            raise ValueError(f"{self.municipality_id}: renewable capacity < 0")
        if self.households is not None and self.households < 0:
            raise ValueError(f"{self.municipality_id}: households < 0")


def compute_self_sufficiency(
    rec: EnergyCapacityRecord, per_household_kw: float = DEFAULT_PER_HOUSEHOLD_KW
) -> float | None:
    """Installed renewable capacity over the household baseline demand.

    The baseline is households times per_household_kw. With zero or
    unknown households the ratio is undefined and the KPI is missing
    (None), never a division error. The ratio may exceed 1; clamping is
    the scoring stage's job.
    """
    if per_household_kw <= 0:
        raise ValueError(f"per_household_kw must be > 0, got {per_household_kw}")
    if not rec.households:
        return None
    capacity = Fraction(str(float(rec.renewable_capacity_kw)))
    demand = rec.households * Fraction(str(float(per_household_kw)))
    return float(capacity / demand)


def area_subscore(
    scores: Mapping[str, float], weights: Mapping[str, float | Fraction]
) -> float:
    """Weighted sum of one area's KPI scores; weights must cover exactly
    the provided KPIs and sum to 1."""
    if set(scores) != set(weights):
        raise ValueError(
            f"score/weight key mismatch: {sorted(set(scores) ^ set(weights))}"
        )
    rational = {code: as_weight(w) for code, w in weights.items()}
    total = sum(rational.values(), Fraction(0))
    if abs(total - 1) > WEIGHT_SUM_TOL:
        raise ValueError(f"weights sum {float(total)} != 1")
    acc = sum(
        (rational[code] * Fraction(float(scores[code])) for code in sorted(scores)),
        Fraction(0),
    )
    return float(acc)


def compute_cci(table: ScoreTable, cfg: WeightConfig) -> list[IndexResult]:
    """Aggregate a score table into per-municipality index results.

    Results are sorted by municipality id. Likert levels stay unset
    until classification.
    """
    report = validate_weight_config(cfg, table.registry)
    if not report.ok():
        details = "; ".join(i.message for i in report.errors())
        raise ValueError(f"invalid weight config: {details}")

    members = {area: kpis_of_area(table.registry, area) for area in AREA_ORDER}
    results: list[IndexResult] = []
    for mid in sorted(table.municipality_ids):
        row = table.scores[mid]
        subs_exact: dict = {}
        for area in AREA_ORDER:
            subs_exact[area] = sum(
                (cfg.kpi_weights[k.code] * Fraction(float(row[k.code])) for k in members[area]),
                Fraction(0),
            )
        cci_exact = sum(
            (cfg.area_weights[area] * subs_exact[area] for area in AREA_ORDER), Fraction(0)
        )
        results.append(
            IndexResult(
                municipality_id=mid,
                kpi_scores=dict(row),
                area_subscores={a: float(s) for a, s in subs_exact.items()},
                cci=float(100 * cci_exact),
                likert_level=None,
                missing_kpis=table.missing.get(mid, ()),
            )
        )
    return results


class CciAggregator(BaseEstimator, TransformerMixin):
    """Estimator wrapper around compute_cci so scoring and aggregation
    compose in a pipeline. Stateless; fit only validates."""

    def __init__(self, weights: WeightConfig | None = None):
        self.weights = weights

    def _resolved(self) -> WeightConfig:
        return self.weights if self.weights is not None else default_registry().weights

    def fit(self, X: ScoreTable, y=None) -> "CciAggregator":
        report = validate_weight_config(self._resolved(), X.registry)
        if not report.ok():
            details = "; ".join(i.message for i in report.errors())
            raise ValueError(f"invalid weight config: {details}")
        return self

    def transform(self, X: ScoreTable) -> list[IndexResult]:
        return compute_cci(X, self._resolved())


def results_by_id(results: Sequence[IndexResult]) -> dict[str, IndexResult]:
    return {r.municipality_id: r for r in results}

"""Descriptive statistics, correlations, and weight-sensitivity sweeps.

The sweep machinery keeps every weight vector rational: moving one area
weight to a grid value rescales the remaining areas by an exact factor,
so sums stay at exactly 1 and untouched ratios are preserved without
rounding. Index values only become floats once per grid point, which
makes repeated sweeps byte-for-byte reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .aggregate import compute_cci
from .model import AreaId, WeightConfig, as_weight
from .scoring import ScoreTable

MIN_SWEEP_WEIGHT = Fraction(1, 20)
MAX_SWEEP_WEIGHT = Fraction(1, 2)
DEFAULT_SWEEP_GRID: tuple[Fraction, ...] = tuple(Fraction(i, 20) for i in range(1, 11))
HISTOGRAM_BINS = 20


# ---- 1) Descriptive statistics ----


@dataclass(frozen=True)
class DescriptiveStats:
    """Summary of one numeric vector, missing entries excluded."""

    count: int
    mean: float
    std: float
    min: float
    p25: float
    p50: float
    p75: float
    max: float
    warnings: tuple[str, ...] = ()

    def as_rows(self) -> dict[str, float]:
        return {
            "count": float(self.count),
            "mean": self.mean,
            "std": self.std,
            "min": self.min,
            "25%": self.p25,
            "50%": self.p50,
            "75%": self.p75,
            "max": self.max,
        }


def _finite(values: Sequence[float | None]) -> list[float]:
    out = []
    for v in values:
        if v is None:
            continue
        f = float(v)
        if math.isfinite(f):
            out.append(f)
    return out


def descriptive_stats(values: Sequence[float | None]) -> DescriptiveStats:
    """Count, mean, sample std, min, quartiles, and max of a vector.

    ``None`` and non-finite entries are dropped before anything is
    computed, so ``count`` reports actual coverage. Sample std uses
    the n-1 denominator; a single observation yields 0 with a warning.
    """
    data = _finite(values)
    if not data:
        raise ValueError("descriptive stats need at least one finite value")
    arr = np.asarray(data, dtype=float)
    warnings: list[str] = []
    if arr.size == 1:
        std = 0.0
        warnings.append("sample std undefined for a single value, reporting 0")
    else:
        std = float(np.std(arr, ddof=1))
    q1, q2, q3 = (float(q) for q in np.percentile(arr, [25, 50, 75]))
    return DescriptiveStats(
        count=int(arr.size),
        mean=float(np.mean(arr)),
        std=std,
        min=float(np.min(arr)),
        p25=q1,
        p50=q2,
        p75=q3,
        max=float(np.max(arr)),
        warnings=tuple(warnings),
    )


# ---- 2) Correlation matrix ----


@dataclass(frozen=True)
class CorrelationMatrix:
    names: tuple[str, ...]
    values: tuple[tuple[float, ...], ...]
    warnings: tuple[str, ...] = ()


def correlation_matrix(columns: Mapping[str, Sequence[float | None]]) -> CorrelationMatrix:
    """Pearson correlations with pairwise deletion of missing entries.

    The diagonal is exactly 1. A pair with fewer than two overlapping
    observations, or where either column is constant on the overlap,
    gets correlation 0 and a warning instead of NaN.
    """
    names = tuple(columns)
    if not names:
        raise ValueError("correlation matrix needs at least one column")
    length = len(columns[names[0]])
    arrays = {}
    for name in names:
        col = columns[name]
        if len(col) != length:
            raise ValueError(f"column {name} has length {len(col)}, expected {length}")
        arr = np.asarray(
            [math.nan if v is None else float(v) for v in col], dtype=float
        )
        arrays[name] = arr

    warnings: list[str] = []
    n = len(names)
    out = [[0.0] * n for _ in range(n)]
    for i in range(n):
        out[i][i] = 1.0
        for j in range(i + 1, n):
            a, b = arrays[names[i]], arrays[names[j]]
            mask = np.isfinite(a) & np.isfinite(b)
            r = 0.0
            if int(mask.sum()) < 2:
                warnings.append(
                    f"{names[i]}/{names[j]}: fewer than 2 overlapping observations, correlation set to 0"
                )
            else:
                av, bv = a[mask], b[mask]
                da, db = av - av.mean(), bv - bv.mean()
                va, vb = float(np.dot(da, da)), float(np.dot(db, db))
                if va == 0.0 or vb == 0.0:
                    constant = names[i] if va == 0.0 else names[j]
                    warnings.append(
                        f"{constant}: constant on overlap with "
                        f"{names[j] if constant == names[i] else names[i]}, correlation set to 0"
                    )
                else:
                    r = float(np.dot(da, db) / math.sqrt(va * vb))
                    r = max(-1.0, min(1.0, r))
            out[i][j] = r
            out[j][i] = r
    return CorrelationMatrix(
        names=names,
        values=tuple(tuple(row) for row in out),
        warnings=tuple(warnings),
    )


# ---- 3) Weight rescaling ----


def rescale_weights(base: WeightConfig, area: AreaId, new_weight) -> WeightConfig:
    """Move one area weight to ``new_weight``, rescaling the others.

    The remaining areas are multiplied by (1 - new) / (1 - old), which
    keeps their mutual ratios exact and the total at exactly 1. The
    target must lie in the sweep band [0.05, 0.5].
    """
    area = AreaId(area)
    if area not in base.area_weights:
        raise ValueError(f"area {area.value} not present in weight config")
    target = as_weight(new_weight)
    if not MIN_SWEEP_WEIGHT <= target <= MAX_SWEEP_WEIGHT:
        raise ValueError(
            f"area weight {float(target)} outside the allowed band [0.05, 0.5]"
        )
    current = base.area_weights[area]
    remaining = 1 - current
    if remaining == 0:
        raise ValueError(f"cannot rescale: area {area.value} already holds all weight")
    factor = (1 - target) / remaining
    updated = {
        a: (target if a == area else w * factor) for a, w in base.area_weights.items()
    }
    return base.with_area_weights(updated)


def equal_weight_baseline(table: ScoreTable, base: WeightConfig):
    """Index results with all four area weights forced to 1/4."""
    equal = base.with_area_weights({a: Fraction(1, 4) for a in base.area_weights})
    return compute_cci(table, equal)


# ---- 4) Sensitivity sweep ----


@dataclass(frozen=True)
class SweepPoint:
    weight: Fraction
    config: WeightConfig
    cci: dict[str, float]
    stats: DescriptiveStats


@dataclass(frozen=True)
class SweepResult:
    """One-area weight sweep: per-point index values and deviations.

    ``max_delta`` holds, per municipality, the largest percentage
    deviation from the baseline index across the grid. Municipalities
    whose baseline index is 0 appear in ``absolute_ids`` and report
    absolute deviations instead.
    """

    area: AreaId
    grid: tuple[Fraction, ...]
    baseline: dict[str, float]
    points: tuple[SweepPoint, ...]
    max_delta: dict[str, float]
    absolute_ids: tuple[str, ...]
    delta_mean: float
    histogram: tuple[tuple[float, float, int], ...]

    def to_json_dict(self) -> dict:
        return {
            "area": self.area.value,
            "grid": [float(g) for g in self.grid],
            "baseline": {mid: self.baseline[mid] for mid in sorted(self.baseline)},
            "points": [
                {
                    "weight": float(p.weight),
                    "area_weights": {
                        a.value: float(w) for a, w in sorted(p.config.area_weights.items())
                    },
                    "cci": {mid: p.cci[mid] for mid in sorted(p.cci)},
                    "stats": p.stats.as_rows(),
                }
                for p in self.points
            ],
            "max_delta": {mid: self.max_delta[mid] for mid in sorted(self.max_delta)},
            "absolute_ids": list(self.absolute_ids),
            "delta_mean": self.delta_mean,
            "histogram": [[lo, hi, count] for lo, hi, count in self.histogram],
        }


def sweep_area_weight(
    table: ScoreTable,
    base: WeightConfig,
    area: AreaId,
    grid: Sequence | None = None,
) -> SweepResult:
    """Sweep one area weight over a grid and measure index deviation."""
    area = AreaId(area)
    grid_fracs = (
        DEFAULT_SWEEP_GRID if grid is None else tuple(as_weight(g) for g in grid)
    )
    for g in grid_fracs:
        if not MIN_SWEEP_WEIGHT <= g <= MAX_SWEEP_WEIGHT:
            raise ValueError(
                f"grid value {float(g)} outside the allowed band [0.05, 0.5]"
            )

    baseline = {r.municipality_id: r.cci for r in compute_cci(table, base)}
    points: list[SweepPoint] = []
    max_delta = {mid: 0.0 for mid in baseline}
    absolute: set[str] = {mid for mid, c in baseline.items() if c == 0.0}

    for g in grid_fracs:
        cfg = rescale_weights(base, area, g)
        cci = {r.municipality_id: r.cci for r in compute_cci(table, cfg)}
        for mid, c0 in baseline.items():
            if c0 == 0.0:
                delta = abs(cci[mid])
            else:
                delta = abs(cci[mid] - c0) / c0 * 100.0
            if delta > max_delta[mid]:
                max_delta[mid] = delta
        points.append(
            SweepPoint(
                weight=g,
                config=cfg,
                cci=cci,
                stats=descriptive_stats(list(cci.values())),
            )
        )

    deltas = np.asarray(sorted(max_delta.values()), dtype=float)
    top = float(deltas.max()) if deltas.size else 0.0
    if top == 0.0:
        histogram: tuple[tuple[float, float, int], ...] = ((0.0, 0.0, int(deltas.size)),)
    else:
        counts, edges = np.histogram(deltas, bins=HISTOGRAM_BINS, range=(0.0, top))
        histogram = tuple(
            (float(edges[i]), float(edges[i + 1]), int(counts[i]))
            for i in range(len(counts))
        )
    return SweepResult(
        area=area,
        grid=grid_fracs,
        baseline=baseline,
        points=tuple(points),
        max_delta=max_delta,
        absolute_ids=tuple(sorted(absolute)),
        delta_mean=float(deltas.mean()) if deltas.size else 0.0,
        histogram=histogram,
    )

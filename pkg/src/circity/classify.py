"""Natural-breaks (Jenks) classification of cohort values into k classes.

The optimizer partitions the sorted values into contiguous classes
minimizing the within-class sum of squared deviations (SDCM). Cuts are
only placed between distinct values, so duplicates never straddle a
break and breaks are strictly ascending. Ties are resolved by the
smallest first break, then lexicographically.

Two independent routes are provided: `jenks_breaks` (dynamic
programming) and `jenks_oracle` (exhaustive enumeration, small inputs
only). For cohorts with at most EXACT_LIMIT distinct values both routes
evaluate class costs in exact rational arithmetic, which is what makes
the tie-break well-defined and lets the routes agree bit-for-bit;
larger cohorts use a vectorized float DP where the oracle is out of
reach anyway.
"""

from __future__ import annotations

import logging
from bisect import bisect_left
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import column_or_1d

logger = logging.getLogger(__name__)

#: beyond this many distinct values, switch from exact rational costs to floats
EXACT_LIMIT = 64

#: the enumeration oracle refuses instances with more values than this
ORACLE_LIMIT = 14


@dataclass(frozen=True)
class BreaksClassification:
    """A k-class partition: upper bounds, fit quality and per-value classes."""

    k: int
    breaks: tuple[float, ...]  # ascending class upper bounds; last == max(values)
    sdcm: float  # within-class sum of squared deviations
    gvf: float  # goodness of variance fit, 1 - SDCM/SDAM
    assignments: tuple[int, ...]  # 1-based class per value, in input order


def _checked_values(values: Sequence[float]) -> np.ndarray:
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise ValueError("cannot classify an empty value list")
    if not np.isfinite(arr).all():
        raise ValueError("values must be finite")
    return arr


def _grouped(arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.unique(arr, return_counts=True)


def _assignments(arr: np.ndarray, breaks: tuple[float, ...]) -> tuple[int, ...]:
    idx = np.searchsorted(np.asarray(breaks), arr, side="left")
    return tuple(int(i) + 1 for i in idx)


# ---- 1) Exact-cost dynamic programming ---------------------------------------


def _exact_cost_fn(gvals: np.ndarray, counts: np.ndarray):
    G = len(gvals)
    w = [0] * (G + 1)
    s1 = [Fraction(0)] * (G + 1)
    s2 = [Fraction(0)] * (G + 1)
    for i in range(G):
        v = Fraction(float(gvals[i]))
        c = int(counts[i])
        w[i + 1] = w[i] + c
        s1[i + 1] = s1[i] + c * v
        s2[i + 1] = s2[i] + c * v * v

    def cost(i: int, j: int) -> Fraction:
        n = w[j + 1] - w[i]
        a = s1[j + 1] - s1[i]
        return s2[j + 1] - s2[i] - a * a / n

    return cost


def _dp_exact(gvals: np.ndarray, counts: np.ndarray, k: int):
    G = len(gvals)
    cost = _exact_cost_fn(gvals, counts)
    # levels[m][i] = minimal cost of covering groups i..G-1 with m classes
    levels: list[list[Fraction | None]] = [[None] * (G + 1) for _ in range(k + 1)]
    for i in range(G):
        levels[1][i] = cost(i, G - 1)
    for m in range(2, k + 1):
        for i in range(0, G - m + 1):
            best: Fraction | None = None
            for j in range(i, G - m + 1):
                c = cost(i, j) + levels[m - 1][j + 1]
                if best is None or c < best:
                    best = c
            levels[m][i] = best

    ends: list[int] = []
    i = 0
    for m in range(k, 1, -1):
        best = None
        best_j = -1
        for j in range(i, G - m + 1):
            c = cost(i, j) + levels[m - 1][j + 1]
            if best is None or c < best:  # strict: first minimum wins
                best = c
                best_j = j
        ends.append(best_j)
        i = best_j + 1
    ends.append(G - 1)

    total = levels[k][0]
    sdam = cost(0, G - 1)
    gvf = Fraction(1) if sdam == 0 else 1 - total / sdam
    return ends, float(total), float(gvf)


# ---- 2) Float dynamic programming for large cohorts --------------------------


def _dp_float(gvals: np.ndarray, counts: np.ndarray, k: int):
    G = len(gvals)
    c = counts.astype(float)
    w = np.concatenate(([0.0], np.cumsum(c)))
    s1 = np.concatenate(([0.0], np.cumsum(c * gvals)))
    s2 = np.concatenate(([0.0], np.cumsum(c * gvals * gvals)))

    def cost_vec(i: int, js: np.ndarray) -> np.ndarray:
        n = w[js + 1] - w[i]
        a = s1[js + 1] - s1[i]
        return s2[js + 1] - s2[i] - a * a / n

    levels = np.full((k + 1, G + 1), np.inf)
    idx = np.arange(G)
    levels[1, :G] = s2[G] - s2[idx] - (s1[G] - s1[idx]) ** 2 / (w[G] - w[idx])
    for m in range(2, k + 1):
        for i in range(0, G - m + 1):
            js = np.arange(i, G - m + 1)
            cand = cost_vec(i, js) + levels[m - 1, js + 1]
            levels[m, i] = cand.min()

    ends: list[int] = []
    i = 0
    for m in range(k, 1, -1):
        js = np.arange(i, G - m + 1)
        cand = cost_vec(i, js) + levels[m - 1, js + 1]
        best_j = i + int(np.argmin(cand))  # argmin returns the first minimum
        ends.append(best_j)
        i = best_j + 1
    ends.append(G - 1)

    total = float(levels[k, 0])
    sdam = float(s2[G] - s1[G] ** 2 / w[G])
    gvf = 1.0 if sdam <= 0 else min(max(1.0 - total / sdam, 0.0), 1.0)
    return ends, total, gvf


# ---- 3) Public routes --------------------------------------------------------


def jenks_breaks(values: Sequence[float], k: int) -> BreaksClassification:
    """Optimal k-class natural breaks of a value cohort.

    Requires 1 <= k <= number of distinct values.
    """
    arr = _checked_values(values)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    gvals, counts = _grouped(arr)
    if k > len(gvals):
        raise ValueError(f"k={k} exceeds the {len(gvals)} distinct values")
    if len(gvals) <= EXACT_LIMIT:
        ends, sdcm, gvf = _dp_exact(gvals, counts, k)
    else:
        ends, sdcm, gvf = _dp_float(gvals, counts, k)
    breaks = tuple(float(gvals[e]) for e in ends)
    return BreaksClassification(
        k=k, breaks=breaks, sdcm=sdcm, gvf=gvf, assignments=_assignments(arr, breaks)
    )


def jenks_oracle(values: Sequence[float], k: int) -> BreaksClassification:
    """Brute-force reference: enumerate every contiguous k-partition.

    Independent of the DP route; costs are computed naively per class in
    exact rationals. Only for small instances (<= ORACLE_LIMIT values).
    """
    arr = _checked_values(values)
    if len(arr) > ORACLE_LIMIT:
        raise ValueError(f"oracle limited to {ORACLE_LIMIT} values, got {len(arr)}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    sv = sorted(float(v) for v in arr)
    n = len(sv)
    if k > len(set(sv)):
        raise ValueError(f"k={k} exceeds the {len(set(sv))} distinct values")
    # legal cut positions: between unequal neighbors only
    boundaries = [p for p in range(1, n) if sv[p] != sv[p - 1]]

    def class_cost(chunk: list[float]) -> Fraction:
        mean = sum((Fraction(x) for x in chunk), Fraction(0)) / len(chunk)
        return sum(((Fraction(x) - mean) ** 2 for x in chunk), Fraction(0))

    best_key: tuple[Fraction, tuple[float, ...]] | None = None
    for cuts in combinations(boundaries, k - 1):
        edges = [0, *cuts, n]
        chunks = [sv[edges[t] : edges[t + 1]] for t in range(k)]
        total = sum((class_cost(ch) for ch in chunks), Fraction(0))
        breaks = tuple(ch[-1] for ch in chunks)
        key = (total, breaks)
        if best_key is None or key < best_key:
            best_key = key
    assert best_key is not None
    total, breaks = best_key
    sdam = class_cost(sv)
    gvf = Fraction(1) if sdam == 0 else 1 - total / sdam
    return BreaksClassification(
        k=k,
        breaks=breaks,
        sdcm=float(total),
        gvf=float(gvf),
        assignments=_assignments(arr, breaks),
    )


def assign_likert(
    values: Sequence[float], breaks: BreaksClassification | Sequence[float]
) -> list[int]:
    """Map values to 1-based levels by their class upper bounds.

    Level k is the best class. A value above the top break still gets
    level k, with a warning, so scoring new data against fitted breaks
    stays total.
    """
    bounds = tuple(breaks.breaks if isinstance(breaks, BreaksClassification) else breaks)
    if not bounds:
        raise ValueError("breaks must be non-empty")
    if list(bounds) != sorted(set(bounds)):
        raise ValueError("breaks must be strictly ascending")
    levels = []
    for v in values:
        idx = bisect_left(bounds, float(v))
        if idx == len(bounds):
            logger.warning(
                "value %s above the top break %s; assigned level %d",
                v,
                bounds[-1],
                len(bounds),
            )
            idx = len(bounds) - 1
        levels.append(idx + 1)
    return levels


class JenksClassifier(BaseEstimator):
    """Estimator wrapper: fit computes breaks, predict assigns levels."""

    def __init__(self, n_classes: int = 5):
        self.n_classes = n_classes

    def fit(self, X, y=None) -> "JenksClassifier":
        values = column_or_1d(np.asarray(X, dtype=float))
        self.classification_ = jenks_breaks(values, self.n_classes)
        self.breaks_ = self.classification_.breaks
        self.sdcm_ = self.classification_.sdcm
        self.gvf_ = self.classification_.gvf
        return self

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "classification_"):
            raise NotFittedError("JenksClassifier must be fitted before predict")
        values = column_or_1d(np.asarray(X, dtype=float))
        return np.asarray(assign_likert(values, self.classification_), dtype=int)

    def fit_predict(self, X, y=None) -> np.ndarray:
        return self.fit(X).predict(X)

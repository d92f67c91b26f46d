"""Domain types shared by every stage of the index pipeline.

Weights are held as exact rationals (``fractions.Fraction``) parsed with
decimal semantics, so weight sums and rescaling factors compare exactly;
floats only appear at the presentation boundary. This is what lets an
all-ones score vector produce an index of exactly 100 and a rescaled
weight vector sum to exactly 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from importlib import resources
from typing import Iterable, Mapping

VALUE_TYPES = frozenset({"binary", "percentage", "levels", "number"})
SCORING_FUNCTIONS = frozenset(
    {"binary", "percentage", "threshold_down", "threshold_up", "quartile_down", "levels_linear"}
)
ORIENTATIONS = frozenset({"higher_is_better", "lower_is_better"})

#: functions whose definition needs a numeric benchmark
_BENCHMARKED = frozenset({"percentage", "threshold_down", "threshold_up"})

#: tolerance for weight-sum validation, as an exact rational
WEIGHT_SUM_TOL = Fraction(1, 10**9)


class AreaId(str, Enum):
    """The four thematic areas a KPI can belong to."""

    D = "D"
    ECR = "ECR"
    M = "M"
    W = "W"

    @property
    def label(self) -> str:
        return _AREA_LABELS[self]


_AREA_LABELS = {
    AreaId.D: "Digitalization",
    AreaId.ECR: "Energy, climate and resources",
    AreaId.M: "Mobility",
    AreaId.W: "Waste",
}

#: canonical area ordering used for every deterministic output
AREA_ORDER: tuple[AreaId, ...] = (AreaId.D, AreaId.ECR, AreaId.M, AreaId.W)


def as_weight(value: int | float | str | Fraction) -> Fraction:
    """Convert a weight-like value to an exact rational.

    Floats are read through their shortest decimal repr, so 0.2 becomes
    exactly 1/5 rather than the underlying binary float.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("weight cannot be a bool")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(str(value))
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as a weight")


# ---- 1) Validation report ----------------------------------------------------

GLOBAL_SCOPE = "global"


@dataclass(frozen=True)
class ValidationIssue:
    severity: str  # "error" | "warning"
    municipality_id: str  # a roster id or GLOBAL_SCOPE
    message: str

    def __post_init__(self) -> None:
        if self.severity not in ("error", "warning"):
            raise ValueError(f"unknown severity {self.severity!r}")


@dataclass(frozen=True)
class ValidationReport:
    """Ordered collection of validation findings plus per-KPI coverage counts.

    Entries are always sorted by (municipality id, message) so reports are
    reproducible regardless of discovery order.
    """

    issues: tuple[ValidationIssue, ...] = ()
    coverage: Mapping[str, int] = field(default_factory=dict)

    @staticmethod
    def from_issues(
        issues: Iterable[ValidationIssue], coverage: Mapping[str, int] | None = None
    ) -> "ValidationReport":
        ordered = tuple(sorted(issues, key=lambda i: (i.municipality_id, i.message)))
        return ValidationReport(ordered, dict(coverage or {}))

    def errors(self) -> tuple[ValidationIssue, ...]:
        return tuple(i for i in self.issues if i.severity == "error")

    def warnings(self) -> tuple[ValidationIssue, ...]:
        return tuple(i for i in self.issues if i.severity == "warning")

    def ok(self) -> bool:
        return not self.errors()

    def merged(self, other: "ValidationReport") -> "ValidationReport":
        coverage = dict(self.coverage)
        coverage.update(other.coverage)
        return ValidationReport.from_issues(self.issues + other.issues, coverage)


# ---- 2) KPI registry ---------------------------------------------------------


@dataclass(frozen=True)
class KpiDefinition:
    """One row of the KPI registry: identity, weight and scoring recipe."""

    code: str
    area: AreaId
    weight: Fraction
    value_type: str
    scoring_function: str
    benchmark: float | None = None
    max_level: int | None = None
    orientation: str = "higher_is_better"
    description: str = ""
    source_note: str = ""

    def __post_init__(self) -> None:
        if not self.code:
            raise ValueError("KPI code must be non-empty")
        object.__setattr__(self, "weight", as_weight(self.weight))
        if not 0 <= self.weight <= 1:
            raise ValueError(f"{self.code}: weight {self.weight} outside [0, 1]")
        if self.value_type not in VALUE_TYPES:
            raise ValueError(f"{self.code}: unknown value_type {self.value_type!r}")
        if self.scoring_function not in SCORING_FUNCTIONS:
            raise ValueError(f"{self.code}: unknown scoring_function {self.scoring_function!r}")
        if self.orientation not in ORIENTATIONS:
            raise ValueError(f"{self.code}: unknown orientation {self.orientation!r}")
        if self.scoring_function in _BENCHMARKED:
            if self.benchmark is None:
                raise ValueError(f"{self.code}: {self.scoring_function} needs a benchmark")
            if self.benchmark < 0:
                raise ValueError(f"{self.code}: benchmark must be >= 0")
        elif self.benchmark is not None:
            raise ValueError(f"{self.code}: benchmark not allowed for {self.scoring_function}")
        if self.scoring_function == "levels_linear":
            if self.max_level is None or self.max_level < 1:
                raise ValueError(f"{self.code}: levels_linear needs max_level >= 1")
        elif self.max_level is not None:
            raise ValueError(f"{self.code}: max_level only allowed for levels_linear")
        if self.scoring_function == "threshold_down" and self.orientation != "lower_is_better":
            raise ValueError(f"{self.code}: threshold_down implies lower_is_better")
        if self.scoring_function == "threshold_up" and self.orientation != "higher_is_better":
            raise ValueError(f"{self.code}: threshold_up implies higher_is_better")


@dataclass(frozen=True)
class WeightConfig:
    """Area-level and KPI-level weights, stored as exact rationals."""

    area_weights: Mapping[AreaId, Fraction]
    kpi_weights: Mapping[str, Fraction]

    def __post_init__(self) -> None:
        areas = {AreaId(k): as_weight(v) for k, v in self.area_weights.items()}
        kpis = {str(k): as_weight(v) for k, v in self.kpi_weights.items()}
        object.__setattr__(self, "area_weights", areas)
        object.__setattr__(self, "kpi_weights", kpis)

    def area_weight(self, area: AreaId) -> Fraction:
        return self.area_weights[area]

    def kpi_weight(self, code: str) -> Fraction:
        return self.kpi_weights[code]

    def with_area_weights(self, area_weights: Mapping[AreaId, Fraction]) -> "WeightConfig":
        return WeightConfig(dict(area_weights), dict(self.kpi_weights))


Registry = tuple[KpiDefinition, ...]


def registry_codes(registry: Registry) -> tuple[str, ...]:
    return tuple(k.code for k in registry)


def registry_kpi(registry: Registry, code: str) -> KpiDefinition:
    for kpi in registry:
        if kpi.code == code:
            return kpi
    raise KeyError(f"unknown KPI code {code!r}")


def kpis_of_area(registry: Registry, area: AreaId) -> tuple[KpiDefinition, ...]:
    return tuple(k for k in registry if k.area == area)


def validate_weight_config(cfg: WeightConfig, registry: Registry) -> ValidationReport:
    """Check weight bounds and sum constraints; violations are reported, not raised."""
    issues: list[ValidationIssue] = []

    def problem(message: str) -> None:
        issues.append(ValidationIssue("error", GLOBAL_SCOPE, message))

    for area in AREA_ORDER:
        if area not in cfg.area_weights:
            problem(f"missing weight for area {area.value}")
        elif cfg.area_weights[area] < 0:
            problem(f"area {area.value} weight {float(cfg.area_weights[area])} < 0")
    for area in cfg.area_weights:
        if area not in AREA_ORDER:
            problem(f"unknown area {area} in weights")

    area_sum = sum((cfg.area_weights.get(a, Fraction(0)) for a in AREA_ORDER), Fraction(0))
    if abs(area_sum - 1) > WEIGHT_SUM_TOL:
        problem(f"area weights sum {float(area_sum)} != 1")

    codes = set(registry_codes(registry))
    for code in sorted(codes):
        if code not in cfg.kpi_weights:
            problem(f"missing weight for KPI {code}")
        elif cfg.kpi_weights[code] < 0:
            problem(f"KPI {code} weight {float(cfg.kpi_weights[code])} < 0")
    for code in sorted(cfg.kpi_weights):
        if code not in codes:
            problem(f"weight for unknown KPI {code}")

    for area in AREA_ORDER:
        members = kpis_of_area(registry, area)
        if not members:
            continue
        ksum = sum(
            (cfg.kpi_weights.get(k.code, Fraction(0)) for k in members), Fraction(0)
        )
        if abs(ksum - 1) > WEIGHT_SUM_TOL:
            problem(f"KPI weights for area {area.value} sum {float(ksum)} != 1")

    return ValidationReport.from_issues(issues)


# ---- 3) Registry configuration file -----------------------------------------


@dataclass(frozen=True)
class RegistryConfig:
    """A registry plus the weight configuration it was loaded with."""

    kpis: Registry
    weights: WeightConfig


def _kpi_from_mapping(row: Mapping[str, object]) -> KpiDefinition:
    known = {
        "code",
        "area",
        "weight",
        "value_type",
        "scoring_function",
        "benchmark",
        "max_level",
        "orientation",
        "description",
        "ideal_note",
        "source_note",
    }
    unknown = set(row) - known
    if unknown:
        raise ValueError(f"unknown registry keys {sorted(unknown)}")
    source = str(row.get("source_note", ""))
    ideal = row.get("ideal_note")
    if ideal:
        source = f"{source} (ideal: {ideal})" if source else f"ideal: {ideal}"
    benchmark = row.get("benchmark")
    return KpiDefinition(
        code=str(row["code"]),
        area=AreaId(str(row["area"])),
        weight=as_weight(row["weight"]),  # type: ignore[arg-type]
        value_type=str(row["value_type"]),
        scoring_function=str(row["scoring_function"]),
        benchmark=None if benchmark is None else float(benchmark),  # type: ignore[arg-type]
        max_level=None if row.get("max_level") is None else int(row["max_level"]),  # type: ignore[arg-type]
        orientation=str(row.get("orientation", "higher_is_better")),
        description=str(row.get("description", "")),
        source_note=source,
    )


def parse_registry_config(doc: Mapping[str, object]) -> RegistryConfig:
    try:
        raw_areas = doc["area_weights"]
        raw_kpis = doc["kpis"]
    except KeyError as exc:
        raise ValueError(f"registry file missing key {exc.args[0]!r}") from None
    kpis = tuple(_kpi_from_mapping(row) for row in raw_kpis)  # type: ignore[union-attr]
    seen: set[str] = set()
    for kpi in kpis:
        if kpi.code in seen:
            raise ValueError(f"duplicate KPI code {kpi.code}")
        seen.add(kpi.code)
    area_weights = {AreaId(k): as_weight(v) for k, v in raw_areas.items()}  # type: ignore[union-attr]
    weights = WeightConfig(area_weights, {k.code: k.weight for k in kpis})
    return RegistryConfig(kpis, weights)


def load_registry(path: str) -> RegistryConfig:
    """Load a registry configuration file (JSON, schema documented in the README)."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return parse_registry_config(doc)


_DEFAULT: RegistryConfig | None = None


def default_registry() -> RegistryConfig:
    """The bundled 17-KPI registry with its published weights."""
    global _DEFAULT
    if _DEFAULT is None:
        text = resources.files("circity").joinpath("data/default_registry.json").read_text("utf-8")
        _DEFAULT = parse_registry_config(json.loads(text))
    return _DEFAULT


# ---- 4) Municipality data ----------------------------------------------------


@dataclass(frozen=True)
class MunicipalityRecord:
    """One municipality's metadata and raw KPI values (None marks missing)."""

    municipality_id: str
    name: str
    region: str
    population: int
    land_area_km2: float
    households: int | None = None
    kpi_values: Mapping[str, float | None] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.municipality_id:
            raise ValueError("municipality_id must be non-empty")
        if self.population < 0:
            raise ValueError(f"{self.municipality_id}: population < 0")
        if not self.land_area_km2 > 0:
            raise ValueError(f"{self.municipality_id}: land_area_km2 must be > 0")
        if self.households is not None and self.households < 0:
            raise ValueError(f"{self.municipality_id}: households < 0")
        object.__setattr__(self, "kpi_values", dict(self.kpi_values))

    def value(self, code: str) -> float | None:
        return self.kpi_values.get(code)


@dataclass(frozen=True)
class MunicipalityDataset:
    """A cohort of municipalities joined against one KPI registry."""

    records: tuple[MunicipalityRecord, ...]
    registry: Registry

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "registry", tuple(self.registry))
        ids = [r.municipality_id for r in self.records]
        if len(ids) != len(set(ids)):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate municipality ids {dupes}")
        codes = set(registry_codes(self.registry))
        for rec in self.records:
            extra = set(rec.kpi_values) - codes
            if extra:
                raise ValueError(
                    f"{rec.municipality_id}: KPI values {sorted(extra)} not in registry"
                )

    def ids(self) -> tuple[str, ...]:
        return tuple(r.municipality_id for r in self.records)

    def record(self, municipality_id: str) -> MunicipalityRecord:
        for rec in self.records:
            if rec.municipality_id == municipality_id:
                return rec
        raise KeyError(f"unknown municipality {municipality_id!r}")


@dataclass(frozen=True)
class IndexResult:
    """Final per-municipality output: scores, sub-scores, index and class."""

    municipality_id: str
    kpi_scores: Mapping[str, float]
    area_subscores: Mapping[AreaId, float]
    cci: float
    likert_level: int | None = None
    missing_kpis: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "kpi_scores", dict(self.kpi_scores))
        object.__setattr__(self, "area_subscores", dict(self.area_subscores))
        object.__setattr__(self, "missing_kpis", tuple(self.missing_kpis))

    def with_likert(self, level: int) -> "IndexResult":
        return IndexResult(
            self.municipality_id,
            self.kpi_scores,
            self.area_subscores,
            self.cci,
            level,
            self.missing_kpis,
        )

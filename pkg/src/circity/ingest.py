"""CSV ingest: manifest, per-KPI tables, roster, and the joined dataset.

Structural problems (missing columns, unreadable files, duplicate
roster rows) raise :class:`SchemaError` because nothing downstream can
run. Cell-level problems (unparseable numbers, out-of-range values,
duplicate KPI rows) never abort: the offending value becomes missing
and the problem is recorded in the validation report with the raw text
that caused it.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from pathlib import Path
from typing import Mapping

from .aggregate import EnergyCapacityRecord, compute_self_sufficiency
from .model import (
    MunicipalityDataset,
    MunicipalityRecord,
    RegistryConfig,
    ValidationIssue,
    ValidationReport,
    default_registry,
    registry_codes,
)

CAPACITY_KEY = "ECR3_capacity"
CAPACITY_COLUMN = "renewable_capacity_kw"
GEO_KPIS = ("M1", "M2", "M3", "M4")

ROSTER_COLUMNS = ("id", "name", "region", "population", "land_area_km2")


class SchemaError(ValueError):
    """A file cannot be used at all: bad header, bad path, bad roster row."""


@dataclasses.dataclass(frozen=True)
class KpiTable:
    kpi: str
    values: dict[str, float]
    issues: tuple[ValidationIssue, ...] = ()


# ---- 1) Low-level readers ----


def _reader(path) -> tuple[Path, csv.DictReader]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8-sig")
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    return path, csv.DictReader(io.StringIO(text))


def _require_columns(path: Path, reader: csv.DictReader, columns) -> None:
    fields = reader.fieldnames or []
    for column in columns:
        if column not in fields:
            raise SchemaError(f'{path}: missing column "{column}"')


def read_manifest(path) -> dict[str, Path]:
    """Map KPI keys to table paths, resolved relative to the manifest."""
    path, reader = _reader(path)
    _require_columns(path, reader, ("kpi", "path"))
    entries: dict[str, Path] = {}
    for row in reader:
        kpi = (row.get("kpi") or "").strip()
        rel = (row.get("path") or "").strip()
        if not kpi and not rel:
            continue
        if not kpi or not rel:
            raise SchemaError(f"{path}: manifest row needs both kpi and path: {row}")
        if kpi in entries:
            raise SchemaError(f"{path}: duplicate manifest entry for {kpi}")
        entries[kpi] = path.parent / rel
    return entries


def _parse_number(raw: str) -> float | None:
    """Float parse accepting a decimal comma; None when not a number."""
    text = raw.strip()
    if "," in text and "." not in text and text.count(",") == 1:
        text = text.replace(",", ".")
    try:
        value = float(text)
    except ValueError:
        return None
    if not math.isfinite(value):
        return None
    return value


def read_kpi_table(path, kpi: str, value_column: str = "value") -> KpiTable:
    """Read one id/value table; bad cells become issues, never exceptions."""
    path, reader = _reader(path)
    _require_columns(path, reader, ("id", value_column))
    values: dict[str, float] = {}
    issues: list[ValidationIssue] = []
    for row in reader:
        mid = (row.get("id") or "").strip()
        raw = (row.get(value_column) or "").strip()
        if not mid and not raw:
            continue
        if not mid:
            issues.append(
                ValidationIssue("warning", "", f"{kpi}: row without municipality id ignored")
            )
            continue
        if mid in values:
            issues.append(
                ValidationIssue(
                    "error", mid, f"{kpi}: duplicate row, keeping the first value"
                )
            )
            continue
        if raw == "":
            issues.append(ValidationIssue("warning", mid, f"{kpi}: empty value"))
            continue
        value = _parse_number(raw)
        if value is None:
            issues.append(
                ValidationIssue("warning", mid, f"{kpi}: cannot parse value {raw!r}")
            )
            continue
        values[mid] = value
    return KpiTable(kpi=kpi, values=values, issues=tuple(issues))


def _parse_int_field(path: Path, mid: str, field: str, raw: str) -> int:
    value = _parse_number(raw)
    if value is None:
        raise SchemaError(f"{path}: {mid or '?'}: {field} is not a number: {raw!r}")
    if not float(value).is_integer():
        raise SchemaError(f"{path}: {mid or '?'}: {field} must be an integer, got {raw}")
    return int(value)


def read_roster(path) -> list[MunicipalityRecord]:
    """Read the municipality roster; any malformed row is fatal."""
    path, reader = _reader(path)
    _require_columns(path, reader, ROSTER_COLUMNS)
    has_households = "households" in (reader.fieldnames or [])
    records: list[MunicipalityRecord] = []
    seen: set[str] = set()
    for row in reader:
        mid = (row.get("id") or "").strip()
        if not mid and not any((v or "").strip() for v in row.values()):
            continue
        if not mid:
            raise SchemaError(f"{path}: roster row without id: {row}")
        if mid in seen:
            raise SchemaError(f"{path}: duplicate roster id {mid}")
        seen.add(mid)
        population = _parse_int_field(path, mid, "population", row["population"] or "")
        land_raw = (row["land_area_km2"] or "").strip()
        land = _parse_number(land_raw)
        if land is None:
            raise SchemaError(f"{path}: {mid}: land_area_km2 is not a number: {land_raw!r}")
        if not land > 0:
            raise SchemaError(f"{path}: {mid}: land_area_km2 must be > 0, got {land_raw}")
        households: int | None = None
        if has_households and (row.get("households") or "").strip():
            households = _parse_int_field(path, mid, "households", row["households"])
        try:
            records.append(
                MunicipalityRecord(
                    municipality_id=mid,
                    name=(row["name"] or "").strip(),
                    region=(row["region"] or "").strip(),
                    population=population,
                    land_area_km2=land,
                    households=households,
                )
            )
        except ValueError as exc:
            raise SchemaError(f"{path}: {exc}") from exc
    return records


# ---- 2) Range validation ----


def _range_problem(value_type: str, value: float, max_level: int | None) -> str | None:
    if value_type == "binary":
        if value not in (0.0, 1.0):
            return "binary KPIs accept only 0 or 1"
    elif value_type == "percentage":
        if not 0.0 <= value <= 1.0:
            return "percentage KPIs accept only the range [0, 1]"
    elif value_type == "levels":
        if not float(value).is_integer() or not 0 <= value <= (max_level or 0):
            return f"level KPIs accept only integers 0..{max_level}"
    else:
        if value < 0:
            return "numeric KPIs accept only non-negative values"
    return None


# ---- 3) Join ----


def load_dataset(
    manifest_path,
    roster_path,
    registry: RegistryConfig | None = None,
    geo_values: Mapping[str, Mapping[str, float | None]] | None = None,
) -> tuple[MunicipalityDataset, ValidationReport]:
    """Join manifest tables (and optional geo results) onto the roster.

    Precedence per KPI: a table listed in the manifest always wins; geo
    results fill only the mobility KPIs the manifest does not provide,
    and the capacity table derives the self-sufficiency KPI only for
    municipalities without a directly supplied value.
    """
    cfg = registry if registry is not None else default_registry()
    codes = set(registry_codes(cfg.kpis))
    records = read_roster(roster_path)
    roster_ids = {r.municipality_id for r in records}
    by_id = {r.municipality_id: r for r in records}

    entries = read_manifest(manifest_path)
    unknown = sorted(set(entries) - codes - {CAPACITY_KEY})
    if unknown:
        raise SchemaError(f"{manifest_path}: unknown manifest KPIs: {', '.join(unknown)}")

    issues: list[ValidationIssue] = []
    values: dict[str, dict[str, float]] = {mid: {} for mid in roster_ids}

    def _absorb(kpi: str, table: KpiTable) -> None:
        issues.extend(table.issues)
        for mid, value in table.values.items():
            if mid not in roster_ids:
                issues.append(
                    ValidationIssue(
                        "warning", mid, f"{kpi}: unknown municipality id {mid}, row ignored"
                    )
                )
                continue
            values[mid][kpi] = value

    for kpi, table_path in entries.items():
        if kpi == CAPACITY_KEY:
            continue
        _absorb(kpi, read_kpi_table(table_path, kpi))

    if CAPACITY_KEY in entries:
        table = read_kpi_table(entries[CAPACITY_KEY], CAPACITY_KEY, CAPACITY_COLUMN)
        issues.extend(table.issues)
        for mid, capacity in table.values.items():
            if mid not in roster_ids:
                issues.append(
                    ValidationIssue(
                        "warning", mid,
                        f"{CAPACITY_KEY}: unknown municipality id {mid}, row ignored",
                    )
                )
                continue
            if "ECR3" in values[mid]:
                continue  # a directly supplied value takes precedence
            households = by_id[mid].households
            if not households:
                issues.append(
                    ValidationIssue(
                        "warning", mid,
                        "ECR3: households unavailable, self-sufficiency not derived",
                    )
                )
                continue
            try:
                derived = compute_self_sufficiency(
                    EnergyCapacityRecord(mid, capacity, households)
                )
            except ValueError as exc:
                issues.append(ValidationIssue("error", mid, f"ECR3: {exc}"))
                continue
            if derived is not None:
                values[mid]["ECR3"] = derived

    if geo_values is not None:
        fill = [k for k in GEO_KPIS if k in codes and k not in entries]
        for mid, row in geo_values.items():
            if mid not in roster_ids:
                issues.append(
                    ValidationIssue(
                        "warning", mid, f"geo: unknown municipality id {mid}, ignored"
                    )
                )
                continue
            for kpi in fill:
                value = row.get(kpi)
                if value is not None:
                    values[mid][kpi] = float(value)

    for kpi_def in cfg.kpis:
        for mid in sorted(roster_ids):
            value = values[mid].get(kpi_def.code)
            if value is None:
                continue
            problem = _range_problem(kpi_def.value_type, value, kpi_def.max_level)
            if problem is not None:
                issues.append(
                    ValidationIssue(
                        "error", mid,
                        f"{kpi_def.code}: value {value:g} out of range: {problem}",
                    )
                )
                del values[mid][kpi_def.code]

    coverage = {
        code: sum(1 for mid in roster_ids if code in values[mid])
        for code in registry_codes(cfg.kpis)
    }
    joined = tuple(
        dataclasses.replace(rec, kpi_values=values[rec.municipality_id])
        for rec in records
    )
    dataset = MunicipalityDataset(records=joined, registry=cfg.kpis)
    return dataset, ValidationReport.from_issues(issues, coverage)

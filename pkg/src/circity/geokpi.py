"""Mobility indicators from geospatial feature files.

Features arrive as GeoJSON in a planar coordinate system measured in
meters. Per topic the pipeline dissolves overlapping geometries (so a
sidewalk mapped twice is counted once), splits the dissolved pieces
along municipal boundaries, and turns the per-municipality measures
into the four mobility indicators:

    M1  pedestrian area        m2 per 100 inhabitants
    M2  charging stations      count per 1,000 inhabitants
    M3  cycleway length        km per 100 km2 of land area
    M4  bus stops              count per 100 inhabitants

Counts divide populations before any other factor, in an order chosen
so round benchmark inputs produce exact round outputs.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from shapely import set_precision, union_all
from shapely.geometry import shape
from shapely.geometry.base import BaseGeometry

from .model import MunicipalityRecord

TOPICS = ("pedestrian", "cycleway", "bus_stop", "charging_station")
TOPIC_GEOMETRY = {
    "pedestrian": "Polygon",
    "cycleway": "LineString",
    "bus_stop": "Point",
    "charging_station": "Point",
}
TOPIC_KPI = {
    "pedestrian": "M1",
    "charging_station": "M2",
    "cycleway": "M3",
    "bus_stop": "M4",
}

# Snap grid for coordinates read from files. A power of two keeps every
# dyadic coordinate (integers, halves, quarters, ...) bit-identical
# while still collapsing sub-nanometer slivers.
SNAP_GRID = 2.0 ** -30


# ---- 1) Data containers ----


@dataclass(frozen=True)
class GeoFeature:
    """One single-part geometry tagged with its mobility topic."""

    feature_id: str
    topic: str
    geometry: BaseGeometry

    def __post_init__(self):
        if self.topic not in TOPICS:
            raise ValueError(f"unknown topic {self.topic!r}")
        expected = TOPIC_GEOMETRY[self.topic]
        if self.geometry.geom_type != expected:
            raise ValueError(
                f"feature {self.feature_id}: topic {self.topic} requires "
                f"{expected} geometry, got {self.geometry.geom_type}"
            )


@dataclass(frozen=True)
class MunicipalityBoundary:
    municipality_id: str
    geometry: BaseGeometry

    def __post_init__(self):
        if self.geometry.geom_type not in ("Polygon", "MultiPolygon"):
            raise ValueError(
                f"boundary {self.municipality_id}: expected polygonal geometry, "
                f"got {self.geometry.geom_type}"
            )
        if not self.geometry.is_valid:
            raise ValueError(f"boundary {self.municipality_id}: invalid geometry")


@dataclass(frozen=True)
class ClipResult:
    assigned: dict[str, list[BaseGeometry]]
    unassigned: list[BaseGeometry]


@dataclass(frozen=True)
class MobilityResult:
    """Per-municipality indicator values plus leftover measure per topic."""

    values: dict[str, dict[str, float | None]]
    unassigned: dict[str, float] = field(default_factory=dict)


# ---- 2) Geometry helpers ----

_DIMENSION = {"Point": 0, "LineString": 1, "LinearRing": 1, "Polygon": 2}


def _dimension(geom: BaseGeometry) -> int:
    return _DIMENSION[geom.geom_type]


def _explode(geom: BaseGeometry) -> list[BaseGeometry]:
    if geom.is_empty:
        return []
    if geom.geom_type in _DIMENSION:
        return [geom]
    out: list[BaseGeometry] = []
    for part in geom.geoms:
        out.extend(_explode(part))
    return out


def _parts_of_dim(geom: BaseGeometry, dim: int) -> list[BaseGeometry]:
    return [g for g in _explode(geom) if _dimension(g) == dim]


def _measure(geom: BaseGeometry) -> float:
    dim = _dimension(geom)
    if dim == 2:
        return geom.area
    if dim == 1:
        return geom.length
    return 1.0


# ---- 3) Dissolve and clip ----


def dissolve_topic(features: Sequence[GeoFeature]) -> list[BaseGeometry]:
    """Union one topic's geometries so overlaps are measured once.

    Returns single-part pieces. All features must carry the same topic
    and be valid; an invalid geometry is reported by feature id.
    """
    if not features:
        return []
    topics = {f.topic for f in features}
    if len(topics) > 1:
        raise ValueError(f"mixed topics in dissolve: {sorted(topics)}")
    for feat in features:
        if not feat.geometry.is_valid:
            raise ValueError(f"feature {feat.feature_id}: invalid geometry")
    merged = union_all([f.geometry for f in features])
    return _explode(merged)


def clip_to_municipalities(
    pieces: Sequence[BaseGeometry], boundaries: Sequence[MunicipalityBoundary]
) -> ClipResult:
    """Split dissolved pieces along municipal boundaries.

    Polygon and line pieces are cut by intersection; parts that collapse
    to a lower dimension at a shared border are dropped. Point pieces go
    to the covering municipality, ties resolved toward the smallest id.
    Anything outside every boundary lands in ``unassigned``, so the
    total measure is conserved: assigned + unassigned = input.
    """
    groups: dict[str, BaseGeometry] = {}
    for bound in boundaries:
        mid = bound.municipality_id
        if mid in groups:
            groups[mid] = groups[mid].union(bound.geometry)
        else:
            groups[mid] = bound.geometry
    ordered = sorted(groups)
    everything = union_all(list(groups.values())) if groups else None

    assigned: dict[str, list[BaseGeometry]] = {}
    unassigned: list[BaseGeometry] = []
    for piece in pieces:
        dim = _dimension(piece)
        if dim == 0:
            hit = next((mid for mid in ordered if groups[mid].covers(piece)), None)
            if hit is None:
                unassigned.append(piece)
            else:
                assigned.setdefault(hit, []).append(piece)
            continue
        for mid in ordered:
            parts = _parts_of_dim(piece.intersection(groups[mid]), dim)
            if parts:
                assigned.setdefault(mid, []).extend(parts)
        leftover = piece.difference(everything) if everything is not None else piece
        unassigned.extend(_parts_of_dim(leftover, dim))
    return ClipResult(assigned=assigned, unassigned=unassigned)


def assign_by_representative_point(
    geometry: BaseGeometry, boundaries: Sequence[MunicipalityBoundary]
) -> str | None:
    """Municipality whose boundary covers a guaranteed-interior point.

    Uses a point on the geometry itself rather than the centroid, which
    can fall outside concave shapes. Ties go to the smallest id; returns
    None when no boundary covers the point.
    """
    probe = geometry.representative_point()
    hits = sorted(
        b.municipality_id for b in boundaries if b.geometry.covers(probe)
    )
    return hits[0] if hits else None


# ---- 4) File readers ----


def _load_collection(path) -> list[dict]:
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    if doc.get("type") != "FeatureCollection":
        raise ValueError(f"{path}: expected a GeoJSON FeatureCollection")
    crs = doc.get("crs")
    if crs is not None:
        label = json.dumps(crs).lower()
        if "4326" in label or "crs84" in label:
            raise ValueError(
                f"{path}: geographic coordinates (degrees) are not supported; "
                "supply planar coordinates in meters"
            )
    features = doc.get("features")
    if not isinstance(features, list):
        raise ValueError(f"{path}: missing feature list")
    return features


def _snapped(geom_obj: dict) -> BaseGeometry:
    return set_precision(shape(geom_obj), SNAP_GRID)


def read_features(path) -> list[GeoFeature]:
    """Load topic-tagged features; multi-part geometries are exploded."""
    out: list[GeoFeature] = []
    for i, feat in enumerate(_load_collection(path)):
        props = feat.get("properties") or {}
        topic = props.get("topic")
        if topic is None:
            raise ValueError(f"{path}: feature {i} has no topic property")
        if topic not in TOPICS:
            raise ValueError(f"{path}: feature {i} has unknown topic {topic!r}")
        base_id = str(props.get("id", f"feature-{i}"))
        parts = _explode(_snapped(feat.get("geometry") or {}))
        if not parts:
            raise ValueError(f"{path}: feature {i} ({base_id}) has empty geometry")
        expected = TOPIC_GEOMETRY[topic]
        for j, part in enumerate(parts):
            if part.geom_type != expected:
                raise ValueError(
                    f"{path}: feature {i} ({base_id}): topic {topic} requires "
                    f"{expected} geometry, got {part.geom_type}"
                )
            part_id = base_id if len(parts) == 1 else f"{base_id}#{j}"
            out.append(GeoFeature(part_id, topic, part))
    return out


def read_boundaries(path) -> list[MunicipalityBoundary]:
    """Load municipal boundary polygons keyed by the id property."""
    out: list[MunicipalityBoundary] = []
    for i, feat in enumerate(_load_collection(path)):
        props = feat.get("properties") or {}
        mid = props.get("id")
        if mid is None:
            raise ValueError(f'{path}: boundary feature {i} has no "id" property')
        geom = _snapped(feat.get("geometry") or {})
        if geom.geom_type not in ("Polygon", "MultiPolygon"):
            raise ValueError(
                f"{path}: boundary {mid}: expected polygonal geometry, "
                f"got {geom.geom_type}"
            )
        out.append(MunicipalityBoundary(str(mid), geom))
    return out


# ---- 5) Indicator computation ----


def compute_mobility_kpis(
    features: Sequence[GeoFeature],
    boundaries: Sequence[MunicipalityBoundary],
    records: Mapping[str, MunicipalityRecord] | Iterable[MunicipalityRecord],
) -> MobilityResult:
    """Dissolve, clip, and normalize features into the four indicators.

    Every municipality in ``records`` gets an entry. Without a boundary
    all four values are None (nothing can be measured); with a boundary
    and no features the values are a true zero supply. Per-capita
    indicators are None when the population is zero. A boundary whose id
    is not in ``records`` is an error.
    """
    if isinstance(records, Mapping):
        recs = dict(records)
    else:
        recs = {r.municipality_id: r for r in records}
    boundary_ids: set[str] = set()
    for bound in boundaries:
        if bound.municipality_id not in recs:
            raise ValueError(
                f"boundary references unknown municipality {bound.municipality_id}"
            )
        boundary_ids.add(bound.municipality_id)

    totals = {mid: {t: 0.0 for t in TOPICS} for mid in boundary_ids}
    unassigned = {t: 0.0 for t in TOPICS}
    for topic in TOPICS:
        pieces = dissolve_topic([f for f in features if f.topic == topic])
        if not pieces:
            continue
        clipped = clip_to_municipalities(pieces, boundaries)
        for mid, parts in clipped.assigned.items():
            totals[mid][topic] += sum(_measure(p) for p in parts)
        unassigned[topic] += sum(_measure(p) for p in clipped.unassigned)

    values: dict[str, dict[str, float | None]] = {}
    for mid in sorted(recs):
        if mid not in boundary_ids:
            values[mid] = {"M1": None, "M2": None, "M3": None, "M4": None}
            continue
        rec = recs[mid]
        got = totals[mid]
        pop = rec.population
        values[mid] = {
            "M1": None if pop == 0 else got["pedestrian"] * 100.0 / pop,
            "M2": None if pop == 0 else got["charging_station"] * 1000.0 / pop,
            "M3": got["cycleway"] * 100.0 / (1000.0 * rec.land_area_km2),
            "M4": None if pop == 0 else got["bus_stop"] * 100.0 / pop,
        }
    return MobilityResult(values=values, unassigned=unassigned)


def write_mobility_csv(path, values: Mapping[str, Mapping[str, float | None]]) -> None:
    """Write id,M1,M2,M3,M4 rows sorted by id; missing values stay blank."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["id", "M1", "M2", "M3", "M4"])
        for mid in sorted(values):
            row = values[mid]
            writer.writerow(
                [mid]
                + [
                    "" if row[k] is None else f"{row[k]:.6f}"
                    for k in ("M1", "M2", "M3", "M4")
                ]
            )

"""Batch command line for the index pipeline.

Verbs:

    run       full pipeline: ingest, score, aggregate, classify,
              statistics, sweeps, and all output files
    score     ingest and score only (scores.csv + validation.txt)
    geo       mobility indicators from feature/boundary files
    sweep     weight-sensitivity sweep files
    classify  index classification (classification.csv + breaks.json)
    validate  ingest and report, no computation

Exit codes: 0 a clean run, 1 completed but the validation report holds
error entries, 2 a stage aborted (the message names the stage). The
``CIRCITY_LOG`` environment variable sets log verbosity (DEBUG, INFO,
WARNING). Every float in an output file is written with six decimals.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

from shapely.geometry import mapping as geom_mapping

from .aggregate import compute_cci
from .analysis import correlation_matrix, descriptive_stats, sweep_area_weight
from .classify import assign_likert, jenks_breaks
from .geokpi import (
    compute_mobility_kpis,
    read_boundaries,
    read_features,
    write_mobility_csv,
)
from .ingest import SchemaError, load_dataset, read_roster
from .model import AREA_ORDER, default_registry, load_registry
from .scoring import score_dataset

logger = logging.getLogger("circity.cli")

STAT_ROWS = ("count", "mean", "std", "min", "25%", "50%", "75%", "max")


class _Abort(Exception):
    """Carries the stage name for the exit-2 error message."""

    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


def _guard(stage, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (SchemaError, ValueError, OSError) as exc:
        raise _Abort(stage, str(exc)) from exc


def _fmt(value) -> str:
    return "" if value is None else f"{value:.6f}"


# ---- 1) Input loading shared by the verbs ----


def _load_registry_config(args):
    if getattr(args, "weights", None):
        return _guard("ingest", load_registry, args.weights)
    return default_registry()


def _load_geo(args, records):
    """Mobility values from feature/boundary files, or None when absent."""
    features_path = getattr(args, "features", None)
    boundaries_path = getattr(args, "boundaries", None)
    if not features_path and not boundaries_path:
        return None, None
    if not (features_path and boundaries_path):
        raise _Abort("geo", "--features and --boundaries must be given together")
    features = _guard("geo", read_features, features_path)
    boundaries = _guard("geo", read_boundaries, boundaries_path)
    by_id = {r.municipality_id: r for r in records}
    mobility = _guard("geo", compute_mobility_kpis, features, boundaries, by_id)
    return mobility.values, boundaries


def _load_inputs(args):
    cfg = _load_registry_config(args)
    records = _guard("ingest", read_roster, args.roster)
    geo_values, boundaries = _load_geo(args, records)
    dataset, report = _guard(
        "ingest", load_dataset, args.manifest, args.roster, cfg, geo_values
    )
    return cfg, dataset, report, boundaries


def _classified_results(table, cfg, likert_k):
    results = _guard("aggregate", compute_cci, table, cfg.weights)
    ccis = [r.cci for r in results]
    distinct = len(set(ccis))
    k = max(1, min(likert_k, distinct))
    if k < likert_k:
        logger.warning(
            "reducing likert levels from %d to %d: only %d distinct index values",
            likert_k, k, distinct,
        )
    classification = _guard("classify", jenks_breaks, ccis, k)
    levels = assign_likert(ccis, classification)
    return (
        [r.with_likert(level) for r, level in zip(results, levels)],
        classification,
    )


def _parse_grid(text):
    if not text:
        return None
    return [part.strip() for part in text.split(",") if part.strip()]


# ---- 2) Output writers ----


def _writer(path):
    handle = open(path, "w", newline="", encoding="utf-8")
    return handle, csv.writer(handle, lineterminator="\n")


def _write_scores(path, table, results) -> None:
    codes = [k.code for k in table.registry]
    handle, writer = _writer(path)
    with handle:
        writer.writerow(
            ["id"] + codes
            + [f"{a.value.lower()}_score" for a in AREA_ORDER]
            + ["cci", "likert", "missing_kpis"]
        )
        for res in results:
            mid = res.municipality_id
            writer.writerow(
                [mid]
                + [_fmt(table.scores[mid][code]) for code in codes]
                + [_fmt(res.area_subscores[a]) for a in AREA_ORDER]
                + [_fmt(res.cci), str(res.likert_level), ";".join(res.missing_kpis)]
            )


def _write_stats(path, dataset) -> None:
    codes = [k.code for k in dataset.registry if k.value_type in ("number", "percentage")]
    stats = {}
    for code in codes:
        values = [rec.value(code) for rec in dataset.records]
        finite = [v for v in values if v is not None]
        stats[code] = descriptive_stats(finite) if finite else None
    handle, writer = _writer(path)
    with handle:
        writer.writerow(["stat"] + codes)
        for row in STAT_ROWS:
            cells = [
                "" if stats[code] is None else _fmt(stats[code].as_rows()[row])
                for code in codes
            ]
            writer.writerow([row] + cells)


def _write_correlations(path, results, dataset) -> None:
    by_id = {rec.municipality_id: rec for rec in dataset.records}
    columns = {"cci": [r.cci for r in results]}
    for area in AREA_ORDER:
        columns[f"{area.value.lower()}_score"] = [r.area_subscores[area] for r in results]
    columns["log10_population"] = [
        math.log10(by_id[r.municipality_id].population)
        if by_id[r.municipality_id].population > 0
        else None
        for r in results
    ]
    corr = correlation_matrix(columns)
    for warning in corr.warnings:
        logger.warning("correlation: %s", warning)
    handle, writer = _writer(path)
    with handle:
        writer.writerow(["variable"] + list(corr.names))
        for name, row in zip(corr.names, corr.values):
            writer.writerow([name] + [_fmt(v) for v in row])


def _write_sweep(out_dir: Path, table, cfg, areas, grid) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for area in areas:
        sweep = _guard("analysis", sweep_area_weight, table, cfg.weights, area, grid)
        ids = sorted(sweep.baseline)
        handle, writer = _writer(out_dir / f"{area.value}.csv")
        with handle:
            writer.writerow(["weight"] + ids)
            for point in sweep.points:
                writer.writerow(
                    [_fmt(float(point.weight))] + [_fmt(point.cci[mid]) for mid in ids]
                )
        handle, writer = _writer(out_dir / f"{area.value}_delta.csv")
        with handle:
            writer.writerow(["id", "max_delta_percent", "absolute"])
            for mid in ids:
                writer.writerow(
                    [mid, _fmt(sweep.max_delta[mid]),
                     "1" if mid in sweep.absolute_ids else "0"]
                )
        handle, writer = _writer(out_dir / f"{area.value}_hist.csv")
        with handle:
            writer.writerow(["bin_low", "bin_high", "count"])
            for lo, hi, count in sweep.histogram:
                writer.writerow([_fmt(lo), _fmt(hi), str(count)])
        (out_dir / f"{area.value}.json").write_text(
            json.dumps(sweep.to_json_dict(), sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )


def _write_validation(path, report, total: int) -> None:
    lines = [f"{len(report.errors())} errors, {len(report.warnings())} warnings", ""]
    for issue in report.issues:
        lines.append(f"{issue.severity}: {issue.municipality_id or '-'}: {issue.message}")
    if report.issues:
        lines.append("")
    for code, count in report.coverage.items():
        lines.append(f"coverage: {code} {count}/{total}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_geojson(path, results, boundaries, dataset) -> None:
    geoms = {}
    for bound in boundaries:
        mid = bound.municipality_id
        geoms[mid] = (
            geoms[mid].union(bound.geometry) if mid in geoms else bound.geometry
        )
    names = {rec.municipality_id: rec.name for rec in dataset.records}
    features = []
    for res in results:
        mid = res.municipality_id
        geom = geoms.get(mid)
        if geom is None:
            logger.warning("no boundary for municipality %s, skipped in results", mid)
            continue
        properties = {
            "id": mid,
            "name": names.get(mid, ""),
            "cci": round(res.cci, 6),
            "likert": res.likert_level,
        }
        for area in AREA_ORDER:
            properties[f"{area.value.lower()}_score"] = round(res.area_subscores[area], 6)
        features.append(
            {"type": "Feature", "geometry": geom_mapping(geom), "properties": properties}
        )
    doc = {"type": "FeatureCollection", "features": features}
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")


# ---- 3) Verb handlers ----


def _finish(report) -> int:
    return 0 if report.ok() else 1


def cmd_run(args) -> int:
    cfg, dataset, report, boundaries = _load_inputs(args)
    table = _guard("score", score_dataset, dataset)
    results, _ = _classified_results(table, cfg, args.likert_k)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _guard("output", _write_scores, out / "scores.csv", table, results)
    _guard("analysis", _write_stats, out / "stats.csv", dataset)
    _guard("analysis", _write_correlations, out / "correlations.csv", results, dataset)
    _write_sweep(out / "sweep", table, cfg, AREA_ORDER, _parse_grid(args.sweep_grid))
    _guard("output", _write_validation, out / "validation.txt", report, len(dataset.records))
    if boundaries is not None:
        _guard("output", _write_geojson, out / "results.geojson", results, boundaries, dataset)
    return _finish(report)


def cmd_score(args) -> int:
    cfg, dataset, report, _ = _load_inputs(args)
    table = _guard("score", score_dataset, dataset)
    results, _ = _classified_results(table, cfg, args.likert_k)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _guard("output", _write_scores, out / "scores.csv", table, results)
    _guard("output", _write_validation, out / "validation.txt", report, len(dataset.records))
    return _finish(report)


def cmd_geo(args) -> int:
    records = _guard("ingest", read_roster, args.roster)
    features = _guard("geo", read_features, args.features)
    boundaries = _guard("geo", read_boundaries, args.boundaries)
    mobility = _guard(
        "geo", compute_mobility_kpis, features, boundaries,
        {r.municipality_id: r for r in records},
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _guard("output", write_mobility_csv, out / "mobility.csv", mobility.values)
    return 0


def cmd_sweep(args) -> int:
    cfg, dataset, report, _ = _load_inputs(args)
    table = _guard("score", score_dataset, dataset)
    areas = AREA_ORDER if args.area is None else tuple(
        a for a in AREA_ORDER if a.value == args.area
    )
    _write_sweep(Path(args.out) / "sweep", table, cfg, areas, _parse_grid(args.sweep_grid))
    return _finish(report)


def cmd_classify(args) -> int:
    cfg, dataset, report, _ = _load_inputs(args)
    table = _guard("score", score_dataset, dataset)
    results, classification = _classified_results(table, cfg, args.likert_k)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    handle, writer = _writer(out / "classification.csv")
    with handle:
        writer.writerow(["id", "cci", "likert"])
        for res in results:
            writer.writerow([res.municipality_id, _fmt(res.cci), str(res.likert_level)])
    (out / "breaks.json").write_text(
        json.dumps(
            {
                "k": classification.k,
                "breaks": [round(b, 6) for b in classification.breaks],
                "sdcm": round(classification.sdcm, 6),
                "gvf": round(classification.gvf, 6),
            },
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    return _finish(report)


def cmd_validate(args) -> int:
    _, dataset, report, _ = _load_inputs(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _guard("output", _write_validation, out / "validation.txt", report, len(dataset.records))
    print(f"{len(report.errors())} errors, {len(report.warnings())} warnings")
    return _finish(report)


# ---- 4) Parser ----


def _add_data_arguments(sp, geo=True):
    sp.add_argument("--manifest", required=True, help="KPI manifest CSV (kpi,path)")
    sp.add_argument("--roster", required=True, help="municipality roster CSV")
    sp.add_argument(
        "--weights",
        help="registry configuration JSON replacing the packaged definitions and weights",
    )
    sp.add_argument("--out", default="out", help="output directory (default: out)")
    if geo:
        sp.add_argument("--features", help="GeoJSON feature file, planar meters")
        sp.add_argument("--boundaries", help="GeoJSON municipal boundaries, planar meters")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="circity",
        description="Municipality circularity index pipeline",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    run_p = sub.add_parser("run", help="full pipeline with every output file")
    _add_data_arguments(run_p)
    run_p.add_argument("--likert-k", type=int, default=5, help="classification levels")
    run_p.add_argument("--sweep-grid", help="comma-separated weight grid, e.g. 0.05,0.1")
    run_p.add_argument("--seed", type=int, help="reserved for future resampling options")
    run_p.set_defaults(handler=cmd_run)

    score_p = sub.add_parser("score", help="scores.csv and validation.txt only")
    _add_data_arguments(score_p)
    score_p.add_argument("--likert-k", type=int, default=5, help="classification levels")
    score_p.set_defaults(handler=cmd_score)

    geo_p = sub.add_parser("geo", help="mobility indicators from geospatial files")
    geo_p.add_argument("--roster", required=True, help="municipality roster CSV")
    geo_p.add_argument("--features", required=True, help="GeoJSON feature file")
    geo_p.add_argument("--boundaries", required=True, help="GeoJSON boundary file")
    geo_p.add_argument("--out", default="out", help="output directory (default: out)")
    geo_p.set_defaults(handler=cmd_geo)

    sweep_p = sub.add_parser("sweep", help="weight-sensitivity sweep files")
    _add_data_arguments(sweep_p)
    sweep_p.add_argument(
        "--area", choices=[a.value for a in AREA_ORDER], help="sweep one area only"
    )
    sweep_p.add_argument("--sweep-grid", help="comma-separated weight grid")
    sweep_p.set_defaults(handler=cmd_sweep)

    classify_p = sub.add_parser("classify", help="classification.csv and breaks.json")
    _add_data_arguments(classify_p)
    classify_p.add_argument("--likert-k", type=int, default=5, help="classification levels")
    classify_p.set_defaults(handler=cmd_classify)

    validate_p = sub.add_parser("validate", help="ingest and report without computing")
    _add_data_arguments(validate_p, geo=False)
    validate_p.set_defaults(handler=cmd_validate)
    return parser


def main(argv=None) -> int:
    level_name = os.environ.get("CIRCITY_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except _Abort as exc:
        print(f"error in {exc.stage}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
